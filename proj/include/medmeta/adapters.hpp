// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Metric registry over native scorers and external adapter processes that
// speak line-delimited JSON on stdin/stdout.
//
// harness -> adapter: {"type":"hello","protocol":1}
//                     {"type":"score","id":N,"reference":S,"candidate":S}
//                     {"type":"shutdown"}
// adapter -> harness: {"type":"ready","name":S,"range":[lo,hi]}
//                     {"type":"score","id":N,"value":X}
//                     {"type":"error","id":N,"message":S}

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "medmeta/corpus.hpp"
#include "medmeta/error.hpp"
#include "medmeta/labeler.hpp"
#include "medmeta/metrics.hpp"

extern char** environ;

namespace medmeta {

// ---------------------------------------------------------------------------
// Errors

class AdapterError : public Error {
public:
    using Error::Error;
};

class SpawnFailed : public AdapterError {
public:
    using AdapterError::AdapterError;
};

class HandshakeTimeout : public AdapterError {
public:
    using AdapterError::AdapterError;
};

class ProtocolViolation : public AdapterError {
public:
    using AdapterError::AdapterError;
};

/// The adapter process went away mid-batch. Holds the scores received so far.
class AdapterDied : public AdapterError {
public:
    AdapterDied(const std::string& why, std::vector<MetricScore> partial)
        : AdapterError("adapter died: " + why), partial_(std::move(partial)) {}
    const std::vector<MetricScore>& partial_results() const noexcept { return partial_; }

private:
    std::vector<MetricScore> partial_;
};

class ScoreTimeout : public AdapterError {
public:
    explicit ScoreTimeout(std::string pair_id)
        : AdapterError("no score received for pair " + pair_id), pair_id_(std::move(pair_id)) {}
    const std::string& pair_id() const noexcept { return pair_id_; }

private:
    std::string pair_id_;
};

/// The adapter answered a request with an error record.
class ScoreFailed : public AdapterError {
public:
    ScoreFailed(std::string pair_id, const std::string& message, std::vector<MetricScore> partial)
        : AdapterError("adapter failed on pair " + pair_id + ": " + message),
          pair_id_(std::move(pair_id)), partial_(std::move(partial)) {}
    const std::string& pair_id() const noexcept { return pair_id_; }
    const std::vector<MetricScore>& partial_results() const noexcept { return partial_; }

private:
    std::string pair_id_;
    std::vector<MetricScore> partial_;
};

class UnknownMetric : public ConfigError {
public:
    explicit UnknownMetric(const std::string& id) : ConfigError("unknown metric id: " + id) {}
};

// ---------------------------------------------------------------------------
// Descriptors and registry

enum class MetricKind { Native, External };

struct MetricDescriptor {
    std::string metric_id;
    MetricKind kind = MetricKind::Native;
    std::vector<std::string> command;
    double range_lo = 0.0;
    double range_hi = 1.0;
};

/// Ids of the built-in scorers. "oracle" and "constant" are diagnostics:
/// oracle gives 0 on significant pairs and 1 otherwise, constant gives 0.5.
inline const std::vector<std::string>& native_metric_ids() {
    static const std::vector<std::string> ids = {"bleu",     "rouge_l", "meteor", "chexpert_f1",
                                                 "graph_f1", "oracle",  "constant"};
    return ids;
}

class MetricRegistry {
public:
    static MetricRegistry with_builtins() {
        MetricRegistry r;
        for (const auto& id : native_metric_ids()) r.add({id, MetricKind::Native, {}, 0.0, 1.0});
        return r;
    }

    void add(MetricDescriptor d) {
        if (d.metric_id.empty()) throw ConfigError("metric id must be non-empty");
        if (d.kind == MetricKind::External && d.command.empty())
            throw ConfigError("external metric " + d.metric_id + " has no command");
        if (!(d.range_lo < d.range_hi))
            throw ConfigError("metric " + d.metric_id + " has an empty range");
        if (index_.count(d.metric_id)) throw ConfigError("duplicate metric id: " + d.metric_id);
        index_[d.metric_id] = descriptors_.size();
        descriptors_.push_back(std::move(d));
    }

    /// Read a metrics.json registry file. Relative command paths containing a
    /// slash resolve against the file's directory.
    void load_config(const std::filesystem::path& path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(detail::read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("metrics") || !j["metrics"].is_array())
            throw ConfigError(path.string() + ": expected {\"metrics\":[...]}");
        const auto base = path.parent_path();
        for (const auto& m : j["metrics"]) {
            try {
                MetricDescriptor d;
                d.metric_id = m.at("id").get<std::string>();
                const auto kind = m.value("kind", std::string("external"));
                if (kind != "external")
                    throw ConfigError("metric " + d.metric_id + ": only external metrics can be configured");
                d.kind = MetricKind::External;
                d.command = m.at("command").get<std::vector<std::string>>();
                if (!d.command.empty()) {
                    std::filesystem::path exe(d.command[0]);
                    if (exe.is_relative() && d.command[0].find('/') != std::string::npos)
                        d.command[0] = (base / exe).lexically_normal().string();
                }
                if (m.contains("range")) {
                    auto r = m.at("range").get<std::vector<double>>();
                    if (r.size() != 2) throw ConfigError("metric " + d.metric_id + ": range needs 2 values");
                    d.range_lo = r[0];
                    d.range_hi = r[1];
                }
                add(std::move(d));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(path.string() + ": " + e.what());
            }
        }
    }

    const MetricDescriptor& get(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownMetric(id);
        return descriptors_[it->second];
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    const std::vector<MetricDescriptor>& descriptors() const noexcept { return descriptors_; }

private:
    std::vector<MetricDescriptor> descriptors_;
    std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Batches

struct PairInput {
    std::string pair_id;
    std::string reference;
    std::string candidate;
    std::optional<Significance> significance;
};

struct BatchResult {
    std::vector<MetricScore> scores; // input order
    std::vector<std::string> warnings;
};

inline std::vector<PairInput> inputs_from(const PairDataset& d) {
    std::vector<PairInput> out;
    out.reserve(d.size());
    for (const auto& p : d.pairs) out.push_back({p.pair_id, p.gt.text, p.me.text, p.significance});
    return out;
}

namespace detail {

inline void require_unique_ids(const std::vector<PairInput>& pairs) {
    std::set<std::string> seen;
    for (const auto& p : pairs)
        if (!seen.insert(p.pair_id).second) throw DuplicateId(p.pair_id);
}

/// Clamp into [lo, hi] with a warning, then map linearly onto [0, 1].
inline double normalize_score(const std::string& metric_id, const std::string& pair_id, double v,
                              double lo, double hi, std::vector<std::string>& warnings) {
    if (v < lo || v > hi) {
        const double c = std::clamp(v, lo, hi);
        warnings.push_back(metric_id + ": pair " + pair_id + ": value " + nlohmann::json(v).dump() +
                           " outside [" + nlohmann::json(lo).dump() + ", " +
                           nlohmann::json(hi).dump() + "], clamped to " + nlohmann::json(c).dump());
        v = c;
    }
    return (v - lo) / (hi - lo);
}

} // namespace detail

/// Score with a built-in metric. `g` is needed by chexpert_f1 and graph_f1.
inline BatchResult score_native(const std::string& metric_id, const std::vector<PairInput>& pairs,
                                const Gazetteer* g) {
    detail::require_unique_ids(pairs);
    const bool needs_gaz = metric_id == "chexpert_f1" || metric_id == "graph_f1";
    if (needs_gaz && !g) throw ConfigError(metric_id + " requires a gazetteer");
    BatchResult out;
    out.scores.reserve(pairs.size());
    for (const auto& p : pairs) {
        double v = 0.0;
        if (metric_id == "bleu")
            v = bleu(p.reference, p.candidate);
        else if (metric_id == "rouge_l")
            v = rouge_l(p.reference, p.candidate);
        else if (metric_id == "meteor")
            v = meteor(p.reference, p.candidate);
        else if (metric_id == "chexpert_f1")
            v = chexpert_f1(p.reference, p.candidate, *g);
        else if (metric_id == "graph_f1")
            v = graph_f1(p.reference, p.candidate, *g);
        else if (metric_id == "oracle") {
            if (!p.significance) throw ConfigError("oracle metric needs pair significance");
            v = *p.significance == Significance::Significant ? 0.0 : 1.0;
        } else if (metric_id == "constant")
            v = 0.5;
        else
            throw UnknownMetric(metric_id);
        if (!std::isfinite(v)) throw Error(metric_id + " produced a non-finite score");
        out.scores.push_back({metric_id, p.pair_id, v});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subprocess plumbing

namespace detail {

class ChildProcess {
public:
    ChildProcess() = default;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess() { kill(); }

    void spawn(const std::vector<std::string>& argv) {
        int in[2], out[2];
        if (::pipe2(in, O_CLOEXEC) != 0) throw SpawnFailed(std::string("pipe: ") + std::strerror(errno));
        if (::pipe2(out, O_CLOEXEC) != 0) {
            ::close(in[0]);
            ::close(in[1]);
            throw SpawnFailed(std::string("pipe: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, in[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&fa, out[1], STDOUT_FILENO);

        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        pid_t pid = -1;
        const int rc = ::posix_spawnp(&pid, args[0], &fa, nullptr, args.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(in[0]);
        ::close(out[1]);
        if (rc != 0) {
            ::close(in[1]);
            ::close(out[0]);
            throw SpawnFailed("cannot run " + argv[0] + ": " + std::strerror(rc));
        }
        pid_ = pid;
        to_child_ = in[1];
        from_child_ = out[0];
    }

    /// Returns false when the child closed its stdin.
    bool write_all(std::string_view data) {
        while (!data.empty()) {
            const auto n = ::write(to_child_, data.data(), data.size());
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            data.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    enum class ReadStatus { Line, Timeout, Eof };

    ReadStatus read_line(std::string& line, std::chrono::steady_clock::time_point deadline) {
        constexpr std::size_t kMaxLine = 64u << 20;
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                line.assign(buf_, 0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return ReadStatus::Line;
            }
            if (eof_) return ReadStatus::Eof;
            if (buf_.size() > kMaxLine) throw ProtocolViolation("response line too long");
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) return ReadStatus::Timeout;
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            pollfd pfd{from_child_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(ms + 1, 1 << 30)));
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw AdapterError(std::string("poll: ") + std::strerror(errno));
            }
            if (pr == 0) continue;
            char chunk[65536];
            const auto n = ::read(from_child_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                eof_ = true;
            } else if (n == 0) {
                eof_ = true;
            } else {
                buf_.append(chunk, static_cast<std::size_t>(n));
            }
        }
    }

    void close_stdin() {
        if (to_child_ >= 0) ::close(to_child_);
        to_child_ = -1;
    }

    /// Wait up to `grace` for a clean exit, then SIGKILL.
    void finish(std::chrono::milliseconds grace) {
        if (pid_ <= 0) return;
        close_stdin();
        const auto until = std::chrono::steady_clock::now() + grace;
        while (std::chrono::steady_clock::now() < until) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        kill();
    }

    void kill() {
        close_stdin();
        if (from_child_ >= 0) ::close(from_child_);
        from_child_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            int status = 0;
            while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
            }
        }
        pid_ = -1;
    }

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buf_;
    bool eof_ = false;
};

inline void ignore_sigpipe_once() {
    static const bool done = [] {
        struct sigaction sa {};
        if (::sigaction(SIGPIPE, nullptr, &sa) == 0 && sa.sa_handler == SIG_DFL)
            std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

inline std::string dump_line(const nlohmann::json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

} // namespace detail

struct SessionOptions {
    std::chrono::milliseconds handshake_timeout{10'000};
    std::chrono::milliseconds request_timeout{60'000};
    std::size_t window = 8; // requests in flight
};

enum class SessionState { Idle, Ready, Failed, Closed };

/// One external adapter process. Not thread-safe; open several sessions for
/// parallel throughput.
class AdapterSession {
public:
    AdapterSession(MetricDescriptor d, SessionOptions opt = {})
        : desc_(std::move(d)), opt_(opt) {
        if (desc_.kind != MetricKind::External)
            throw ConfigError(desc_.metric_id + " is not an external metric");
        detail::ignore_sigpipe_once();
        try {
            open();
        } catch (...) {
            state_ = SessionState::Failed;
            child_.kill();
            throw;
        }
    }

    AdapterSession(const AdapterSession&) = delete;
    AdapterSession& operator=(const AdapterSession&) = delete;

    ~AdapterSession() {
        try {
            close();
        } catch (...) {
        }
    }

    SessionState state() const noexcept { return state_; }
    const std::string& adapter_name() const noexcept { return name_; }
    const MetricDescriptor& descriptor() const noexcept { return desc_; }
    const std::vector<std::string>& warnings() const noexcept { return handshake_warnings_; }

    BatchResult score_batch(const std::vector<PairInput>& pairs) {
        if (state_ != SessionState::Ready) throw AdapterError("session is not ready");
        detail::require_unique_ids(pairs);
        BatchResult out;
        std::vector<std::optional<double>> values(pairs.size());
        struct Pending {
            std::size_t index;
            std::chrono::steady_clock::time_point deadline;
        };
        std::map<long long, Pending> pending;
        std::size_t next = 0, done = 0;

        auto partial = [&] {
            std::vector<MetricScore> s;
            for (std::size_t i = 0; i < pairs.size(); ++i)
                if (values[i]) s.push_back({desc_.metric_id, pairs[i].pair_id, *values[i]});
            return s;
        };
        auto fail = [&](const std::string& why) -> AdapterDied {
            state_ = SessionState::Failed;
            child_.kill();
            return AdapterDied(why, partial());
        };

        while (done < pairs.size()) {
            while (next < pairs.size() && pending.size() < std::max<std::size_t>(1, opt_.window)) {
                const long long id = next_id_++;
                nlohmann::json req = {{"type", "score"},
                                      {"id", id},
                                      {"reference", pairs[next].reference},
                                      {"candidate", pairs[next].candidate}};
                if (!child_.write_all(detail::dump_line(req))) throw fail("stdin closed");
                pending[id] = {next, std::chrono::steady_clock::now() + opt_.request_timeout};
                ++next;
            }
            auto earliest = std::min_element(pending.begin(), pending.end(), [](auto& a, auto& b) {
                return a.second.deadline < b.second.deadline;
            });
            std::string line;
            auto st = child_.read_line(line, earliest->second.deadline);
            if (st == detail::ChildProcess::ReadStatus::Eof) throw fail("unexpected end of output");
            if (st == detail::ChildProcess::ReadStatus::Timeout) {
                state_ = SessionState::Failed;
                child_.kill();
                throw ScoreTimeout(pairs[earliest->second.index].pair_id);
            }
            nlohmann::json msg = parse_message(line);
            const auto type = msg["type"].get<std::string>();
            if (type != "score" && type != "error") violate("unexpected '" + type + "' message");
            auto idv = msg.find("id");
            if (idv == msg.end() || !idv->is_number_integer() || idv->get<long long>() <= 0)
                violate("response lacks a positive integer id");
            auto it = pending.find(idv->get<long long>());
            if (it == pending.end()) violate("response for unknown id " + idv->dump());
            const auto idx = it->second.index;
            if (type == "error") {
                state_ = SessionState::Failed;
                child_.kill();
                std::string m = msg.contains("message") && msg["message"].is_string()
                                    ? msg["message"].get<std::string>()
                                    : std::string("(no message)");
                throw ScoreFailed(pairs[idx].pair_id, m, partial());
            }
            auto v = msg.find("value");
            if (v == msg.end() || !v->is_number()) violate("score response lacks a numeric value");
            const double raw = v->get<double>();
            if (!std::isfinite(raw)) violate("non-finite score value");
            values[idx] = detail::normalize_score(desc_.metric_id, pairs[idx].pair_id, raw,
                                                  desc_.range_lo, desc_.range_hi, out.warnings);
            pending.erase(it);
            ++done;
        }
        out.scores = partial();
        return out;
    }

    /// Send shutdown and reap the process.
    void close() {
        if (state_ == SessionState::Closed) return;
        if (state_ == SessionState::Ready)
            child_.write_all(detail::dump_line({{"type", "shutdown"}}));
        child_.finish(std::chrono::milliseconds(2000));
        state_ = SessionState::Closed;
    }

private:
    [[noreturn]] void violate(const std::string& why) {
        state_ = SessionState::Failed;
        child_.kill();
        throw ProtocolViolation(desc_.metric_id + ": " + why);
    }

    nlohmann::json parse_message(const std::string& line) {
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            violate("unparseable line: " + line.substr(0, 120));
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
            violate("message without a string 'type'");
        return msg;
    }

    void open() {
        child_.spawn(desc_.command);
        state_ = SessionState::Idle;
        if (!child_.write_all(detail::dump_line({{"type", "hello"}, {"protocol", 1}})))
            throw SpawnFailed(desc_.metric_id + ": adapter closed stdin before handshake");
        std::string line;
        auto st = child_.read_line(line, std::chrono::steady_clock::now() + opt_.handshake_timeout);
        if (st == detail::ChildProcess::ReadStatus::Eof)
            throw SpawnFailed(desc_.metric_id + ": adapter exited before handshake");
        if (st == detail::ChildProcess::ReadStatus::Timeout)
            throw HandshakeTimeout(desc_.metric_id + ": no ready message");
        auto msg = parse_message(line);
        if (msg["type"] != "ready") violate("expected ready, got " + msg["type"].dump());
        if (auto n = msg.find("name"); n != msg.end() && n->is_string()) name_ = n->get<std::string>();
        auto r = msg.find("range");
        if (r == msg.end() || !r->is_array() || r->size() != 2 || !(*r)[0].is_number() ||
            !(*r)[1].is_number())
            violate("ready message lacks a [lo,hi] range");
        const double lo = (*r)[0].get<double>(), hi = (*r)[1].get<double>();
        if (!(lo < hi)) violate("ready message has an empty range");
        if (lo != desc_.range_lo || hi != desc_.range_hi)
            handshake_warnings_.push_back(desc_.metric_id + ": adapter reports range [" +
                                          (*r)[0].dump() + ", " + (*r)[1].dump() +
                                          "], using configured range");
        state_ = SessionState::Ready;
    }

    MetricDescriptor desc_;
    SessionOptions opt_;
    detail::ChildProcess child_;
    SessionState state_ = SessionState::Idle;
    std::string name_;
    std::vector<std::string> handshake_warnings_;
    long long next_id_ = 1;
};

/// Score pairs with any registered metric, native or external.
inline BatchResult score_metric(const MetricDescriptor& d, const std::vector<PairInput>& pairs,
                                const Gazetteer* g, SessionOptions opt = {}) {
    if (d.kind == MetricKind::Native) return score_native(d.metric_id, pairs, g);
    AdapterSession s(d, opt);
    auto out = s.score_batch(pairs);
    out.warnings.insert(out.warnings.begin(), s.warnings().begin(), s.warnings().end());
    s.close();
    return out;
}

} // namespace medmeta
