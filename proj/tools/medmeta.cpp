// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

// medmeta: generate perturbed report pairs, score them and meta-evaluate metrics.
//
// Exit codes: 0 success, 1 internal error, 2 invalid input or configuration,
// 3 adapter failure.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "medmeta/medmeta.hpp"

namespace fs = std::filesystem;
using namespace medmeta;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitAdapter = 3;

constexpr const char* kManifestVersion = "1";

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

/// Shortest text that round-trips to the same double.
std::string num(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v * 100.0 + 0.0);
    std::string s(buf);
    return s == "-0.00" ? "0.00" : s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

fs::path data_dir() {
    if (const char* d = std::getenv("MEDMETA_DATA_DIR"); d && *d) return d;
    return MEDMETA_DEFAULT_DATA_DIR;
}

fs::path gazetteer_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* g = std::getenv("MEDMETA_GAZETTEER"); g && *g) return g;
    return data_dir() / "gazetteer.json";
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects what a run read and wrote, then emits manifest.json.
class Run {
public:
    Run(std::string command, std::vector<std::string> argv, fs::path out_dir)
        : command_(std::move(command)), argv_(std::move(argv)), out_dir_(std::move(out_dir)) {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec) throw IoError("cannot create " + out_dir_.string() + ": " + ec.message());
    }

    void input(const fs::path& p) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) input(f);
            return;
        }
        inputs_.emplace_back(fs::absolute(p).lexically_normal().string(),
                             sha256_hex(detail::read_file(p)));
    }

    void flag(const std::string& name, ojson value) { flags_[name] = std::move(value); }
    void seed(std::uint64_t s) { seed_ = s; }
    void metrics(std::vector<std::string> ids) { metrics_ = std::move(ids); }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(out_dir_ / name, content);
        outputs_.emplace_back(name, sha256_hex(content));
    }

    void finish() {
        ojson m;
        m["manifest_version"] = kManifestVersion;
        ojson id_src;
        id_src["command"] = command_;
        // The output location does not change what a run computes.
        id_src["flags"] = flags_;
        id_src["flags"].erase("out-dir");
        id_src["inputs"] = ojson::array();
        for (const auto& [p, d] : inputs_) id_src["inputs"].push_back(d);
        m["run_id"] = sha256_hex(id_src.dump()).substr(0, 16);
        m["timestamp"] = utc_now();
        m["command"] = command_;
        m["argv"] = argv_;
        m["cwd"] = fs::current_path().string();
        m["flags"] = flags_;
        m["inputs"] = ojson::array();
        for (const auto& [p, d] : inputs_) m["inputs"].push_back({{"path", p}, {"sha256", d}});
        if (seed_) m["seed"] = *seed_;
        else m["seed"] = nullptr;
        m["metrics"] = metrics_;
        m["outputs"] = ojson::array();
        for (const auto& [p, d] : outputs_) m["outputs"].push_back({{"path", p}, {"sha256", d}});
        write_file_atomic(out_dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    fs::path out_dir_;
    ojson flags_ = ojson::object();
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    std::optional<std::uint64_t> seed_;
    std::vector<std::string> metrics_;
};

void record_flags(Run& run, const CLI::App& sub) {
    for (const auto* opt : sub.get_options()) {
        if (opt->count() == 0 || opt->get_name() == "--help") continue;
        std::string name = opt->get_name();
        while (!name.empty() && name.front() == '-') name.erase(0, 1);
        const auto& res = opt->results();
        if (res.empty()) run.flag(name, true);
        else if (res.size() == 1) run.flag(name, res.front());
        else run.flag(name, res);
    }
}

// ---------------------------------------------------------------------------
// Scoring

struct Scorer {
    MetricRegistry registry = MetricRegistry::with_builtins();
    Gazetteer gazetteer;

    void check(const std::vector<std::string>& ids) const {
        if (ids.empty()) throw ConfigError("no metrics requested");
        std::set<std::string> seen;
        for (const auto& id : ids) {
            registry.get(id);
            if (!seen.insert(id).second) throw ConfigError("metric listed twice: " + id);
        }
    }

    /// One task per metric; results in the order of `ids`.
    std::vector<BatchResult> score(const std::vector<std::string>& ids,
                                   const std::vector<PairInput>& pairs) const {
        std::vector<std::future<BatchResult>> jobs;
        for (const auto& id : ids) {
            const auto& d = registry.get(id);
            jobs.push_back(std::async(std::launch::async,
                                      [&d, &pairs, this] { return score_metric(d, pairs, &gazetteer); }));
        }
        std::vector<BatchResult> out;
        std::exception_ptr first;
        for (auto& j : jobs) {
            try {
                out.push_back(j.get());
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
        for (const auto& r : out)
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        return out;
    }
};

Scorer make_scorer(const std::string& gaz_flag, const std::string& config, Run& run) {
    const auto gp = gazetteer_path(gaz_flag);
    Scorer s{MetricRegistry::with_builtins(), Gazetteer::load(gp)};
    run.input(gp);
    if (!config.empty()) {
        s.registry.load_config(config);
        run.input(config);
    }
    return s;
}

std::string scores_csv(const std::vector<BatchResult>& results) {
    std::vector<const MetricScore*> rows;
    for (const auto& r : results)
        for (const auto& s : r.scores) rows.push_back(&s);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
        return std::tie(a->pair_id, a->metric_id) < std::tie(b->pair_id, b->metric_id);
    });
    std::string out = "pair_id,metric_id,value\n";
    for (const auto* s : rows) out += s->pair_id + "," + s->metric_id + "," + num(s->value) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Table rendering

std::string table_csv(const std::vector<MetaEvalReport>& reports, bool discriminative) {
    const auto layout = cell_layout();
    std::string out = "metric_id";
    std::vector<std::string> labels;
    for (const auto& f : layout) {
        AspectCell c{f.aspect, f.error_type};
        labels.push_back(c.label());
        out += "," + labels.back();
    }
    out += ",overall,ci_low,ci_high\n";
    for (const auto& r : reports) {
        const auto& cells = discriminative ? r.discriminative_cells : r.robustness_cells;
        const auto& overall = discriminative ? r.overall_discriminative : r.overall_robustness;
        out += r.metric_id;
        for (const auto& l : labels) {
            out += ",";
            for (const auto& c : cells)
                if (c.label() == l) out += pct(c.mean);
        }
        if (overall)
            out += "," + pct(overall->mean) + "," + pct(overall->ci_low) + "," + pct(overall->ci_high);
        else
            out += ",,,";
        out += "\n";
    }
    return out;
}

ojson cell_json(const AspectCell& c) {
    ojson j;
    j["cell"] = c.label();
    j["significance"] = std::string(to_string(c.significance));
    j["n"] = c.n;
    j["mean"] = c.mean;
    j["ci_low"] = c.ci_low;
    j["ci_high"] = c.ci_high;
    return j;
}

ojson report_json(const MetaEvalReport& r) {
    ojson j;
    j["metric_id"] = r.metric_id;
    j["zero_gap"] = r.zero_gap();
    j["overall_discriminative"] = r.overall_discriminative ? cell_json(*r.overall_discriminative) : ojson();
    j["overall_robustness"] = r.overall_robustness ? cell_json(*r.overall_robustness) : ojson();
    j["discriminative"] = ojson::array();
    for (const auto& c : r.discriminative_cells) j["discriminative"].push_back(cell_json(c));
    j["robustness"] = ojson::array();
    for (const auto& c : r.robustness_cells) j["robustness"].push_back(cell_json(c));
    return j;
}

ojson monotonicity_json(const MonotonicityProfile& p) {
    ojson j;
    j["metric_id"] = p.metric_id;
    j["group_means"] = ojson::array();
    for (double m : p.group_means) j["group_means"].push_back(m);
    j["violations"] = ojson::array();
    for (const auto& v : p.violations)
        j["violations"].push_back({{"from", v.from_group}, {"to", v.to_group}, {"delta", v.delta}});
    j["monotonic"] = p.violations.empty();
    return j;
}

std::string summary_md(const std::vector<MetaEvalReport>& reports,
                       const std::vector<MonotonicityProfile>& mono, std::size_t n_pairs,
                       const BootstrapOptions& bo) {
    std::string out = "# Meta-evaluation summary\n\n";
    out += std::to_string(n_pairs) + " pairs, " + std::to_string(bo.resamples) +
           " bootstrap resamples, " + pct(bo.level) + "% intervals, seed " + std::to_string(bo.seed) +
           ".\n\nScores are x100. Discriminative: lower is better. Robustness: higher is better.\n\n";
    out += "| metric | discriminative | robustness | gap | note |\n|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        std::string d = r.overall_discriminative ? pct(r.overall_discriminative->mean) : "";
        std::string rb = r.overall_robustness ? pct(r.overall_robustness->mean) : "";
        std::string gap;
        if (r.overall_discriminative && r.overall_robustness)
            gap = pct(r.overall_robustness->mean - r.overall_discriminative->mean);
        out += "| " + r.metric_id + " | " + d + " | " + rb + " | " + gap + " | " +
               (r.zero_gap() ? "zero gap: does not separate significant from insignificant errors" : "") +
               " |\n";
    }
    if (!mono.empty()) {
        out += "\n## Severity groups\n\n| metric | G0 | G1 | G2 | G3 | G4 | violations |\n"
               "|---|---|---|---|---|---|---|\n";
        for (const auto& p : mono) {
            out += "| " + p.metric_id;
            for (double m : p.group_means) out += " | " + pct(m);
            std::string v;
            for (const auto& x : p.violations)
                v += (v.empty() ? "" : ", ") + std::to_string(x.from_group) + "->" + std::to_string(x.to_group);
            out += " | " + (v.empty() ? std::string("none") : v) + " |\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

struct Common {
    std::string out_dir;
    std::string gazetteer;
};

struct PerturbOpts {
    Common c;
    std::string input, rules, severity, aspect, error_type, significance;
    std::optional<std::uint64_t> seed;
    bool full = false;
    std::size_t count = kPairsPerCell;
};

int cmd_perturb(const PerturbOpts& o, const CLI::App& sub, const std::vector<std::string>& argv) {
    const bool cell = !o.aspect.empty() || !o.error_type.empty() || !o.significance.empty();
    if (o.full && cell) throw ConfigError("--full-dataset cannot be combined with a cell selection");
    if (!o.full && !cell && o.severity.empty())
        throw ConfigError("nothing to do: pass --full-dataset, a cell selection, or --severity");

    Run run("perturb", argv, o.c.out_dir);
    record_flags(run, sub);
    run.seed(*o.seed);
    const auto gp = gazetteer_path(o.c.gazetteer);
    auto g = Gazetteer::load(gp);
    run.input(gp);
    const fs::path rules_dir = o.rules.empty() ? data_dir() / "rules" : fs::path(o.rules);
    auto book = RuleBook::load_dir(rules_dir, g);
    run.input(rules_dir);
    Perturber p(std::move(book), std::move(g));

    if (o.full || cell) {
        const fs::path input = o.input.empty() ? data_dir() / "reports.jsonl" : fs::path(o.input);
        auto reports = load_reports(input);
        run.input(input);
        std::vector<PerturbationOutcome> outcomes;
        if (o.full) {
            outcomes = p.generate_dataset(reports, *o.seed);
            auto violations = validate_composition(to_dataset(outcomes));
            if (!violations.empty()) {
                std::string m = "generated dataset violates the composition:";
                for (const auto& v : violations) m += "\n  " + v.describe();
                throw Error(m);
            }
        } else {
            auto a = parse_aspect(o.aspect);
            if (!a) throw ConfigError("unknown aspect: " + o.aspect);
            auto s = parse_significance(o.significance);
            if (!s) throw ConfigError("--significance must be significant or insignificant");
            std::optional<ErrorType> e;
            if (!o.error_type.empty()) {
                e = parse_error_type(o.error_type);
                if (!e) throw ConfigError("unknown error type: " + o.error_type);
            } else if (is_high_impact(*a)) {
                throw ConfigError("--error-type is required for aspect " + o.aspect);
            }
            outcomes = p.generate_cell(reports, *a, e, *s, o.count, *o.seed);
            if (outcomes.size() < o.count)
                std::cerr << "warning: only " << outcomes.size() << " of " << o.count
                          << " pairs available for " << cell_name(*a, e, *s) << "\n";
        }
        run.write("pairs.jsonl", serialize_pairs(to_dataset(outcomes)));
        run.write("pairs.provenance.jsonl", serialize_provenance(outcomes));
        std::cout << "wrote " << outcomes.size() << " pairs to " << (fs::path(o.c.out_dir) / "pairs.jsonl").string()
                  << "\n";
    }
    if (!o.severity.empty()) {
        auto reports = load_reports(o.severity);
        run.input(o.severity);
        auto fixtures = p.compose_severity_fixtures(reports, *o.seed);
        run.write("severity.jsonl", serialize_severity_fixtures(fixtures));
        std::cout << "wrote " << fixtures.size() << " severity fixtures\n";
    }
    run.finish();
    return kExitOk;
}

struct ScoreOpts {
    Common c;
    std::string pairs, metrics, config, fixtures;
    std::optional<std::uint64_t> seed;
    std::size_t bootstrap = kDefaultResamples;
    double ci_level = kDefaultCiLevel;
};

int cmd_score(const ScoreOpts& o, const CLI::App& sub, const std::vector<std::string>& argv) {
    Run run("score", argv, o.c.out_dir);
    record_flags(run, sub);
    auto scorer = make_scorer(o.c.gazetteer, o.config, run);
    const auto ids = split_list(o.metrics);
    scorer.check(ids);
    run.metrics(ids);
    auto d = load_pairs(o.pairs);
    run.input(o.pairs);
    run.write("scores.csv", scores_csv(scorer.score(ids, inputs_from(d))));
    run.finish();
    return kExitOk;
}

int cmd_metaeval(const ScoreOpts& o, const CLI::App& sub, const std::vector<std::string>& argv) {
    if (!(o.ci_level > 0.0 && o.ci_level < 1.0)) throw ConfigError("--ci-level must be in (0, 1)");
    if (o.bootstrap == 0) throw ConfigError("--bootstrap must be positive");
    Run run("metaeval", argv, o.c.out_dir);
    record_flags(run, sub);
    run.seed(*o.seed);
    auto scorer = make_scorer(o.c.gazetteer, o.config, run);
    const auto ids = split_list(o.metrics);
    scorer.check(ids);
    run.metrics(ids);
    auto d = load_pairs(o.pairs);
    run.input(o.pairs);
    std::optional<std::vector<SeverityFixture>> fixtures;
    if (!o.fixtures.empty()) {
        fixtures = load_severity_fixtures(o.fixtures);
        run.input(o.fixtures);
    }

    const auto results = scorer.score(ids, inputs_from(d));
    run.write("scores.csv", scores_csv(results));

    const BootstrapOptions bo{o.bootstrap, o.ci_level, *o.seed};
    std::vector<MetaEvalReport> reports;
    for (std::size_t i = 0; i < ids.size(); ++i)
        reports.push_back(evaluate_metric(ids[i], results[i].scores, d, bo));
    run.write("discriminative.csv", table_csv(reports, true));
    run.write("robustness.csv", table_csv(reports, false));
    ojson mj;
    mj["pairs"] = d.size();
    mj["bootstrap"] = o.bootstrap;
    mj["ci_level"] = o.ci_level;
    mj["seed"] = *o.seed;
    mj["metrics"] = ojson::array();
    for (const auto& r : reports) mj["metrics"].push_back(report_json(r));
    run.write("metaeval.json", mj.dump(2) + "\n");

    std::vector<MonotonicityProfile> mono;
    if (fixtures) {
        std::vector<PairInput> inputs;
        for (const auto& f : *fixtures)
            for (int g = 0; g < kSeverityGroups; ++g) {
                const auto& v = f.variants[static_cast<std::size_t>(g)];
                inputs.push_back({v.id, f.gt.text, v.text,
                                  g <= 1 ? Significance::Insignificant : Significance::Significant});
            }
        const auto fr = scorer.score(ids, inputs);
        ojson arr = ojson::array();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            std::map<std::string, std::map<int, double>> by_fixture;
            std::size_t k = 0;
            for (const auto& f : *fixtures)
                for (int g = 0; g < kSeverityGroups; ++g) by_fixture[f.report_id][g] = fr[i].scores[k++].value;
            mono.push_back(monotonicity_profile(ids[i], by_fixture));
            arr.push_back(monotonicity_json(mono.back()));
        }
        ojson out;
        out["fixtures"] = fixtures->size();
        out["metrics"] = std::move(arr);
        run.write("monotonicity.json", out.dump(2) + "\n");
    }
    run.write("summary.md", summary_md(reports, mono, d.size(), bo));
    for (const auto& r : reports)
        if (r.zero_gap()) std::cout << r.metric_id << ": zero discrimination-robustness gap\n";
    run.finish();
    return kExitOk;
}

int cmd_agreement(const Common& c, const std::string& annotations, const CLI::App& sub,
                  const std::vector<std::string>& argv) {
    Run run("agreement", argv, c.out_dir);
    record_flags(run, sub);
    auto records = load_annotations(annotations);
    run.input(annotations);
    std::string out = "retrieval_metric";
    for (auto cat : kAllCategories)
        for (auto s : kAllSignificances)
            out += ",cat" + std::to_string(category_number(cat)) + "_" + std::string(to_string(s));
    out += "\n";
    for (const auto& m : agreement_matrix(records)) {
        out += m.retrieval_metric;
        for (auto cat : kAllCategories)
            for (auto s : kAllSignificances) {
                const auto& cell = m.at(cat, s);
                out += "," + (cell.value ? num(*cell.value) : std::string());
            }
        out += "\n";
    }
    run.write("agreement.csv", out);
    run.finish();
    return kExitOk;
}

int run_cli(std::vector<std::string> args);

/// Re-run the command recorded in a manifest into `out_dir` and compare
/// every output digest.
int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
    ojson m;
    try {
        m = ojson::parse(detail::read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest_path + ": " + e.what());
    }
    if (!m.contains("argv") || !m.contains("outputs") || !m.contains("inputs"))
        throw ConfigError(manifest_path + ": not a run manifest");
    for (const auto& in : m["inputs"]) {
        const auto p = in.at("path").get<std::string>();
        if (!fs::exists(p)) throw IoError("recorded input is missing: " + p);
        if (sha256_hex(detail::read_file(p)) != in.at("sha256").get<std::string>())
            throw ConfigError("recorded input has changed: " + p);
    }
    auto argv = m["argv"].get<std::vector<std::string>>();
    const auto out_abs = fs::absolute(out_dir).string();
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == "--out-dir") {
            argv[i + 1] = out_abs;
            replaced = true;
        }
    if (!replaced) throw ConfigError(manifest_path + ": argv lacks --out-dir");

    const auto here = fs::current_path();
    if (m.contains("cwd")) fs::current_path(m["cwd"].get<std::string>());
    const int rc = run_cli(argv);
    fs::current_path(here);
    if (rc != kExitOk) return rc;

    std::size_t same = 0, differ = 0;
    for (const auto& o : m["outputs"]) {
        const auto name = o.at("path").get<std::string>();
        const auto p = fs::path(out_abs) / name;
        if (fs::exists(p) && sha256_hex(detail::read_file(p)) == o.at("sha256").get<std::string>()) {
            ++same;
        } else {
            ++differ;
            std::cerr << "replay: " << name << " differs\n";
        }
    }
    std::cout << "replay: " << same << " identical, " << differ << " different\n";
    return differ == 0 ? kExitOk : kExitInternal;
}

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Meta-evaluation harness for radiology report metrics", "medmeta"};
    app.require_subcommand(1);

    PerturbOpts po;
    auto* perturb = app.add_subcommand("perturb", "Generate GT/ME pairs and severity fixtures");
    perturb->add_option("--input", po.input, "Source reports (JSONL); defaults to the bundled corpus")->check(CLI::ExistingFile);
    perturb->add_option("--seed", po.seed, "Generation seed")->required();
    perturb->add_flag("--full-dataset", po.full, "Generate the full 400-pair dataset");
    perturb->add_option("--aspect", po.aspect, "Single cell: aspect");
    perturb->add_option("--error-type", po.error_type, "Single cell: error type");
    perturb->add_option("--significance", po.significance, "Single cell: significance");
    perturb->add_option("--count", po.count, "Single cell: number of pairs")->check(CLI::PositiveNumber);
    perturb->add_option("--severity", po.severity, "Reports to grade into severity fixtures")
        ->check(CLI::ExistingFile);
    perturb->add_option("--rules", po.rules, "Rule pack directory")->check(CLI::ExistingDirectory);
    perturb->add_option("--gazetteer", po.c.gazetteer, "Gazetteer JSON")->check(CLI::ExistingFile);
    perturb->add_option("--out-dir", po.c.out_dir, "Output directory")->required();

    ScoreOpts so;
    auto* score = app.add_subcommand("score", "Score every pair with each metric");
    score->add_option("--pairs", so.pairs, "Pairs (JSONL)")->required()->check(CLI::ExistingFile);
    score->add_option("--metrics", so.metrics, "Comma-separated metric ids")->required();
    score->add_option("--metrics-config", so.config, "External metric registry (JSON)")
        ->check(CLI::ExistingFile);
    score->add_option("--gazetteer", so.c.gazetteer, "Gazetteer JSON")->check(CLI::ExistingFile);
    score->add_option("--out-dir", so.c.out_dir, "Output directory")->required();

    ScoreOpts mo;
    auto* meta = app.add_subcommand("metaeval", "Discriminative, robustness and monotonicity reports");
    meta->add_option("--pairs", mo.pairs, "Pairs (JSONL)")->required()->check(CLI::ExistingFile);
    meta->add_option("--metrics", mo.metrics, "Comma-separated metric ids")->required();
    meta->add_option("--metrics-config", mo.config, "External metric registry (JSON)")
        ->check(CLI::ExistingFile);
    meta->add_option("--severity-fixtures", mo.fixtures, "Severity fixtures (JSONL)")
        ->check(CLI::ExistingFile);
    meta->add_option("--seed", mo.seed, "Bootstrap seed")->required();
    meta->add_option("--bootstrap", mo.bootstrap, "Bootstrap resamples")->capture_default_str();
    meta->add_option("--ci-level", mo.ci_level, "Confidence level")->capture_default_str();
    meta->add_option("--gazetteer", mo.c.gazetteer, "Gazetteer JSON")->check(CLI::ExistingFile);
    meta->add_option("--out-dir", mo.c.out_dir, "Output directory")->required();

    Common ac;
    std::string annotations;
    auto* agree = app.add_subcommand("agreement", "Averaged pairwise annotator correlation");
    agree->add_option("--annotations", annotations, "Annotations (CSV)")
        ->required()
        ->check(CLI::ExistingFile);
    agree->add_option("--out-dir", ac.out_dir, "Output directory")->required();

    std::string manifest, replay_out;
    auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs");
    replay->add_option("--manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    replay->add_option("--out-dir", replay_out, "Output directory for the re-run")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    if (*perturb) return cmd_perturb(po, *perturb, args);
    if (*score) return cmd_score(so, *score, args);
    if (*meta) return cmd_metaeval(mo, *meta, args);
    if (*agree) return cmd_agreement(ac, annotations, *agree, args);
    return cmd_replay(manifest, replay_out);
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_cli(std::move(args));
    } catch (const AdapterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAdapter;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
