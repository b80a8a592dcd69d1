// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Rule-based thoracic condition labeler. Phrases and triggers are matched on
// Porter-stemmed tokens; negation uses a fixed 6-token window.

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medmeta/corpus.hpp"
#include "medmeta/error.hpp"
#include "medmeta/textops.hpp"

namespace medmeta {

enum class Condition {
    EnlargedCardiomediastinum,
    Cardiomegaly,
    LungOpacity,
    LungLesion,
    Edema,
    Consolidation,
    Pneumonia,
    Atelectasis,
    Pneumothorax,
    PleuralEffusion,
    PleuralOther,
    Fracture,
    SupportDevices,
    NoFinding,
};

inline constexpr std::size_t kConditionCount = 14;

inline constexpr std::array<Condition, kConditionCount> kAllConditions = {
    Condition::EnlargedCardiomediastinum, Condition::Cardiomegaly, Condition::LungOpacity,
    Condition::LungLesion, Condition::Edema, Condition::Consolidation, Condition::Pneumonia,
    Condition::Atelectasis, Condition::Pneumothorax, Condition::PleuralEffusion,
    Condition::PleuralOther, Condition::Fracture, Condition::SupportDevices,
    Condition::NoFinding,
};

inline constexpr std::string_view to_string(Condition c) noexcept {
    constexpr std::string_view names[] = {
        "enlarged_cardiomediastinum", "cardiomegaly", "lung_opacity", "lung_lesion",
        "edema", "consolidation", "pneumonia", "atelectasis", "pneumothorax",
        "pleural_effusion", "pleural_other", "fracture", "support_devices", "no_finding",
    };
    return names[static_cast<std::size_t>(c)];
}

inline std::optional<Condition> parse_condition(std::string_view s) {
    for (auto c : kAllConditions)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

enum class LabelState { Blank, Positive, Negative, Uncertain };

inline constexpr std::string_view to_string(LabelState s) noexcept {
    switch (s) {
    case LabelState::Blank: return "blank";
    case LabelState::Positive: return "positive";
    case LabelState::Negative: return "negative";
    case LabelState::Uncertain: return "uncertain";
    }
    return "?";
}

class LabelVector {
public:
    LabelVector() { states_.fill(LabelState::Blank); }

    LabelState operator[](Condition c) const noexcept {
        return states_[static_cast<std::size_t>(c)];
    }
    void set(Condition c, LabelState s) noexcept { states_[static_cast<std::size_t>(c)] = s; }

    std::size_t non_blank() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(states_.begin(), states_.end(),
                          [](LabelState s) { return s != LabelState::Blank; }));
    }

    std::string describe() const {
        std::string out;
        for (auto c : kAllConditions) {
            if ((*this)[c] == LabelState::Blank) continue;
            if (!out.empty()) out += ", ";
            out += std::string(to_string(c)) + "=" + std::string(to_string((*this)[c]));
        }
        return out.empty() ? "all blank" : out;
    }

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::array<LabelState, kConditionCount> states_{};
};

// ---------------------------------------------------------------------------
// Gazetteer

/// Raw, human-editable gazetteer content.
struct GazetteerData {
    std::string version;
    std::map<Condition, std::vector<std::string>> conditions;
    std::vector<std::string> negation_triggers;      // scope forward
    std::vector<std::string> post_negation_triggers; // scope backward
    std::vector<std::string> uncertainty_triggers;
    std::vector<std::string> normal_statements;
    std::vector<std::string> anatomy;
};

namespace detail {

inline std::vector<std::string> stems_of(const TokenSeq& seq) {
    std::vector<std::string> out;
    out.reserve(seq.size());
    for (const auto& t : seq) out.push_back(porter_stem(t));
    return out;
}

/// Longest-first matcher over stemmed token sequences.
template <typename Payload>
class PhraseMatcher {
public:
    void add(std::string_view phrase, Payload p) {
        auto stems = stems_of(tokenize(phrase));
        if (stems.empty()) throw ConfigError("empty phrase in gazetteer");
        entries_.push_back({std::move(stems), std::move(p)});
        std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.stems.size() > b.stems.size();
        });
    }

    /// Longest entry matching at position i, or nullptr.
    const Payload* match_at(const std::vector<std::string>& stems, std::size_t i,
                            std::size_t& len) const {
        for (const auto& e : entries_) {
            if (i + e.stems.size() > stems.size()) continue;
            if (std::equal(e.stems.begin(), e.stems.end(), stems.begin() + static_cast<long>(i))) {
                len = e.stems.size();
                return &e.payload;
            }
        }
        return nullptr;
    }

    bool empty() const noexcept { return entries_.empty(); }

private:
    struct Entry {
        std::vector<std::string> stems;
        Payload payload;
    };
    std::vector<Entry> entries_;
};

enum class TriggerKind { PreNegation, PostNegation, Uncertainty };

} // namespace detail

class Gazetteer {
public:
    explicit Gazetteer(GazetteerData data) : data_(std::move(data)) { compile(); }

    const GazetteerData& data() const noexcept { return data_; }
    const std::string& version() const noexcept { return data_.version; }

    const detail::PhraseMatcher<Condition>& conditions() const noexcept { return conditions_; }
    const detail::PhraseMatcher<detail::TriggerKind>& triggers() const noexcept {
        return triggers_;
    }
    const detail::PhraseMatcher<int>& normals() const noexcept { return normals_; }
    const detail::PhraseMatcher<int>& anatomy() const noexcept { return anatomy_; }

    /// True when `token` (already lowercased) belongs to any phrase or trigger.
    bool is_reserved_token(std::string_view token) const {
        return reserved_.count(porter_stem(token)) != 0;
    }

    static Gazetteer from_json(const nlohmann::json& j) {
        auto list = [&](const char* key, bool required) {
            std::vector<std::string> out;
            auto it = j.find(key);
            if (it == j.end()) {
                if (required) throw ConfigError(std::string("gazetteer lacks '") + key + "'");
                return out;
            }
            if (!it->is_array()) throw ConfigError(std::string("'") + key + "' must be a list");
            for (const auto& v : *it) {
                if (!v.is_string()) throw ConfigError(std::string("'") + key + "' holds a non-string");
                out.push_back(v.get<std::string>());
            }
            return out;
        };
        if (!j.is_object()) throw ConfigError("gazetteer must be a JSON object");
        GazetteerData d;
        if (auto it = j.find("version"); it != j.end() && it->is_string())
            d.version = it->get<std::string>();
        auto conds = j.find("conditions");
        if (conds == j.end() || !conds->is_object())
            throw ConfigError("gazetteer lacks a 'conditions' object");
        for (auto it = conds->begin(); it != conds->end(); ++it) {
            auto c = parse_condition(it.key());
            if (!c) throw ConfigError("unknown condition '" + it.key() + "'");
            if (!it->is_array()) throw ConfigError("condition '" + it.key() + "' must be a list");
            for (const auto& v : *it) d.conditions[*c].push_back(v.get<std::string>());
        }
        d.negation_triggers = list("negation_triggers", true);
        d.post_negation_triggers = list("post_negation_triggers", false);
        d.uncertainty_triggers = list("uncertainty_triggers", true);
        d.normal_statements = list("normal_statements", false);
        d.anatomy = list("anatomy", false);
        return Gazetteer(std::move(d));
    }

    static Gazetteer load(const std::filesystem::path& path) {
        try {
            return from_json(nlohmann::json::parse(detail::read_file(path)));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("gazetteer " + path.string() + ": " + e.what());
        }
    }

private:
    void compile() {
        for (auto c : kAllConditions) {
            if (c == Condition::NoFinding) continue;
            auto it = data_.conditions.find(c);
            if (it == data_.conditions.end() || it->second.empty())
                throw ConfigError("gazetteer has no phrases for " + std::string(to_string(c)));
        }
        for (const auto& [c, phrases] : data_.conditions) {
            // Phrases listed under no_finding act as normal statements.
            for (const auto& p : phrases) {
                if (c == Condition::NoFinding)
                    normals_.add(p, 0);
                else
                    conditions_.add(p, c);
                reserve(p);
            }
        }
        std::set<std::vector<std::string>> neg, unc;
        for (const auto& t : data_.negation_triggers) {
            triggers_.add(t, detail::TriggerKind::PreNegation);
            neg.insert(detail::stems_of(tokenize(t)));
            reserve(t);
        }
        for (const auto& t : data_.post_negation_triggers) {
            triggers_.add(t, detail::TriggerKind::PostNegation);
            neg.insert(detail::stems_of(tokenize(t)));
            reserve(t);
        }
        for (const auto& t : data_.uncertainty_triggers) {
            triggers_.add(t, detail::TriggerKind::Uncertainty);
            unc.insert(detail::stems_of(tokenize(t)));
            reserve(t);
        }
        for (const auto& s : neg)
            if (unc.count(s)) throw ConfigError("trigger is both negation and uncertainty");
        for (const auto& p : data_.normal_statements) {
            normals_.add(p, 0);
            reserve(p);
        }
        for (const auto& p : data_.anatomy) {
            anatomy_.add(p, 0);
            reserve(p);
        }
    }

    void reserve(std::string_view phrase) {
        for (const auto& t : tokenize(phrase)) reserved_.insert(porter_stem(t));
    }

    GazetteerData data_;
    detail::PhraseMatcher<Condition> conditions_;
    detail::PhraseMatcher<detail::TriggerKind> triggers_;
    detail::PhraseMatcher<int> normals_;
    detail::PhraseMatcher<int> anatomy_;
    std::set<std::string> reserved_;
};

// ---------------------------------------------------------------------------
// Scoping

struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0; // exclusive
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
    bool empty() const noexcept { return begin >= end; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct NegationScope {
    TokenSpan trigger;
    TokenSpan scope;
    bool backward = false;
    friend bool operator==(const NegationScope&, const NegationScope&) = default;
};

inline constexpr std::size_t kNegationWindow = 6;

namespace detail {

inline bool is_scope_boundary(std::string_view tok) {
    return tok == "but" || tok == "although" || tok == "however" || tok == "." || tok == ";";
}

struct TriggerHit {
    TokenSpan span;
    TriggerKind kind;
};

inline std::vector<TriggerHit> find_triggers(const std::vector<std::string>& stems,
                                             const Gazetteer& g) {
    std::vector<TriggerHit> out;
    std::size_t i = 0;
    while (i < stems.size()) {
        std::size_t len = 0;
        if (auto k = g.triggers().match_at(stems, i, len)) {
            out.push_back({{i, i + len}, *k});
            i += len;
        } else {
            ++i;
        }
    }
    return out;
}

inline TokenSpan forward_scope(const TokenSeq& s, TokenSpan trig) {
    TokenSpan sc{trig.end, trig.end};
    while (sc.end < s.size() && sc.end - trig.end < kNegationWindow && !is_scope_boundary(s[sc.end]))
        ++sc.end;
    return sc;
}

inline TokenSpan backward_scope(const TokenSeq& s, TokenSpan trig) {
    TokenSpan sc{trig.begin, trig.begin};
    while (sc.begin > 0 && trig.begin - sc.begin < kNegationWindow &&
           !is_scope_boundary(s[sc.begin - 1]))
        --sc.begin;
    return sc;
}

} // namespace detail

/// NegEx-style scopes for one sentence. Pre-negation triggers scope forward,
/// post-negation triggers backward; both stop at a conjunction or sentence end.
inline std::vector<NegationScope> detect_negation_scopes(const TokenSeq& sentence,
                                                         const Gazetteer& g) {
    const auto stems = detail::stems_of(sentence);
    std::vector<NegationScope> out;
    for (const auto& hit : detail::find_triggers(stems, g)) {
        if (hit.kind == detail::TriggerKind::PreNegation)
            out.push_back({hit.span, detail::forward_scope(sentence, hit.span), false});
        else if (hit.kind == detail::TriggerKind::PostNegation)
            out.push_back({hit.span, detail::backward_scope(sentence, hit.span), true});
    }
    return out;
}

/// Uncertainty triggers reach kNegationWindow tokens on both sides, inside
/// the clause.
inline std::vector<TokenSpan> detect_uncertainty_scopes(const TokenSeq& sentence,
                                                        const Gazetteer& g) {
    const auto stems = detail::stems_of(sentence);
    std::vector<TokenSpan> out;
    for (const auto& hit : detail::find_triggers(stems, g)) {
        if (hit.kind != detail::TriggerKind::Uncertainty) continue;
        auto fwd = detail::forward_scope(sentence, hit.span);
        auto bwd = detail::backward_scope(sentence, hit.span);
        out.push_back({bwd.begin, fwd.end});
    }
    return out;
}

struct Mention {
    Condition condition;
    TokenSpan span;
    LabelState state;
};

/// Condition mentions in one sentence with their resolved states.
inline std::vector<Mention> find_mentions(const TokenSeq& sentence, const Gazetteer& g) {
    const auto stems = detail::stems_of(sentence);
    const auto neg = detect_negation_scopes(sentence, g);
    const auto unc = detect_uncertainty_scopes(sentence, g);
    std::vector<Mention> out;
    std::size_t i = 0;
    while (i < stems.size()) {
        std::size_t len = 0;
        const Condition* c = g.conditions().match_at(stems, i, len);
        if (!c) {
            ++i;
            continue;
        }
        TokenSpan span{i, i + len};
        auto in = [&](const TokenSpan& sc) { return sc.contains(span.begin); };
        LabelState st = LabelState::Positive;
        if (std::any_of(unc.begin(), unc.end(), in))
            st = LabelState::Uncertain;
        else if (std::any_of(neg.begin(), neg.end(),
                             [&](const NegationScope& n) { return in(n.scope); }))
            st = LabelState::Negative;
        out.push_back({*c, span, st});
        i += len;
    }
    return out;
}

/// Split a token sequence into sentences at `.` and `;` tokens.
inline std::vector<TokenSeq> split_token_sentences(const TokenSeq& seq) {
    std::vector<TokenSeq> out;
    std::vector<std::string> cur;
    for (const auto& t : seq) {
        if (t == "." || t == ";") {
            if (!cur.empty()) out.emplace_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(t);
        }
    }
    if (!cur.empty()) out.emplace_back(std::move(cur));
    return out;
}

namespace detail {

inline int state_rank(LabelState s) {
    switch (s) {
    case LabelState::Blank: return 0;
    case LabelState::Negative: return 1;
    case LabelState::Uncertain: return 2;
    case LabelState::Positive: return 3;
    }
    return 0;
}

inline bool has_normal_statement(const TokenSeq& sentence, const Gazetteer& g) {
    const auto stems = stems_of(sentence);
    for (std::size_t i = 0; i < stems.size(); ++i) {
        std::size_t len = 0;
        if (g.normals().match_at(stems, i, len)) return true;
    }
    return false;
}

} // namespace detail

/// Label a whole report. Mentions of one condition combine as
/// Positive > Uncertain > Negative.
inline LabelVector label_report(std::string_view text, const Gazetteer& g) {
    LabelVector v;
    bool normal = false;
    for (const auto& sentence : split_token_sentences(tokenize(text))) {
        for (const auto& m : find_mentions(sentence, g)) {
            if (detail::state_rank(m.state) > detail::state_rank(v[m.condition]))
                v.set(m.condition, m.state);
        }
        normal = normal || detail::has_normal_statement(sentence, g);
    }
    bool any_negative = false;
    bool any_finding = false;
    for (auto c : kAllConditions) {
        if (c == Condition::NoFinding) continue;
        if (v[c] == LabelState::Negative) any_negative = true;
        if (v[c] == LabelState::Positive || v[c] == LabelState::Uncertain) any_finding = true;
    }
    if (!any_finding && (normal || any_negative)) v.set(Condition::NoFinding, LabelState::Positive);
    return v;
}

/// Per-sentence labels, one entry per sentence of split_sentences(text).
inline std::vector<LabelVector> label_sentences(std::string_view text, const Gazetteer& g) {
    std::vector<LabelVector> out;
    for (const auto& sp : split_sentences(text))
        out.push_back(label_report(text.substr(sp.begin, sp.size()), g));
    return out;
}

/// Micro F1 over non-Blank (condition, state) assignments. Two all-Blank
/// vectors score 1.
inline double label_f1(const LabelVector& gt, const LabelVector& me) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (auto c : kAllConditions) {
        const auto a = gt[c];
        const auto b = me[c];
        if (a != LabelState::Blank && a == b) {
            ++tp;
            continue;
        }
        if (b != LabelState::Blank) ++fp;
        if (a != LabelState::Blank) ++fn;
    }
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

} // namespace medmeta
