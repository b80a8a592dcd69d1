// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Seeded, rule-driven rewriting of ground-truth reports into GT/ME pairs
// and graded severity fixtures. Rules live in data/rules/<aspect>.json.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medmeta/corpus.hpp"
#include "medmeta/error.hpp"
#include "medmeta/labeler.hpp"
#include "medmeta/random.hpp"
#include "medmeta/textops.hpp"

namespace medmeta {

class NoMatchingSite : public Error {
public:
    using Error::Error;
};

class QuotaUnfillable : public Error {
public:
    explicit QuotaUnfillable(std::vector<std::string> cells)
        : Error(make_message(cells)), cells_(std::move(cells)) {}
    const std::vector<std::string>& cells() const noexcept { return cells_; }

private:
    static std::string make_message(const std::vector<std::string>& cells) {
        std::string m = "cannot fill " + std::to_string(cells.size()) + " cell(s):";
        for (const auto& c : cells) m += "\n  " + c;
        return m;
    }
    std::vector<std::string> cells_;
};

class InsufficientSites : public Error {
public:
    InsufficientSites(std::string report_id, int group)
        : Error("report " + report_id + " has no usable site for severity group " +
                std::to_string(group)),
          report_id_(std::move(report_id)), group_(group) {}
    const std::string& report_id() const noexcept { return report_id_; }
    int group() const noexcept { return group_; }

private:
    std::string report_id_;
    int group_;
};

// ---------------------------------------------------------------------------
// Rules

enum class RuleKind {
    Substitute,
    Regex,
    Ladder,
    Measurement,
    DeleteSentence,
    DeleteSpan,
    InsertSentence,
    Append,
    Typo,
    SwapSentences,
};

inline std::optional<RuleKind> parse_rule_kind(std::string_view s) {
    static const std::pair<std::string_view, RuleKind> table[] = {
        {"substitute", RuleKind::Substitute},
        {"regex", RuleKind::Regex},
        {"ladder", RuleKind::Ladder},
        {"measurement", RuleKind::Measurement},
        {"delete_sentence", RuleKind::DeleteSentence},
        {"delete_span", RuleKind::DeleteSpan},
        {"insert_sentence", RuleKind::InsertSentence},
        {"append", RuleKind::Append},
        {"typo", RuleKind::Typo},
        {"swap_sentences", RuleKind::SwapSentences},
    };
    for (const auto& [k, v] : table)
        if (k == s) return v;
    return std::nullopt;
}

/// Kinds whose edit rewrites text in place, as opposed to adding or removing
/// whole sentences.
inline constexpr bool is_in_place(RuleKind k) noexcept {
    return k == RuleKind::Substitute || k == RuleKind::Regex || k == RuleKind::Ladder ||
           k == RuleKind::Measurement;
}

struct RulePattern {
    std::string source;
    std::regex re;
    std::vector<std::string> templates;
};

enum class LabelExpectation { Any, Same, Changed };

struct PerturbationRule {
    std::string id;
    Aspect aspect = Aspect::Location;
    ErrorType error_type = ErrorType::Inaccuracy;
    Significance significance = Significance::Significant;
    RuleKind kind = RuleKind::Substitute;
    std::string explanation;
    LabelExpectation expect_labels = LabelExpectation::Any;

    std::vector<std::pair<std::string, std::vector<std::string>>> map; // substitute
    std::vector<RulePattern> patterns; // regex, delete_*, insert, append
    std::optional<std::regex> exclude; // sentences matching this are skipped
    std::optional<std::regex> exclude_document; // texts matching this yield no site
    std::vector<std::vector<std::string>> ladders; // "" marks a gap rung
    std::vector<double> factors;                   // measurement, significant
};

namespace detail {

inline std::string regex_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out += '\\';
        out += c;
    }
    return out;
}

inline std::string alternation(std::vector<std::string> phrases) {
    std::sort(phrases.begin(), phrases.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
    std::string out = "(?:";
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (i) out += '|';
        out += regex_escape(phrases[i]);
    }
    return out + ")";
}

/// Expand {condition} and {anatomy} into alternations of gazetteer phrases.
inline std::string expand_placeholders(std::string pattern, const Gazetteer& g) {
    auto replace_all = [&](const std::string& key, const std::string& with) {
        for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos + with.size()))
            pattern.replace(pos, key.size(), with);
    };
    if (pattern.find("{condition}") != std::string::npos) {
        std::vector<std::string> all;
        for (const auto& [c, ps] : g.data().conditions)
            if (c != Condition::NoFinding) all.insert(all.end(), ps.begin(), ps.end());
        replace_all("{condition}", alternation(all));
    }
    if (pattern.find("{anatomy}") != std::string::npos)
        replace_all("{anatomy}", alternation(g.data().anatomy));
    return pattern;
}

inline std::regex compile_rule_regex(const std::string& src, const std::string& rule_id) {
    try {
        return std::regex(src, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
        throw ConfigError("rule " + rule_id + ": bad pattern: " + e.what());
    }
}

} // namespace detail

class RuleBook {
public:
    RuleBook() = default;

    void add(PerturbationRule r) {
        for (const auto& x : rules_)
            if (x.id == r.id) throw ConfigError("duplicate rule id: " + r.id);
        rules_.push_back(std::move(r));
    }

    /// Parse one rule pack. Every rule inherits the pack's aspect.
    void add_pack(const nlohmann::json& j, const Gazetteer& g, const std::string& origin) {
        auto fail = [&](const std::string& why) { throw ConfigError(origin + ": " + why); };
        if (!j.is_object()) fail("rule pack must be an object");
        auto aspect = parse_aspect(j.value("aspect", std::string()));
        if (!aspect) fail("missing or unknown 'aspect'");
        if (!j.contains("rules") || !j["rules"].is_array()) fail("missing 'rules' list");
        for (const auto& jr : j["rules"]) {
            PerturbationRule r;
            r.aspect = *aspect;
            try {
                r.id = jr.at("id").get<std::string>();
                auto et = parse_error_type(jr.at("error_type").get<std::string>());
                auto sig = parse_significance(jr.at("significance").get<std::string>());
                auto kind = parse_rule_kind(jr.at("kind").get<std::string>());
                if (!et || !sig || !kind) fail("rule " + r.id + ": bad error_type/significance/kind");
                r.error_type = *et;
                r.significance = *sig;
                r.kind = *kind;
                r.explanation = jr.value("explanation", std::string());
                const auto expect = jr.value("expect_labels", std::string("any"));
                if (expect == "same")
                    r.expect_labels = LabelExpectation::Same;
                else if (expect == "changed")
                    r.expect_labels = LabelExpectation::Changed;
                else if (expect != "any")
                    fail("rule " + r.id + ": bad expect_labels");
                if (auto m = jr.find("map"); m != jr.end()) {
                    for (auto it = m->begin(); it != m->end(); ++it) {
                        std::vector<std::string> alts;
                        if (it->is_string())
                            alts.push_back(it->get<std::string>());
                        else
                            alts = it->get<std::vector<std::string>>();
                        r.map.emplace_back(it.key(), std::move(alts));
                    }
                }
                if (auto ps = jr.find("patterns"); ps != jr.end()) {
                    for (const auto& p : *ps) {
                        RulePattern rp;
                        rp.source = detail::expand_placeholders(p.at("match").get<std::string>(), g);
                        rp.re = detail::compile_rule_regex(rp.source, r.id);
                        if (auto t = p.find("template"); t != p.end())
                            rp.templates.push_back(t->get<std::string>());
                        if (auto t = p.find("templates"); t != p.end())
                            for (const auto& s : *t) rp.templates.push_back(s.get<std::string>());
                        r.patterns.push_back(std::move(rp));
                    }
                }
                if (auto ex = jr.find("exclude"); ex != jr.end())
                    r.exclude = detail::compile_rule_regex(
                        detail::expand_placeholders(ex->get<std::string>(), g), r.id);
                if (auto ex = jr.find("exclude_document"); ex != jr.end())
                    r.exclude_document = detail::compile_rule_regex(
                        detail::expand_placeholders(ex->get<std::string>(), g), r.id);
                if (auto ls = jr.find("ladders"); ls != jr.end())
                    for (const auto& l : *ls) {
                        std::vector<std::string> rungs;
                        for (const auto& x : l) rungs.push_back(x.is_null() ? std::string() : x.get<std::string>());
                        r.ladders.push_back(std::move(rungs));
                    }
                if (auto fs = jr.find("factors"); fs != jr.end()) r.factors = fs->get<std::vector<double>>();
            } catch (const nlohmann::json::exception& e) {
                fail("rule " + r.id + ": " + e.what());
            }
            validate(r, fail);
            add(std::move(r));
        }
    }

    /// Load every *.json file of a directory, in file-name order.
    static RuleBook load_dir(const std::filesystem::path& dir, const Gazetteer& g) {
        if (!std::filesystem::is_directory(dir)) throw ConfigError("rules directory not found: " + dir.string());
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        RuleBook book;
        for (const auto& f : files) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(detail::read_file(f));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(f.string() + ": " + e.what());
            }
            book.add_pack(j, g, f.filename().string());
        }
        return book;
    }

    const std::vector<PerturbationRule>& rules() const noexcept { return rules_; }

private:
    template <typename Fail>
    static void validate(const PerturbationRule& r, Fail&& fail) {
        const auto need_patterns = r.kind == RuleKind::Regex || r.kind == RuleKind::DeleteSpan ||
                                   r.kind == RuleKind::DeleteSentence ||
                                   r.kind == RuleKind::InsertSentence || r.kind == RuleKind::Append;
        if (need_patterns && r.patterns.empty()) fail("rule " + r.id + ": needs 'patterns'");
        if (r.kind == RuleKind::Substitute && r.map.empty()) fail("rule " + r.id + ": needs 'map'");
        if (r.kind == RuleKind::Ladder && r.ladders.empty()) fail("rule " + r.id + ": needs 'ladders'");
        if (r.kind == RuleKind::Measurement && r.significance == Significance::Significant &&
            r.factors.empty())
            fail("rule " + r.id + ": needs 'factors'");
        if (r.kind == RuleKind::Regex || r.kind == RuleKind::InsertSentence || r.kind == RuleKind::Append)
            for (const auto& p : r.patterns)
                if (p.templates.empty()) fail("rule " + r.id + ": pattern without template");
    }

    std::vector<PerturbationRule> rules_;
};

// ---------------------------------------------------------------------------
// Edits and sites

struct TextEdit {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string replacement;
    friend bool operator==(const TextEdit&, const TextEdit&) = default;
};

inline std::string apply_edits(std::string text, std::vector<TextEdit> edits) {
    std::sort(edits.begin(), edits.end(), [](const auto& a, const auto& b) { return a.begin > b.begin; });
    for (const auto& e : edits) text.replace(e.begin, e.end - e.begin, e.replacement);
    return text;
}

struct Site {
    const PerturbationRule* rule = nullptr;
    std::size_t alternative = 0;
    std::vector<TextEdit> edits;  // non-overlapping
    std::vector<std::size_t> anchors; // extra char positions the edit depends on
    std::string from;
    std::string to;

    std::size_t offset() const { return edits.empty() ? 0 : edits.front().begin; }
};

struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct PerturbationOutcome {
    ReportPair pair;
    CharSpan edited_span; // in pair.gt.text
    std::vector<TextEdit> edits; // in pair.gt.text coordinates
    std::vector<std::size_t> anchors; // in pair.gt.text coordinates
    std::string rule_id;
    RuleKind kind = RuleKind::Substitute;
    std::string source_report_id;
};

namespace detail {

inline char upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }
inline char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
inline bool is_word_char(char c) {
    return is_ascii_alpha(c) || is_ascii_digit(c) || c == '-' || c == '\'' || c == '_';
}

inline std::string capitalize(std::string s) {
    for (auto& c : s)
        if (is_ascii_alpha(c)) {
            c = upper(c);
            break;
        }
    return s;
}

inline std::string lower_first(std::string s) {
    if (!s.empty()) s[0] = lower(s[0]);
    return s;
}

inline bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

inline bool icontains(std::string_view hay, std::string_view needle) {
    return detail::ascii_lower(hay).find(detail::ascii_lower(needle)) != std::string::npos;
}

/// Case-insensitive occurrences of `phrase` in [b, e) of text, bounded by
/// non-word characters (hyphens count as word characters).
inline std::vector<std::size_t> find_phrase(std::string_view text, std::size_t b, std::size_t e,
                                            std::string_view phrase) {
    std::vector<std::size_t> out;
    const auto lt = detail::ascii_lower(text.substr(0, e));
    const auto lp = detail::ascii_lower(phrase);
    for (auto pos = lt.find(lp, b); pos != std::string::npos; pos = lt.find(lp, pos + 1)) {
        const auto end = pos + lp.size();
        if (end > e) break;
        if (pos > 0 && is_word_char(text[pos - 1])) continue;
        if (end < text.size() && is_word_char(text[end])) continue;
        out.push_back(pos);
    }
    return out;
}

inline std::string opposite(const std::string& w) {
    static const std::map<std::string, std::string> pairs = {
        {"left", "right"},         {"right", "left"},         {"upper", "lower"},
        {"lower", "upper"},        {"improved", "worsened"},  {"worsened", "improved"},
        {"increased", "decreased"}, {"decreased", "increased"}, {"larger", "smaller"},
        {"smaller", "larger"},
    };
    auto it = pairs.find(detail::ascii_lower(w));
    if (it == pairs.end()) return w;
    return (!w.empty() && w[0] >= 'A' && w[0] <= 'Z') ? capitalize(it->second) : it->second;
}

inline std::string be_form(const std::string& noun) {
    const auto n = detail::ascii_lower(noun);
    auto ends = [&](std::string_view s) { return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0; };
    if (ends("s") && !ends("ss") && !ends("sis") && !ends("us") && !ends("thorax")) return "are";
    return "is";
}

inline std::string gerund(const std::string& w) {
    std::string s = w;
    if (s.size() > 3 && s.compare(s.size() - 2, 2, "ed") == 0) s.resize(s.size() - 2);
    return s + "ing";
}

/// Render {N}, {cap:N}, {lower:N}, {opposite:N}, {an:N}, {be:N} and {ing:N}.
inline std::string render(const std::string& tpl, const std::smatch& m) {
    std::string out;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '{') {
            out += tpl[i];
            continue;
        }
        const auto close = tpl.find('}', i);
        if (close == std::string::npos) {
            out += tpl.substr(i);
            break;
        }
        const std::string body = tpl.substr(i + 1, close - i - 1);
        std::string fn;
        std::string idx = body;
        if (auto colon = body.find(':'); colon != std::string::npos) {
            fn = body.substr(0, colon);
            idx = body.substr(colon + 1);
        }
        if (idx.empty() || !std::all_of(idx.begin(), idx.end(), is_ascii_digit)) {
            out += tpl.substr(i, close - i + 1);
            i = close;
            continue;
        }
        const auto n = static_cast<std::size_t>(std::stoul(idx));
        const std::string v = n < m.size() ? m[n].str() : std::string();
        if (fn.empty())
            out += v;
        else if (fn == "cap")
            out += capitalize(v);
        else if (fn == "lower")
            out += lower_first(v);
        else if (fn == "opposite")
            out += opposite(v);
        else if (fn == "an")
            out += (!v.empty() && std::string_view("aeiouAEIOU").find(v[0]) != std::string_view::npos) ? "an" : "a";
        else if (fn == "be")
            out += be_form(v);
        else if (fn == "ing")
            out += gerund(v);
        else
            out += v;
        i = close;
    }
    return out;
}

inline std::string collapse_spaces(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' && !out.empty() && out.back() == ' ') continue;
        out += c;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    while (!out.empty() && out.front() == ' ') out.erase(out.begin());
    return out;
}

inline std::string as_sentence(std::string s) {
    s = capitalize(collapse_spaces(std::move(s)));
    if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s += '.';
    return s;
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline int decimals_of(const std::string& num) {
    auto dot = num.find('.');
    return dot == std::string::npos ? 0 : static_cast<int>(num.size() - dot - 1);
}

inline double round_to(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

/// Text context handed to site generators.
struct Doc {
    std::string_view text;
    std::vector<SentenceSpan> sentences;

    std::string_view sentence(std::size_t i) const {
        return text.substr(sentences[i].begin, sentences[i].size());
    }
    std::optional<std::size_t> sentence_at(std::size_t pos) const {
        for (std::size_t i = 0; i < sentences.size(); ++i)
            if (pos >= sentences[i].begin && pos < sentences[i].end) return i;
        return std::nullopt;
    }
};

/// Uppercase the first letter of an edit that begins a sentence. A deletion
/// at sentence start instead capitalizes the word that moves up.
inline void fix_sentence_start(const Doc& d, std::size_t sentence_begin, TextEdit& e) {
    if (e.begin != sentence_begin) return;
    if (!e.replacement.empty()) {
        e.replacement = capitalize(e.replacement);
        return;
    }
    std::size_t k = e.end;
    while (k < d.text.size() && d.text[k] == ' ') ++k;
    if (k < d.text.size() && d.text[k] >= 'a' && d.text[k] <= 'z') {
        e.end = k + 1;
        e.replacement = std::string(1, upper(d.text[k]));
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Perturber

struct Cell {
    Aspect aspect;
    ErrorType error_type;
    Significance significance;
};

inline std::string cell_name(Aspect a, std::optional<ErrorType> e, Significance s) {
    std::string n(to_string(a));
    if (e) n += "_" + std::string(to_string(*e));
    return n + "_" + std::string(to_string(s));
}

/// Conditions asserted Positive in one sentence and Negative in another.
inline std::set<Condition> contradicted_conditions(std::string_view text, const Gazetteer& g) {
    const auto per = label_sentences(text, g);
    std::set<Condition> out;
    for (auto c : kAllConditions) {
        if (c == Condition::NoFinding) continue;
        bool pos = false, neg = false;
        for (const auto& v : per) {
            pos = pos || v[c] == LabelState::Positive;
            neg = neg || v[c] == LabelState::Negative;
        }
        if (pos && neg) out.insert(c);
    }
    return out;
}

/// True when a sentence of `me` that is not in `gt` asserts a condition with
/// the opposite polarity of another sentence of `me`.
inline bool introduces_contradiction(std::string_view gt, std::string_view me, const Gazetteer& g) {
    std::multiset<std::string> old;
    for (const auto& sp : split_sentences(gt)) old.insert(std::string(gt.substr(sp.begin, sp.size())));
    const auto spans = split_sentences(me);
    std::vector<LabelVector> per;
    std::vector<bool> fresh;
    for (const auto& sp : spans) {
        const auto text = me.substr(sp.begin, sp.size());
        per.push_back(label_report(text, g));
        auto it = old.find(std::string(text));
        fresh.push_back(it == old.end());
        if (it != old.end()) old.erase(it);
    }
    auto opposite = [](LabelState a, LabelState b) {
        return (a == LabelState::Positive && b == LabelState::Negative) ||
               (a == LabelState::Negative && b == LabelState::Positive);
    };
    for (std::size_t i = 0; i < per.size(); ++i) {
        if (!fresh[i]) continue;
        for (auto c : kAllConditions) {
            if (c == Condition::NoFinding) continue;
            for (std::size_t j = 0; j < per.size(); ++j)
                if (j != i && opposite(per[i][c], per[j][c])) return true;
        }
    }
    return false;
}

class Perturber {
public:
    Perturber(RuleBook rules, Gazetteer gaz) : rules_(std::move(rules)), gaz_(std::move(gaz)) {}

    const RuleBook& rules() const noexcept { return rules_; }
    const Gazetteer& gazetteer() const noexcept { return gaz_; }

    /// All raw edit sites of one rule in `text`, sorted by offset.
    std::vector<Site> sites(const PerturbationRule& r, std::string_view text, std::uint64_t seed) const {
        detail::Doc d{text, split_sentences(text)};
        std::vector<Site> out;
        if (r.exclude_document && std::regex_search(std::string(text), *r.exclude_document)) return out;
        for (std::size_t si = 0; si < d.sentences.size(); ++si) {
            if (r.exclude && std::regex_search(std::string(d.sentence(si)), *r.exclude)) continue;
            gen_sentence_sites(r, d, si, seed, out);
        }
        if (r.kind == RuleKind::SwapSentences) gen_swaps(r, d, out);
        for (auto& s : out) std::sort(s.edits.begin(), s.edits.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
        std::stable_sort(out.begin(), out.end(), [](const Site& a, const Site& b) {
            return std::tie(a.edits.front().begin, a.alternative) < std::tie(b.edits.front().begin, b.alternative);
        });
        return out;
    }

    /// Every guarded outcome for one cell, sorted by (offset, rule id,
    /// alternative). `trim` applies the insignificant-pair context trimming.
    std::vector<PerturbationOutcome> candidates(const Report& gt, Aspect a, std::optional<ErrorType> et,
                                                Significance sig, std::uint64_t seed, bool trim) const {
        std::vector<std::pair<Site, PerturbationOutcome>> found;
        for (const auto& r : rules_.rules()) {
            if (r.aspect != a || r.significance != sig) continue;
            if (et && r.error_type != *et) continue;
            for (auto& s : sites(r, gt.text, derive_seed(seed, r.id))) {
                auto o = build(gt, s, trim && sig == Significance::Insignificant);
                if (o && passes_guards(*o, r)) found.emplace_back(std::move(s), std::move(*o));
            }
        }
        std::stable_sort(found.begin(), found.end(), [](const auto& x, const auto& y) {
            return std::make_tuple(x.first.offset(), std::cref(x.first.rule->id), x.first.alternative) <
                   std::make_tuple(y.first.offset(), std::cref(y.first.rule->id), y.first.alternative);
        });
        std::vector<PerturbationOutcome> out;
        std::set<std::string> seen;
        for (auto& [s, o] : found)
            if (seen.insert(o.pair.me.text + '\x1f' + o.pair.gt.text).second) out.push_back(std::move(o));
        return out;
    }

    /// One seeded perturbation of `gt` in the requested cell.
    PerturbationOutcome perturb(const Report& gt, Aspect a, ErrorType et, Significance sig,
                                std::uint64_t seed) const {
        auto cs = candidates(gt, a, et, sig, seed, true);
        if (cs.empty())
            throw NoMatchingSite("report " + gt.id + " has no site for " + cell_name(a, et, sig));
        Rng rng(derive_seed(seed, "pick"));
        auto o = std::move(cs[static_cast<std::size_t>(rng.below(cs.size()))]);
        assign_id(o, cell_name(a, et, sig) + "_" + gt.id);
        return o;
    }

    /// Fill the full composition quota from `reports`.
    std::vector<PerturbationOutcome> generate_dataset(const std::vector<Report>& reports, std::uint64_t seed) const {
        std::vector<PerturbationOutcome> out;
        std::vector<std::string> unfillable;
        std::set<std::string> seen;
        for (auto a : kAllAspects) {
            for (auto sig : kAllSignificances) {
                std::vector<std::optional<ErrorType>> groups;
                if (is_high_impact(a))
                    for (auto e : kAllErrorTypes) groups.push_back(e);
                else
                    groups.push_back(std::nullopt);
                for (auto group : groups) {
                    const auto name = cell_name(a, group, sig);
                    auto picked = fill_cell(reports, a, group, sig, derive_seed(seed, name), seen);
                    if (picked.size() < kPairsPerCell) {
                        unfillable.push_back(name + ": " + std::to_string(picked.size()) + " of " +
                                             std::to_string(kPairsPerCell));
                        continue;
                    }
                    for (std::size_t i = 0; i < picked.size(); ++i) {
                        char nn[8];
                        std::snprintf(nn, sizeof nn, "%02zu", i + 1);
                        assign_id(picked[i], name + "_" + nn);
                        out.push_back(std::move(picked[i]));
                    }
                }
            }
        }
        if (!unfillable.empty()) throw QuotaUnfillable(std::move(unfillable));
        return out;
    }

    /// Pairs of a single cell, at most `count`.
    std::vector<PerturbationOutcome> generate_cell(const std::vector<Report>& reports, Aspect a,
                                                   std::optional<ErrorType> et, Significance sig,
                                                   std::size_t count, std::uint64_t seed) const {
        std::set<std::string> seen;
        const auto name = cell_name(a, et, sig);
        auto picked = fill_cell(reports, a, et, sig, derive_seed(seed, name), seen, count);
        if (picked.empty()) throw QuotaUnfillable({name + ": 0 of " + std::to_string(count)});
        for (std::size_t i = 0; i < picked.size(); ++i) {
            char nn[8];
            std::snprintf(nn, sizeof nn, "%02zu", i + 1);
            assign_id(picked[i], name + "_" + nn);
        }
        return picked;
    }

    /// Five graded rewrites per report: stylistic (0), one insignificant
    /// clinical edit (1), one significant edit (2), three significant edits
    /// (3), and the group 0 text plus an appended contradiction (4).
    std::vector<SeverityFixture> compose_severity_fixtures(const std::vector<Report>& reports,
                                                           std::uint64_t seed) const {
        std::vector<SeverityFixture> out;
        for (const auto& r : reports) {
            const auto rs = derive_seed(seed, r.id);
            SeverityFixture f;
            f.report_id = r.id;
            f.gt = r;
            auto set = [&](int g, std::string text) {
                f.variants[static_cast<std::size_t>(g)] = {r.id + ":g" + std::to_string(g), std::move(text), r.source};
            };

            // Group 0: prefer a phrase-level paraphrase over sentence reordering.
            auto g0 = candidates(r, Aspect::StylisticVariation, std::nullopt, Significance::Insignificant, rs, false);
            std::vector<PerturbationOutcome> phrase;
            for (auto& o : g0)
                if (o.kind != RuleKind::SwapSentences) phrase.push_back(o);
            if (!phrase.empty()) g0 = std::move(phrase);
            if (g0.empty()) throw InsufficientSites(r.id, 0);
            const std::string g0_text = pick(g0, rs, "g0").pair.me.text;
            set(0, g0_text);

            auto g1 = clinical(r, Significance::Insignificant, std::nullopt, rs);
            if (g1.empty()) throw InsufficientSites(r.id, 1);
            set(1, pick(g1, rs, "g1").pair.me.text);

            auto g2 = clinical(r, Significance::Significant, ErrorType::Inaccuracy, rs);
            if (g2.empty()) throw InsufficientSites(r.id, 2);
            set(2, pick(g2, rs, "g2").pair.me.text);

            set(3, three_edits(r, g2, rs));

            Report base{r.id, g0_text, r.source};
            auto g4 = candidates(base, Aspect::InternalContradiction, std::nullopt, Significance::Significant, rs, false);
            // Contradict the earliest statement possible.
            std::vector<PerturbationOutcome> appended;
            std::size_t earliest = std::string::npos;
            for (auto& o : g4) {
                if (o.kind != RuleKind::Append) continue;
                const auto a = o.anchors.empty() ? base.text.size() : o.anchors.front();
                if (a < earliest) {
                    appended.clear();
                    earliest = a;
                }
                if (a == earliest) appended.push_back(std::move(o));
            }
            if (appended.empty()) throw InsufficientSites(r.id, 4);
            set(4, pick(appended, rs, "g4").pair.me.text);
            out.push_back(std::move(f));
        }
        return out;
    }

private:
    const LabelVector& labels(const std::string& text) const {
        auto it = label_cache_.find(text);
        if (it == label_cache_.end()) it = label_cache_.emplace(text, label_report(text, gaz_)).first;
        return it->second;
    }

    static void assign_id(PerturbationOutcome& o, const std::string& id) {
        o.pair.pair_id = id;
        o.pair.gt.id = id + ":gt";
        o.pair.me.id = id + ":me";
    }

    static const PerturbationOutcome& pick(const std::vector<PerturbationOutcome>& v, std::uint64_t seed,
                                           std::string_view label) {
        Rng rng(derive_seed(seed, label));
        return v[static_cast<std::size_t>(rng.below(v.size()))];
    }

    std::vector<PerturbationOutcome> clinical(const Report& r, Significance sig, std::optional<ErrorType> et,
                                              std::uint64_t seed) const {
        std::vector<PerturbationOutcome> all;
        for (auto a : kClinicalAspects) {
            auto cs = candidates(r, a, et, sig, seed, false);
            for (auto& c : cs) all.push_back(std::move(c));
        }
        return all;
    }

    std::string three_edits(const Report& r, std::vector<PerturbationOutcome> sig, std::uint64_t seed) const {
        std::vector<PerturbationOutcome> single;
        for (auto& o : sig)
            if (is_in_place(o.kind) && o.edits.size() == 1) single.push_back(std::move(o));
        Rng rng(derive_seed(seed, "g3"));
        rng.shuffle(single);
        const auto sentences = split_sentences(r.text);
        auto sentence_of = [&](std::size_t pos) {
            for (std::size_t i = 0; i < sentences.size(); ++i)
                if (pos >= sentences[i].begin && pos < sentences[i].end) return i;
            return sentences.size();
        };
        std::vector<TextEdit> chosen;
        std::set<std::size_t> used;
        for (const auto& o : single) {
            const auto& e = o.edits.front();
            const auto s = sentence_of(e.begin);
            if (used.count(s)) continue;
            used.insert(s);
            chosen.push_back(e);
            if (chosen.size() == 3) break;
        }
        if (chosen.size() < 3) throw InsufficientSites(r.id, 3);
        return apply_edits(r.text, chosen);
    }

    std::vector<PerturbationOutcome> fill_cell(const std::vector<Report>& reports, Aspect a,
                                               std::optional<ErrorType> et, Significance sig,
                                               std::uint64_t seed, std::set<std::string>& seen,
                                               std::size_t quota = kPairsPerCell) const {
        // One ordered stream per error type, each interleaving reports round by round.
        std::vector<std::optional<ErrorType>> ets;
        if (et)
            ets.push_back(et);
        else
            for (auto e : kAllErrorTypes) ets.push_back(e);
        std::vector<std::vector<PerturbationOutcome>> streams;
        for (auto e : ets) {
            const auto es = derive_seed(seed, e ? to_string(*e) : "any");
            std::vector<std::vector<PerturbationOutcome>> per_report;
            for (const auto& r : reports) {
                auto cs = candidates(r, a, e, sig, derive_seed(es, r.id), true);
                Rng rng(derive_seed(es, "order/" + r.id));
                rng.shuffle(cs);
                per_report.push_back(std::move(cs));
            }
            std::vector<PerturbationOutcome> stream;
            for (std::size_t round = 0;; ++round) {
                std::vector<std::size_t> order(per_report.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                Rng rng(derive_seed(es, "round/" + std::to_string(round)));
                rng.shuffle(order);
                bool any = false;
                for (auto i : order) {
                    if (round < per_report[i].size()) {
                        stream.push_back(std::move(per_report[i][round]));
                        any = true;
                    }
                }
                if (!any) break;
            }
            streams.push_back(std::move(stream));
        }
        std::vector<PerturbationOutcome> picked;
        std::vector<std::size_t> pos(streams.size(), 0);
        for (bool progress = true; progress && picked.size() < quota;) {
            progress = false;
            for (std::size_t k = 0; k < streams.size() && picked.size() < quota; ++k) {
                while (pos[k] < streams[k].size()) {
                    auto& o = streams[k][pos[k]++];
                    if (seen.insert(o.pair.gt.text + '\x1f' + o.pair.me.text).second) {
                        picked.push_back(std::move(o));
                        progress = true;
                        break;
                    }
                }
            }
        }
        return picked;
    }

    bool passes_guards(const PerturbationOutcome& o, const PerturbationRule& r) const {
        const auto& p = o.pair;
        const bool same = labels(p.gt.text) == labels(p.me.text);
        if (r.expect_labels == LabelExpectation::Same && !same) return false;
        if (r.expect_labels == LabelExpectation::Changed && same) return false;
        if (p.significance == Significance::Insignificant &&
            (p.aspect == Aspect::Noise || p.aspect == Aspect::StylisticVariation) && !same)
            return false;
        if (p.significance == Significance::Significant && p.aspect == Aspect::Negation && same) return false;
        if (p.significance == Significance::Significant && p.aspect == Aspect::InternalContradiction &&
            !introduces_contradiction(p.gt.text, p.me.text, gaz_))
            return false;
        return true;
    }

    /// Materialize a site as a pair, optionally trimmed to the touched
    /// sentences plus one neighbor.
    std::optional<PerturbationOutcome> build(const Report& gt, const Site& s, bool trim) const {
        std::string_view text = gt.text;
        std::size_t lo = 0, hi = text.size();
        if (trim) {
            const auto sentences = split_sentences(text);
            std::size_t first = sentences.size(), last = 0;
            auto touch = [&](std::size_t pos, bool insertion) {
                for (std::size_t i = 0; i < sentences.size(); ++i) {
                    const auto& sp = sentences[i];
                    const bool hit = insertion ? (pos > sp.begin && pos <= sp.end)
                                               : (pos >= sp.begin && pos < sp.end);
                    if (hit) {
                        first = std::min(first, i);
                        last = std::max(last, i);
                    }
                }
            };
            for (const auto& e : s.edits) {
                if (e.begin == e.end) {
                    touch(e.begin, true);
                } else {
                    for (std::size_t i = 0; i < sentences.size(); ++i)
                        if (sentences[i].begin < e.end && sentences[i].end > e.begin) {
                            first = std::min(first, i);
                            last = std::max(last, i);
                        }
                }
            }
            for (auto a : s.anchors) touch(a, false);
            if (first < sentences.size()) {
                if (last + 1 < sentences.size())
                    ++last;
                else if (first > 0)
                    --first;
                lo = sentences[first].begin;
                hi = sentences[last].end;
            }
        }
        std::vector<TextEdit> edits;
        for (const auto& e : s.edits) {
            if (e.begin < lo || e.end > hi) return std::nullopt;
            edits.push_back({e.begin - lo, e.end - lo, e.replacement});
        }
        const std::string gt_text(text.substr(lo, hi - lo));
        std::string me_text = apply_edits(gt_text, edits);
        if (me_text == gt_text || detail::is_blank(me_text)) return std::nullopt;

        PerturbationOutcome o;
        o.pair.gt = {gt.id, gt_text, gt.source};
        o.pair.me = {gt.id, std::move(me_text), gt.source};
        o.pair.aspect = s.rule->aspect;
        o.pair.error_type = s.rule->error_type;
        o.pair.significance = s.rule->significance;
        o.pair.explanation = explain(*s.rule, s);
        o.edits = edits;
        o.edited_span = {edits.front().begin, edits.back().end};
        for (const auto& e : edits) {
            o.edited_span.begin = std::min(o.edited_span.begin, e.begin);
            o.edited_span.end = std::max(o.edited_span.end, e.end);
        }
        for (auto a : s.anchors)
            if (a >= lo && a < hi) o.anchors.push_back(a - lo);
        o.rule_id = s.rule->id;
        o.kind = s.rule->kind;
        o.source_report_id = gt.id;
        return o;
    }

    static std::string explain(const PerturbationRule& r, const Site& s) {
        std::string t = r.explanation;
        auto sub = [&](const std::string& key, const std::string& v) {
            for (auto p = t.find(key); p != std::string::npos; p = t.find(key, p + v.size())) t.replace(p, key.size(), v);
        };
        sub("{from}", detail::collapse_spaces(s.from));
        sub("{to}", detail::collapse_spaces(s.to));
        for (auto p = t.find(".'."); p != std::string::npos; p = t.find(".'.", p)) t.erase(p + 2, 1);
        return t;
    }

    // --- per-kind generators -------------------------------------------------

    void gen_sentence_sites(const PerturbationRule& r, const detail::Doc& d, std::size_t si,
                            std::uint64_t seed, std::vector<Site>& out) const {
        const auto& sp = d.sentences[si];
        const std::string sentence(d.sentence(si));
        switch (r.kind) {
        case RuleKind::Substitute: {
            std::size_t alt_base = 0;
            for (const auto& [phrase, alts] : r.map) {
                for (auto pos : detail::find_phrase(d.text, sp.begin, sp.end, phrase)) {
                    for (std::size_t k = 0; k < alts.size(); ++k) {
                        Site s{&r, alt_base + k, {{pos, pos + phrase.size(), alts[k]}}, {},
                               std::string(d.text.substr(pos, phrase.size())), alts[k]};
                        detail::fix_sentence_start(d, sp.begin, s.edits[0]);
                        s.to = s.edits[0].replacement;
                        out.push_back(std::move(s));
                    }
                }
                alt_base += alts.size();
            }
            break;
        }
        case RuleKind::Regex:
        case RuleKind::DeleteSpan: {
            std::size_t alt_base = 0;
            for (const auto& p : r.patterns) {
                const std::size_t ntpl = r.kind == RuleKind::DeleteSpan ? 1 : p.templates.size();
                for (std::sregex_iterator it(sentence.begin(), sentence.end(), p.re), end; it != end; ++it) {
                    const auto& m = *it;
                    if (m.length(0) == 0) continue;
                    const std::size_t b = sp.begin + static_cast<std::size_t>(m.position(0));
                    const std::size_t e = b + static_cast<std::size_t>(m.length(0));
                    for (std::size_t k = 0; k < ntpl; ++k) {
                        std::string repl = r.kind == RuleKind::DeleteSpan ? std::string() : detail::render(p.templates[k], m);
                        if (repl == m.str(0)) continue;
                        Site s{&r, alt_base + k, {{b, e, repl}}, {}, m.str(0), repl};
                        if (r.kind == RuleKind::DeleteSpan) tidy_deletion(d, sp, s.edits[0]);
                        detail::fix_sentence_start(d, sp.begin, s.edits[0]);
                        if (r.kind == RuleKind::Regex) s.to = s.edits[0].replacement;
                        if (s.edits[0].end > s.edits[0].begin || !s.edits[0].replacement.empty())
                            out.push_back(std::move(s));
                    }
                }
                alt_base += ntpl;
            }
            break;
        }
        case RuleKind::Ladder:
            gen_ladder(r, d, si, out);
            break;
        case RuleKind::Measurement:
            gen_measurement(r, d, si, out);
            break;
        case RuleKind::DeleteSentence: {
            if (d.sentences.size() < 2) break;
            bool match = false;
            for (const auto& p : r.patterns) match = match || std::regex_search(sentence, p.re);
            if (!match) break;
            TextEdit e = si + 1 < d.sentences.size()
                             ? TextEdit{sp.begin, d.sentences[si + 1].begin, ""}
                             : TextEdit{d.sentences[si - 1].end, sp.end, ""};
            out.push_back(Site{&r, 0, {e}, {sp.begin}, sentence, ""});
            break;
        }
        case RuleKind::InsertSentence:
        case RuleKind::Append: {
            std::size_t alt_base = 0;
            for (const auto& p : r.patterns) {
                std::smatch m;
                if (std::regex_search(sentence, m, p.re)) {
                    for (std::size_t k = 0; k < p.templates.size(); ++k) {
                        auto added = detail::as_sentence(detail::render(p.templates[k], m));
                        if (added.size() < 2 || detail::icontains(d.text, added.substr(0, added.size() - 1))) continue;
                        const std::size_t at = r.kind == RuleKind::Append ? d.sentences.back().end : sp.end;
                        out.push_back(Site{&r, alt_base + k, {{at, at, " " + added}}, {sp.begin}, sentence, added});
                    }
                }
                alt_base += p.templates.size();
            }
            break;
        }
        case RuleKind::Typo:
            gen_typos(r, d, si, seed, out);
            break;
        case RuleKind::SwapSentences:
            break;
        }
    }

    /// Drop one adjacent space so a removed span does not leave "a  b" or "a ,".
    static void tidy_deletion(const detail::Doc& d, const SentenceSpan& sp, TextEdit& e) {
        const auto& t = d.text;
        const bool space_before = e.begin > sp.begin && t[e.begin - 1] == ' ';
        const bool space_after = e.end < t.size() && t[e.end] == ' ';
        const bool punct_after = e.end < t.size() && (t[e.end] == '.' || t[e.end] == ',' || t[e.end] == ';');
        if (space_before && (space_after || punct_after || e.end >= sp.end))
            --e.begin;
        else if (e.begin == sp.begin && space_after)
            ++e.end;
    }

    void gen_ladder(const PerturbationRule& r, const detail::Doc& d, std::size_t si, std::vector<Site>& out) const {
        const auto& sp = d.sentences[si];
        struct Hit {
            std::size_t pos, len, ladder, rung;
        };
        std::vector<Hit> hits;
        std::vector<bool> taken(sp.end - sp.begin, false);
        // Longest terms first so "mild-to-moderate" wins over "mild".
        std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> terms; // len, ladder, rung
        for (std::size_t l = 0; l < r.ladders.size(); ++l)
            for (std::size_t k = 0; k < r.ladders[l].size(); ++k)
                if (!r.ladders[l][k].empty()) terms.emplace_back(r.ladders[l][k].size(), l, k);
        std::stable_sort(terms.begin(), terms.end(), [](auto& a, auto& b) { return std::get<0>(a) > std::get<0>(b); });
        for (const auto& [len, l, k] : terms) {
            for (auto pos : detail::find_phrase(d.text, sp.begin, sp.end, r.ladders[l][k])) {
                bool free = true;
                for (auto i = pos; i < pos + len; ++i) free = free && !taken[i - sp.begin];
                if (!free) continue;
                for (auto i = pos; i < pos + len; ++i) taken[i - sp.begin] = true;
                hits.push_back({pos, len, l, k});
            }
        }
        for (const auto& h : hits) {
            const auto& ladder = r.ladders[h.ladder];
            for (std::size_t t = 0; t < ladder.size(); ++t) {
                if (ladder[t].empty() || t == h.rung) continue;
                const auto jump = t > h.rung ? t - h.rung : h.rung - t;
                const bool ok = r.significance == Significance::Significant ? jump >= 2 : jump == 1;
                if (!ok) continue;
                Site s{&r, t, {{h.pos, h.pos + h.len, ladder[t]}}, {},
                       std::string(d.text.substr(h.pos, h.len)), ladder[t]};
                detail::fix_sentence_start(d, sp.begin, s.edits[0]);
                s.to = s.edits[0].replacement;
                out.push_back(std::move(s));
            }
        }
    }

    void gen_measurement(const PerturbationRule& r, const detail::Doc& d, std::size_t si, std::vector<Site>& out) const {
        static const std::regex num(R"((\d+(?:\.\d+)?)(?=\s?-?\s?(?:cm|mm)\b))", std::regex::icase);
        const auto& sp = d.sentences[si];
        const std::string sentence(d.sentence(si));
        for (std::sregex_iterator it(sentence.begin(), sentence.end(), num), end; it != end; ++it) {
            const auto& m = *it;
            const std::size_t b = sp.begin + static_cast<std::size_t>(m.position(1));
            const std::string orig = m.str(1);
            if (b > 0 && (detail::is_ascii_digit(d.text[b - 1]) || d.text[b - 1] == '.')) continue;
            const double v = std::stod(orig);
            if (v <= 0.0) continue;
            int p = detail::decimals_of(orig);
            std::vector<std::string> targets;
            if (r.significance == Significance::Significant) {
                for (double f : r.factors) targets.push_back(detail::format_fixed(detail::round_to(v * f, p), p));
            } else {
                double step = std::pow(10.0, -p);
                while (step / v > 0.1 + 1e-12) {
                    ++p;
                    step /= 10.0;
                }
                targets.push_back(detail::format_fixed(detail::round_to(v + step, p), p));
                if (v - step > 0.0) targets.push_back(detail::format_fixed(detail::round_to(v - step, p), p));
            }
            for (std::size_t k = 0; k < targets.size(); ++k) {
                if (targets[k] == orig) continue;
                out.push_back(Site{&r, k, {{b, b + orig.size(), targets[k]}}, {}, orig, targets[k]});
            }
        }
    }

    bool typo_eligible(std::string_view w) const {
        if (w.size() < 4) return false;
        if (!std::all_of(w.begin(), w.end(), [](char c) { return detail::is_ascii_alpha(c); })) return false;
        const auto lw = detail::ascii_lower(w);
        if (lw == "but" || lw == "although" || lw == "however" || is_laterality_token(lw)) return false;
        return !gaz_.is_reserved_token(lw);
    }

    void gen_typos(const PerturbationRule& r, const detail::Doc& d, std::size_t si, std::uint64_t seed,
                   std::vector<Site>& out) const {
        constexpr std::size_t kVariants = 2;
        const auto& sp = d.sentences[si];
        std::vector<std::pair<std::size_t, std::size_t>> words; // begin, end
        for (std::size_t i = sp.begin; i < sp.end;) {
            if (!detail::is_word_char(d.text[i])) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < sp.end && detail::is_word_char(d.text[j])) ++j;
            if (typo_eligible(d.text.substr(i, j - i))) words.emplace_back(i, j);
            i = j;
        }
        if (words.size() < 2) return;
        for (std::size_t v = 0; v < kVariants; ++v) {
            Rng rng(derive_seed(seed, "typo/" + std::to_string(sp.begin) + "/" + std::to_string(v)));
            auto pool = words;
            rng.shuffle(pool);
            const std::size_t want = std::min<std::size_t>(pool.size(), 2 + rng.below(3));
            Site s{&r, v, {}, {}, {}, {}};
            for (std::size_t k = 0; k < pool.size() && s.edits.size() < want; ++k) {
                const auto [b, e] = pool[k];
                std::string w(d.text.substr(b, e - b));
                auto t = make_typo(w, rng);
                if (t == w || gaz_.is_reserved_token(detail::ascii_lower(t))) continue;
                s.edits.push_back({b, e, t});
            }
            if (s.edits.size() < 2) continue;
            std::sort(s.edits.begin(), s.edits.end(), [](auto& x, auto& y) { return x.begin < y.begin; });
            for (const auto& e : s.edits) {
                s.from += (s.from.empty() ? "" : ", ") + std::string(d.text.substr(e.begin, e.end - e.begin));
                s.to += (s.to.empty() ? "" : ", ") + e.replacement;
            }
            out.push_back(std::move(s));
        }
    }

    static std::string make_typo(std::string w, Rng& rng) {
        const std::size_t n = w.size();
        switch (rng.below(3)) {
        case 0: { // transpose two interior letters
            const auto i = 1 + static_cast<std::size_t>(rng.below(n - 2));
            if (i + 1 < n) std::swap(w[i], w[i + 1]);
            break;
        }
        case 1: // drop an interior letter
            w.erase(1 + static_cast<std::size_t>(rng.below(n - 2)), 1);
            break;
        default: { // double a letter
            const auto i = 1 + static_cast<std::size_t>(rng.below(n - 1));
            w.insert(i, 1, w[i]);
            break;
        }
        }
        return w;
    }

    void gen_swaps(const PerturbationRule& r, const detail::Doc& d, std::vector<Site>& out) const {
        for (std::size_t i = 0; i + 1 < d.sentences.size(); ++i) {
            const auto& a = d.sentences[i];
            const auto& b = d.sentences[i + 1];
            const auto sa = d.sentence(i), sb = d.sentence(i + 1);
            if (sa.back() != '.' || sb.back() != '.') continue;
            if (r.exclude && (std::regex_search(std::string(sa), *r.exclude) ||
                              std::regex_search(std::string(sb), *r.exclude)))
                continue;
            const std::string gap(d.text.substr(a.end, b.begin - a.end));
            out.push_back(Site{&r, 0, {{a.begin, b.end, std::string(sb) + gap + std::string(sa)}}, {},
                               std::string(sa), std::string(sb)});
        }
    }

    RuleBook rules_;
    Gazetteer gaz_;
    mutable std::unordered_map<std::string, LabelVector> label_cache_;
};

// ---------------------------------------------------------------------------
// Dataset assembly

inline PairDataset to_dataset(const std::vector<PerturbationOutcome>& outcomes) {
    PairDataset d;
    d.pairs.reserve(outcomes.size());
    for (const auto& o : outcomes) d.pairs.push_back(o.pair);
    return d;
}

/// Sidecar record linking a pair back to its source report and rule.
inline nlohmann::ordered_json provenance_json(const PerturbationOutcome& o) {
    nlohmann::ordered_json j;
    j["pair_id"] = o.pair.pair_id;
    j["gt_id"] = o.source_report_id;
    j["rule_id"] = o.rule_id;
    j["edited_span"] = {o.edited_span.begin, o.edited_span.end};
    return j;
}

inline std::string serialize_provenance(const std::vector<PerturbationOutcome>& outcomes) {
    std::string out;
    for (const auto& o : outcomes) out += provenance_json(o).dump() + "\n";
    return out;
}

} // namespace medmeta
