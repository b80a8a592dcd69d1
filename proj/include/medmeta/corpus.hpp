// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Report pairs, severity fixtures and annotator records, with their file
// formats and the dataset composition check.

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "medmeta/error.hpp"

namespace medmeta {

// ---------------------------------------------------------------------------
// Enumerations

enum class Aspect {
    Location,
    Severity,
    Description,
    Negation,
    Modality,
    SizeDistance,
    ComparisonProgression,
    InternalContradiction,
    Uncertainty,
    Terminology,
    Noise,
    StylisticVariation,
};

inline constexpr std::array<Aspect, 12> kAllAspects = {
    Aspect::Location,      Aspect::Severity,    Aspect::Description,
    Aspect::Negation,      Aspect::Modality,    Aspect::SizeDistance,
    Aspect::ComparisonProgression, Aspect::InternalContradiction,
    Aspect::Uncertainty,   Aspect::Terminology, Aspect::Noise,
    Aspect::StylisticVariation,
};

/// The ten aspects probing clinical alignment.
inline constexpr std::array<Aspect, 10> kClinicalAspects = {
    Aspect::Location,      Aspect::Severity,    Aspect::Description,
    Aspect::Negation,      Aspect::Modality,    Aspect::SizeDistance,
    Aspect::ComparisonProgression, Aspect::InternalContradiction,
    Aspect::Uncertainty,   Aspect::Terminology,
};

/// The two aspects probing robustness to surface variation.
inline constexpr std::array<Aspect, 2> kRobustnessAspects = {Aspect::Noise,
                                                             Aspect::StylisticVariation};

/// Aspects whose dataset quota is split per error type.
inline constexpr std::array<Aspect, 4> kHighImpactAspects = {
    Aspect::Location, Aspect::Severity, Aspect::Description, Aspect::ComparisonProgression};

inline constexpr bool is_clinical(Aspect a) noexcept {
    return a != Aspect::Noise && a != Aspect::StylisticVariation;
}

inline constexpr bool is_high_impact(Aspect a) noexcept {
    return a == Aspect::Location || a == Aspect::Severity || a == Aspect::Description ||
           a == Aspect::ComparisonProgression;
}

enum class ErrorType { Omission, Fabrication, Inaccuracy };
inline constexpr std::array<ErrorType, 3> kAllErrorTypes = {
    ErrorType::Omission, ErrorType::Fabrication, ErrorType::Inaccuracy};

enum class Significance { Significant, Insignificant };
inline constexpr std::array<Significance, 2> kAllSignificances = {Significance::Significant,
                                                                  Significance::Insignificant};

enum class ReportSource { Synthetic, External };

/// Error categories of the annotator study, (a) through (f).
enum class AnnotationCategory { A, B, C, D, E, F };
inline constexpr std::array<AnnotationCategory, 6> kAllCategories = {
    AnnotationCategory::A, AnnotationCategory::B, AnnotationCategory::C,
    AnnotationCategory::D, AnnotationCategory::E, AnnotationCategory::F};

inline constexpr std::string_view to_string(Aspect a) noexcept {
    switch (a) {
    case Aspect::Location: return "location";
    case Aspect::Severity: return "severity";
    case Aspect::Description: return "description";
    case Aspect::Negation: return "negation";
    case Aspect::Modality: return "modality";
    case Aspect::SizeDistance: return "size_distance";
    case Aspect::ComparisonProgression: return "comparison_progression";
    case Aspect::InternalContradiction: return "internal_contradiction";
    case Aspect::Uncertainty: return "uncertainty";
    case Aspect::Terminology: return "terminology";
    case Aspect::Noise: return "noise";
    case Aspect::StylisticVariation: return "stylistic_variation";
    }
    return "?";
}

inline constexpr std::string_view to_string(ErrorType e) noexcept {
    switch (e) {
    case ErrorType::Omission: return "omission";
    case ErrorType::Fabrication: return "fabrication";
    case ErrorType::Inaccuracy: return "inaccuracy";
    }
    return "?";
}

inline constexpr std::string_view to_string(Significance s) noexcept {
    return s == Significance::Significant ? "significant" : "insignificant";
}

inline constexpr std::string_view to_string(ReportSource s) noexcept {
    return s == ReportSource::Synthetic ? "synthetic" : "external";
}

inline constexpr std::string_view to_string(AnnotationCategory c) noexcept {
    constexpr std::string_view names[] = {"a", "b", "c", "d", "e", "f"};
    return names[static_cast<int>(c)];
}

/// 1-based column index used in tabular agreement output.
inline constexpr int category_number(AnnotationCategory c) noexcept {
    return static_cast<int>(c) + 1;
}

inline std::optional<Aspect> parse_aspect(std::string_view s) {
    for (auto a : kAllAspects)
        if (to_string(a) == s) return a;
    return std::nullopt;
}

inline std::optional<ErrorType> parse_error_type(std::string_view s) {
    for (auto e : kAllErrorTypes)
        if (to_string(e) == s) return e;
    return std::nullopt;
}

inline std::optional<Significance> parse_significance(std::string_view s) {
    for (auto v : kAllSignificances)
        if (to_string(v) == s) return v;
    return std::nullopt;
}

inline std::optional<ReportSource> parse_source(std::string_view s) {
    if (s == "synthetic") return ReportSource::Synthetic;
    if (s == "external") return ReportSource::External;
    return std::nullopt;
}

/// Accepts "a".."f" or "1".."6".
inline std::optional<AnnotationCategory> parse_category(std::string_view s) {
    if (s.size() != 1) return std::nullopt;
    if (s[0] >= 'a' && s[0] <= 'f') return static_cast<AnnotationCategory>(s[0] - 'a');
    if (s[0] >= '1' && s[0] <= '6') return static_cast<AnnotationCategory>(s[0] - '1');
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Records

struct Report {
    std::string id;
    std::string text;
    ReportSource source = ReportSource::Synthetic;
    friend bool operator==(const Report&, const Report&) = default;
};

struct ReportPair {
    std::string pair_id;
    Report gt;
    Report me;
    Aspect aspect = Aspect::Location;
    ErrorType error_type = ErrorType::Inaccuracy;
    Significance significance = Significance::Significant;
    std::string explanation;
    friend bool operator==(const ReportPair&, const ReportPair&) = default;
};

struct PairDataset {
    std::vector<ReportPair> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
    bool empty() const noexcept { return pairs.empty(); }
    friend bool operator==(const PairDataset&, const PairDataset&) = default;
};

inline constexpr int kSeverityGroups = 5;

struct SeverityFixture {
    std::string report_id;
    Report gt;
    std::array<Report, kSeverityGroups> variants;
    friend bool operator==(const SeverityFixture&, const SeverityFixture&) = default;
};

struct AnnotationRecord {
    std::string item_id;
    std::string retrieval_metric;
    std::string annotator_id;
    AnnotationCategory category = AnnotationCategory::A;
    long significant_count = 0;
    long insignificant_count = 0;

    long count(Significance s) const noexcept {
        return s == Significance::Significant ? significant_count : insignificant_count;
    }
    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    });
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(const std::string& content, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        ++line_no;
        std::string_view line(content.data() + pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!is_blank(line)) fn(line_no, line);
        if (nl == content.size()) break;
        pos = nl + 1;
    }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw MalformedRecord(line, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    const auto& v = require(obj, key, line);
    if (!v.is_string())
        throw MalformedRecord(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline std::string require_text(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto s = require_string(obj, key, line);
    if (is_blank(s))
        throw MalformedRecord(line, std::string("field '") + key + "' must be non-empty");
    return s;
}

inline nlohmann::json parse_json_line(std::string_view line, std::size_t line_no) {
    try {
        auto j = nlohmann::json::parse(line);
        if (!j.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedRecord(line_no, e.what());
    }
}

template <typename E, typename Parse>
E require_enum(const nlohmann::json& obj, const char* key, std::size_t line, Parse parse) {
    auto s = require_string(obj, key, line);
    auto v = parse(s);
    if (!v) throw MalformedRecord(line, std::string("unknown ") + key + " '" + s + "'");
    return *v;
}

} // namespace detail

/// Write `content` to `path` through a temporary file and rename, so readers
/// never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Reports (input corpus for the generator): {"id","text","source"}

inline nlohmann::ordered_json to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["source"] = to_string(r.source);
    return j;
}

inline std::vector<Report> parse_reports(const std::string& content) {
    std::vector<Report> out;
    std::set<std::string> seen;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        auto j = detail::parse_json_line(line, line_no);
        Report r;
        r.id = detail::require_text(j, "id", line_no);
        r.text = detail::require_text(j, "text", line_no);
        r.source = ReportSource::Synthetic;
        if (j.contains("source"))
            r.source = detail::require_enum<ReportSource>(j, "source", line_no, parse_source);
        if (!seen.insert(r.id).second) throw DuplicateId(r.id);
        out.push_back(std::move(r));
    });
    return out;
}

inline std::vector<Report> load_reports(const std::filesystem::path& path) {
    return parse_reports(detail::read_file(path));
}

inline std::string serialize_reports(const std::vector<Report>& reports) {
    std::string out;
    for (const auto& r : reports) out += to_json(r).dump() + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// pairs.jsonl

inline nlohmann::ordered_json to_json(const ReportPair& p) {
    nlohmann::ordered_json j;
    j["pair_id"] = p.pair_id;
    j["aspect"] = to_string(p.aspect);
    j["error_type"] = to_string(p.error_type);
    j["significance"] = to_string(p.significance);
    j["gt_text"] = p.gt.text;
    j["me_text"] = p.me.text;
    j["explanation"] = p.explanation;
    j["source"] = to_string(p.gt.source);
    return j;
}

inline ReportPair pair_from_json(const nlohmann::json& j, std::size_t line_no) {
    ReportPair p;
    p.pair_id = detail::require_text(j, "pair_id", line_no);
    p.aspect = detail::require_enum<Aspect>(j, "aspect", line_no, parse_aspect);
    p.error_type = detail::require_enum<ErrorType>(j, "error_type", line_no, parse_error_type);
    p.significance =
        detail::require_enum<Significance>(j, "significance", line_no, parse_significance);
    const auto source = detail::require_enum<ReportSource>(j, "source", line_no, parse_source);
    p.gt = {p.pair_id + ":gt", detail::require_text(j, "gt_text", line_no), source};
    p.me = {p.pair_id + ":me", detail::require_text(j, "me_text", line_no), source};
    p.explanation = detail::require_string(j, "explanation", line_no);
    if (p.gt.text == p.me.text)
        throw MalformedRecord(line_no, "gt_text and me_text are identical");
    return p;
}

inline PairDataset parse_pairs(const std::string& content) {
    PairDataset d;
    std::set<std::string> seen;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        auto p = pair_from_json(detail::parse_json_line(line, line_no), line_no);
        if (!seen.insert(p.pair_id).second) throw DuplicateId(p.pair_id);
        d.pairs.push_back(std::move(p));
    });
    return d;
}

/// Load a pairs.jsonl file. Throws MalformedRecord(line) or DuplicateId.
inline PairDataset load_pairs(const std::filesystem::path& path) {
    return parse_pairs(detail::read_file(path));
}

inline std::string serialize_pairs(const PairDataset& d) {
    std::string out;
    for (const auto& p : d.pairs) out += to_json(p).dump() + "\n";
    return out;
}

inline void save_pairs(const std::filesystem::path& path, const PairDataset& d) {
    write_file_atomic(path, serialize_pairs(d));
}

// ---------------------------------------------------------------------------
// severity.jsonl

inline nlohmann::ordered_json to_json(const SeverityFixture& f) {
    nlohmann::ordered_json j;
    j["report_id"] = f.report_id;
    j["gt_text"] = f.gt.text;
    nlohmann::ordered_json v;
    for (int g = 0; g < kSeverityGroups; ++g)
        v[std::to_string(g)] = f.variants[static_cast<std::size_t>(g)].text;
    j["variants"] = std::move(v);
    return j;
}

inline std::vector<SeverityFixture> parse_severity_fixtures(const std::string& content) {
    std::vector<SeverityFixture> out;
    std::set<std::string> seen;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        auto j = detail::parse_json_line(line, line_no);
        SeverityFixture f;
        f.report_id = detail::require_text(j, "report_id", line_no);
        f.gt = {f.report_id, detail::require_text(j, "gt_text", line_no), ReportSource::Synthetic};
        const auto& vars = detail::require(j, "variants", line_no);
        if (!vars.is_object()) throw MalformedRecord(line_no, "'variants' must be an object");
        for (auto it = vars.begin(); it != vars.end(); ++it) {
            const auto& key = it.key();
            if (key.size() != 1 || key[0] < '0' || key[0] > '4')
                throw MalformedRecord(line_no, "unknown severity group '" + key + "'");
        }
        for (int g = 0; g < kSeverityGroups; ++g) {
            auto it = vars.find(std::to_string(g));
            if (it == vars.end()) throw MissingGroup(f.report_id, g);
            if (!it->is_string() || detail::is_blank(it->get<std::string>()))
                throw MalformedRecord(line_no, "group " + std::to_string(g) +
                                                   " must be a non-empty string");
            auto text = it->get<std::string>();
            if (text == f.gt.text)
                throw MalformedRecord(line_no,
                                      "group " + std::to_string(g) + " text equals gt_text");
            f.variants[static_cast<std::size_t>(g)] = {
                f.report_id + ":g" + std::to_string(g), std::move(text), ReportSource::Synthetic};
        }
        if (!seen.insert(f.report_id).second) throw DuplicateId(f.report_id);
        out.push_back(std::move(f));
    });
    return out;
}

inline std::vector<SeverityFixture> load_severity_fixtures(const std::filesystem::path& path) {
    return parse_severity_fixtures(detail::read_file(path));
}

inline std::string serialize_severity_fixtures(const std::vector<SeverityFixture>& fs) {
    std::string out;
    for (const auto& f : fs) out += to_json(f).dump() + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// annotations.csv

inline constexpr std::string_view kAnnotationHeader =
    "item_id,retrieval_metric,annotator_id,category,significant_count,insignificant_count";

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw MalformedRecord(line_no, "unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline long parse_count(const std::string& s, std::size_t line_no, const char* field) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw MalformedRecord(line_no, std::string(field) + " must be a non-negative integer");
    try {
        return std::stol(s);
    } catch (const std::exception&) {
        throw MalformedRecord(line_no, std::string(field) + " out of range");
    }
}

} // namespace detail

inline std::vector<AnnotationRecord> parse_annotations(const std::string& content) {
    std::vector<AnnotationRecord> out;
    std::set<std::tuple<std::string, std::string, int, std::string>> seen;
    bool header_seen = false;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        auto fields = detail::split_csv_line(line, line_no);
        if (!header_seen) {
            std::string joined;
            for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
            if (joined != kAnnotationHeader)
                throw MalformedRecord(line_no, "expected header '" +
                                                   std::string(kAnnotationHeader) + "'");
            header_seen = true;
            return;
        }
        if (fields.size() != 6)
            throw MalformedRecord(line_no, "expected 6 fields, found " +
                                               std::to_string(fields.size()));
        AnnotationRecord r;
        r.item_id = fields[0];
        r.retrieval_metric = fields[1];
        r.annotator_id = fields[2];
        if (r.item_id.empty() || r.retrieval_metric.empty() || r.annotator_id.empty())
            throw MalformedRecord(line_no, "identifier fields must be non-empty");
        auto cat = parse_category(fields[3]);
        if (!cat) throw MalformedRecord(line_no, "unknown category '" + fields[3] + "'");
        r.category = *cat;
        r.significant_count = detail::parse_count(fields[4], line_no, "significant_count");
        r.insignificant_count = detail::parse_count(fields[5], line_no, "insignificant_count");
        if (!seen.insert({r.item_id, r.annotator_id, static_cast<int>(r.category),
                          r.retrieval_metric})
                 .second)
            throw DuplicateId(r.item_id + "/" + r.annotator_id + "/" +
                              std::string(to_string(r.category)) + "/" + r.retrieval_metric);
        out.push_back(std::move(r));
    });
    if (!header_seen) throw MalformedRecord(1, "missing header");
    return out;
}

inline std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    return parse_annotations(detail::read_file(path));
}

inline std::string serialize_annotations(const std::vector<AnnotationRecord>& rs) {
    std::string out(kAnnotationHeader);
    out += "\n";
    for (const auto& r : rs) {
        out += r.item_id + "," + r.retrieval_metric + "," + r.annotator_id + "," +
               std::string(to_string(r.category)) + "," + std::to_string(r.significant_count) +
               "," + std::to_string(r.insignificant_count) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Composition

inline constexpr std::size_t kPairsPerCell = 10;
inline constexpr std::size_t kDatasetSize = 400;

/// Number of pairs an aspect must hold in a conforming dataset.
inline constexpr std::size_t expected_aspect_total(Aspect a) noexcept {
    return is_high_impact(a) ? kPairsPerCell * 2 * 3 : kPairsPerCell * 2;
}

struct CompositionViolation {
    std::optional<Aspect> aspect; // empty for the dataset-total check
    std::optional<ErrorType> error_type;
    std::optional<Significance> significance;
    std::size_t expected = 0;
    std::size_t found = 0;

    std::string describe() const {
        std::string s = aspect ? std::string(to_string(*aspect)) : std::string("dataset");
        if (error_type) s += "/" + std::string(to_string(*error_type));
        if (significance) s += "/" + std::string(to_string(*significance));
        return s + ": expected " + std::to_string(expected) + ", found " + std::to_string(found);
    }
    friend bool operator==(const CompositionViolation&, const CompositionViolation&) = default;
};

using CompositionReport = std::vector<CompositionViolation>;

/// Check the per-aspect quotas. An aspect with no pairs at all yields a single
/// aspect-level violation; otherwise each off-quota cell is listed. The total
/// is reported only when every cell conforms.
inline CompositionReport validate_composition(const PairDataset& d) {
    std::map<std::tuple<Aspect, ErrorType, Significance>, std::size_t> by_cell;
    std::map<std::pair<Aspect, Significance>, std::size_t> by_sig;
    std::map<Aspect, std::size_t> by_aspect;
    for (const auto& p : d.pairs) {
        ++by_cell[{p.aspect, p.error_type, p.significance}];
        ++by_sig[{p.aspect, p.significance}];
        ++by_aspect[p.aspect];
    }
    CompositionReport out;
    for (auto a : kAllAspects) {
        if (by_aspect[a] == 0) {
            out.push_back({a, std::nullopt, std::nullopt, expected_aspect_total(a), 0});
            continue;
        }
        for (auto s : kAllSignificances) {
            if (is_high_impact(a)) {
                for (auto e : kAllErrorTypes) {
                    auto n = by_cell[{a, e, s}];
                    if (n != kPairsPerCell) out.push_back({a, e, s, kPairsPerCell, n});
                }
            } else {
                auto n = by_sig[{a, s}];
                if (n != kPairsPerCell) out.push_back({a, std::nullopt, s, kPairsPerCell, n});
            }
        }
    }
    if (out.empty() && d.size() != kDatasetSize)
        out.push_back({std::nullopt, std::nullopt, std::nullopt, kDatasetSize, d.size()});
    return out;
}

} // namespace medmeta
