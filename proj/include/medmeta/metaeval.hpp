// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Discriminative / robustness aggregation with bootstrap intervals,
// monotonicity across severity groups, and annotator agreement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "medmeta/corpus.hpp"
#include "medmeta/error.hpp"
#include "medmeta/metrics.hpp"
#include "medmeta/random.hpp"

namespace medmeta {

// ---------------------------------------------------------------------------
// Basic statistics

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw DegenerateInput("mean of an empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Sample Pearson correlation, or nullopt when either vector is constant.
inline std::optional<double> pearson_or_undefined(const std::vector<double>& x,
                                                  const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
    if (x.size() < 2) throw DegenerateInput("pearson needs at least 2 observations");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    auto r = pearson_or_undefined(x, y);
    if (!r) throw DegenerateInput("pearson undefined for a constant vector");
    return *r;
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr std::size_t kDefaultResamples = 10000;
inline constexpr double kDefaultCiLevel = 0.95;

/// Percentile bootstrap interval for the mean. The bounds are widened, if
/// needed, to contain the sample mean.
inline Interval bootstrap_ci(const std::vector<double>& values, std::size_t resamples,
                             double level, std::uint64_t seed) {
    if (values.size() < 2) throw DegenerateInput("bootstrap needs at least 2 values");
    if (!(level > 0.0 && level < 1.0)) throw DegenerateInput("confidence level must be in (0,1)");
    if (resamples == 0) throw DegenerateInput("bootstrap needs at least 1 resample");
    const std::size_t n = values.size();
    Rng rng(seed);
    std::vector<double> means(resamples);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[static_cast<std::size_t>(rng.below(n))];
        m = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double mu = mean(values);
    Interval ci{quantile_sorted(means, (1.0 - level) / 2.0),
                quantile_sorted(means, (1.0 + level) / 2.0)};
    ci.lo = std::min(ci.lo, mu);
    ci.hi = std::max(ci.hi, mu);
    return ci;
}

// ---------------------------------------------------------------------------
// Aspect cells

struct CellFilter {
    std::optional<Aspect> aspect;
    std::optional<ErrorType> error_type;
};

struct AspectCell {
    std::optional<Aspect> aspect; // empty for the overall aggregate
    std::optional<ErrorType> error_type;
    Significance significance = Significance::Significant;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;

    /// Column label, e.g. "location/omission", "noise" or "overall".
    std::string label() const {
        if (!aspect) return "overall";
        std::string s(to_string(*aspect));
        if (error_type) s += "/" + std::string(to_string(*error_type));
        return s;
    }
};

struct BootstrapOptions {
    std::size_t resamples = kDefaultResamples;
    double level = kDefaultCiLevel;
    std::uint64_t seed = 0;
};

using ScoreIndex = std::unordered_map<std::string, double>;

inline ScoreIndex index_scores(const std::vector<MetricScore>& scores) {
    ScoreIndex idx;
    for (const auto& s : scores) {
        if (!(s.value >= 0.0 && s.value <= 1.0))
            throw Error("score for " + s.pair_id + " is outside [0,1]");
        if (!idx.emplace(s.pair_id, s.value).second) throw DuplicateId(s.pair_id);
    }
    return idx;
}

namespace detail {

inline AspectCell aggregate(const ScoreIndex& idx, const PairDataset& d, CellFilter f,
                            Significance sig, const BootstrapOptions& bo) {
    std::vector<double> vals;
    for (const auto& p : d.pairs) {
        if (p.significance != sig) continue;
        if (f.aspect && p.aspect != *f.aspect) continue;
        if (f.error_type && p.error_type != *f.error_type) continue;
        auto it = idx.find(p.pair_id);
        if (it == idx.end()) throw Error("no score for pair " + p.pair_id);
        vals.push_back(it->second);
    }
    AspectCell c{f.aspect, f.error_type, sig, 0.0, 0.0, 0.0, vals.size()};
    if (vals.empty()) {
        std::string what = f.aspect ? std::string(to_string(*f.aspect)) : std::string("overall");
        if (f.error_type) what += "/" + std::string(to_string(*f.error_type));
        throw EmptyCell("no " + std::string(to_string(sig)) + " pairs in cell " + what);
    }
    c.mean = mean(vals);
    if (vals.size() < 2) {
        c.ci_low = c.ci_high = c.mean;
    } else {
        const auto seed = derive_seed(bo.seed, c.label() + "/" + std::string(to_string(sig)));
        auto ci = bootstrap_ci(vals, bo.resamples, bo.level, seed);
        c.ci_low = ci.lo;
        c.ci_high = ci.hi;
    }
    return c;
}

} // namespace detail

/// Mean score over the Significant pairs in the cell. Lower is better.
inline AspectCell discriminative_score(const std::vector<MetricScore>& scores,
                                       const PairDataset& d, CellFilter f,
                                       const BootstrapOptions& bo = {}) {
    return detail::aggregate(index_scores(scores), d, f, Significance::Significant, bo);
}

/// Mean score over the Insignificant pairs in the cell. Higher is better.
inline AspectCell robustness_score(const std::vector<MetricScore>& scores, const PairDataset& d,
                                   CellFilter f, const BootstrapOptions& bo = {}) {
    return detail::aggregate(index_scores(scores), d, f, Significance::Insignificant, bo);
}

inline constexpr double kZeroGapTolerance = 1e-9;

struct MetaEvalReport {
    std::string metric_id;
    std::vector<AspectCell> discriminative_cells;
    std::vector<AspectCell> robustness_cells;
    std::optional<AspectCell> overall_discriminative;
    std::optional<AspectCell> overall_robustness;

    /// The metric cannot tell significant from insignificant errors at all.
    bool zero_gap() const {
        return overall_discriminative && overall_robustness &&
               std::abs(overall_robustness->mean - overall_discriminative->mean) <
                   kZeroGapTolerance;
    }
};

/// Cell layout: high-impact aspects split by error type, the rest pooled.
inline std::vector<CellFilter> cell_layout() {
    std::vector<CellFilter> out;
    for (auto a : kAllAspects) {
        if (is_high_impact(a))
            for (auto e : kAllErrorTypes) out.push_back({a, e});
        else
            out.push_back({a, std::nullopt});
    }
    return out;
}

/// Aggregate every populated cell of `d` plus the per-significance overall.
inline MetaEvalReport evaluate_metric(const std::string& metric_id,
                                      const std::vector<MetricScore>& scores,
                                      const PairDataset& d, const BootstrapOptions& bo = {}) {
    const auto idx = index_scores(scores);
    std::set<std::tuple<Aspect, ErrorType, Significance>> populated;
    for (const auto& p : d.pairs) populated.insert({p.aspect, p.error_type, p.significance});
    auto has = [&](CellFilter f, Significance s) {
        for (auto e : kAllErrorTypes) {
            if (f.error_type && e != *f.error_type) continue;
            if (populated.count({*f.aspect, e, s})) return true;
        }
        return false;
    };
    BootstrapOptions cell_bo = bo;
    cell_bo.seed = derive_seed(bo.seed, metric_id);
    MetaEvalReport r;
    r.metric_id = metric_id;
    for (const auto& f : cell_layout()) {
        if (has(f, Significance::Significant))
            r.discriminative_cells.push_back(
                detail::aggregate(idx, d, f, Significance::Significant, cell_bo));
        if (has(f, Significance::Insignificant))
            r.robustness_cells.push_back(
                detail::aggregate(idx, d, f, Significance::Insignificant, cell_bo));
    }
    if (!r.discriminative_cells.empty())
        r.overall_discriminative = detail::aggregate(idx, d, {}, Significance::Significant, cell_bo);
    if (!r.robustness_cells.empty())
        r.overall_robustness = detail::aggregate(idx, d, {}, Significance::Insignificant, cell_bo);
    return r;
}

// ---------------------------------------------------------------------------
// Monotonicity

struct MonotonicityViolation {
    int from_group = 0;
    int to_group = 0;
    double delta = 0.0;
};

struct MonotonicityProfile {
    std::string metric_id;
    std::array<double, kSeverityGroups> group_means{};
    std::vector<MonotonicityViolation> violations;
};

/// Only strict increases between adjacent groups count as violations.
inline MonotonicityProfile monotonicity_from_means(const std::string& metric_id,
                                                   const std::array<double, kSeverityGroups>& m) {
    MonotonicityProfile p{metric_id, m, {}};
    for (int g = 0; g + 1 < kSeverityGroups; ++g) {
        const double d = m[static_cast<std::size_t>(g + 1)] - m[static_cast<std::size_t>(g)];
        if (d > 0.0) p.violations.push_back({g, g + 1, d});
    }
    return p;
}

/// `scores[fixture_id][group]` must hold all five groups for every fixture.
inline MonotonicityProfile monotonicity_profile(
    const std::string& metric_id, const std::map<std::string, std::map<int, double>>& scores) {
    if (scores.empty()) throw DegenerateInput("no severity fixtures scored");
    std::array<double, kSeverityGroups> sums{};
    for (const auto& [fixture, groups] : scores) {
        for (int g = 0; g < kSeverityGroups; ++g) {
            auto it = groups.find(g);
            if (it == groups.end()) throw MissingGroup(fixture, g);
            sums[static_cast<std::size_t>(g)] += it->second;
        }
    }
    for (auto& s : sums) s /= static_cast<double>(scores.size());
    return monotonicity_from_means(metric_id, sums);
}

// ---------------------------------------------------------------------------
// Annotator agreement

struct AgreementCell {
    std::optional<double> value; // empty when no annotator pair is defined
    std::size_t pairs_attempted = 0;
    std::size_t pairs_defined = 0;
};

struct AgreementMatrix {
    std::string retrieval_metric;
    std::map<std::pair<AnnotationCategory, Significance>, AgreementCell> cells;

    const AgreementCell& at(AnnotationCategory c, Significance s) const {
        return cells.at({c, s});
    }
};

/// Mean pairwise Pearson correlation of per-item counts, one matrix per
/// retrieval metric in order of first appearance. Each annotator pair is
/// correlated over the items both annotated; pairs with fewer than two
/// shared items or a constant vector are skipped.
inline std::vector<AgreementMatrix> agreement_matrix(const std::vector<AnnotationRecord>& records) {
    std::vector<std::string> order;
    // metric -> category -> annotator -> item -> record
    std::map<std::string,
             std::map<AnnotationCategory,
                      std::map<std::string, std::map<std::string, const AnnotationRecord*>>>>
        grouped;
    for (const auto& r : records) {
        if (!grouped.count(r.retrieval_metric)) order.push_back(r.retrieval_metric);
        grouped[r.retrieval_metric][r.category][r.annotator_id][r.item_id] = &r;
    }
    std::vector<AgreementMatrix> out;
    for (const auto& metric : order) {
        AgreementMatrix m;
        m.retrieval_metric = metric;
        for (auto cat : kAllCategories) {
            for (auto sig : kAllSignificances) {
                AgreementCell cell;
                auto cit = grouped[metric].find(cat);
                if (cit != grouped[metric].end()) {
                    const auto& by_ann = cit->second;
                    double sum = 0.0;
                    for (auto a = by_ann.begin(); a != by_ann.end(); ++a) {
                        for (auto b = std::next(a); b != by_ann.end(); ++b) {
                            ++cell.pairs_attempted;
                            std::vector<double> x, y;
                            for (const auto& [item, rec] : a->second) {
                                auto other = b->second.find(item);
                                if (other == b->second.end()) continue;
                                x.push_back(static_cast<double>(rec->count(sig)));
                                y.push_back(static_cast<double>(other->second->count(sig)));
                            }
                            if (x.size() < 2) continue;
                            if (auto r = pearson_or_undefined(x, y)) {
                                sum += *r;
                                ++cell.pairs_defined;
                            }
                        }
                    }
                    if (cell.pairs_defined)
                        cell.value = sum / static_cast<double>(cell.pairs_defined);
                }
                m.cells[{cat, sig}] = cell;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace medmeta
