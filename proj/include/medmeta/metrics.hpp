// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Native reference-based scorers. Each maps (reference, candidate) to [0, 1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "medmeta/error.hpp"
#include "medmeta/labeler.hpp"
#include "medmeta/textops.hpp"

namespace medmeta {

struct MetricScore {
    std::string metric_id;
    std::string pair_id;
    double value = 0.0;
    friend bool operator==(const MetricScore&, const MetricScore&) = default;
};

// ---------------------------------------------------------------------------
// BLEU

inline constexpr std::size_t kBleuMaxOrder = 4;

/// Clipped n-gram precision counts: {matched, candidate total}.
inline std::pair<std::size_t, std::size_t> bleu_match_counts(const TokenSeq& ref,
                                                             const TokenSeq& cand,
                                                             std::size_t n) {
    const auto rc = ngrams(ref, n);
    const auto cc = ngrams(cand, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [g, k] : cc) {
        total += k;
        auto it = rc.find(g);
        if (it != rc.end()) matched += std::min(k, it->second);
    }
    return {matched, total};
}

/// Sentence BLEU-4 with uniform weights. The order is capped at the
/// candidate length so identical short texts still score 1. A zero match
/// count at some order is replaced by 1/(2c), c the candidate length.
inline double bleu(const TokenSeq& ref, const TokenSeq& cand) {
    const std::size_t c = cand.size();
    if (c == 0) return 0.0;
    const std::size_t order = std::min(kBleuMaxOrder, c);
    const double eps = 1.0 / (2.0 * static_cast<double>(c));
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= order; ++n) {
        auto [matched, total] = bleu_match_counts(ref, cand, n);
        const double num = matched ? static_cast<double>(matched) : eps;
        log_sum += std::log(num / static_cast<double>(total));
    }
    const double r = static_cast<double>(ref.size());
    const double bp = std::min(1.0, std::exp(1.0 - r / static_cast<double>(c)));
    return std::clamp(bp * std::exp(log_sum / static_cast<double>(order)), 0.0, 1.0);
}

inline double bleu(std::string_view reference, std::string_view candidate) {
    return bleu(tokenize(reference), tokenize(candidate));
}

// ---------------------------------------------------------------------------
// ROUGE-L (balanced F1)

inline double rouge_l(const TokenSeq& ref, const TokenSeq& cand) {
    if (ref.empty() && cand.empty()) return 1.0;
    if (ref.empty() || cand.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(ref, cand));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

inline double rouge_l(std::string_view reference, std::string_view candidate) {
    return rouge_l(tokenize(reference), tokenize(candidate));
}

// ---------------------------------------------------------------------------
// METEOR (exact + stem stages only)

struct MeteorAlignment {
    std::vector<std::pair<std::size_t, std::size_t>> links; // (cand index, ref index), by cand
    std::size_t chunks = 0;
};

inline MeteorAlignment meteor_align(const TokenSeq& ref, const TokenSeq& cand) {
    std::vector<long> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    auto stage = [&](auto&& same) {
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (cand_to_ref[i] >= 0) continue;
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!ref_used[j] && same(cand[i], ref[j])) {
                    cand_to_ref[i] = static_cast<long>(j);
                    ref_used[j] = true;
                    break;
                }
            }
        }
    };
    stage([](const std::string& a, const std::string& b) { return a == b; });
    stage([](const std::string& a, const std::string& b) {
        return porter_stem(a) == porter_stem(b);
    });

    MeteorAlignment out;
    long prev_ref = -2;
    bool prev_matched = false;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const long j = cand_to_ref[i];
        if (j < 0) {
            prev_matched = false;
            continue;
        }
        out.links.emplace_back(i, static_cast<std::size_t>(j));
        if (!prev_matched || j != prev_ref + 1) ++out.chunks;
        prev_matched = true;
        prev_ref = j;
    }
    return out;
}

inline double meteor(const TokenSeq& ref, const TokenSeq& cand) {
    const auto al = meteor_align(ref, cand);
    const double m = static_cast<double>(al.links.size());
    if (m == 0.0) return 0.0;
    const double p = m / static_cast<double>(cand.size());
    const double r = m / static_cast<double>(ref.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(al.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    return fmean * (1.0 - penalty);
}

inline double meteor(std::string_view reference, std::string_view candidate) {
    return meteor(tokenize(reference), tokenize(candidate));
}

// ---------------------------------------------------------------------------
// Label-based F1

inline double chexpert_f1(std::string_view reference, std::string_view candidate,
                          const Gazetteer& g) {
    return label_f1(label_report(reference, g), label_report(candidate, g));
}

// ---------------------------------------------------------------------------
// Entity graphs

struct Entity {
    std::string text;
    std::string label;
    friend bool operator==(const Entity&, const Entity&) = default;
    friend auto operator<=>(const Entity&, const Entity&) = default;
};

struct Relation {
    std::size_t head = 0;
    std::size_t tail = 0;
    std::string label;
    friend bool operator==(const Relation&, const Relation&) = default;
};

struct EntityGraph {
    std::vector<Entity> entities;
    std::vector<Relation> relations;

    void validate() const {
        for (const auto& r : relations)
            if (r.head >= entities.size() || r.tail >= entities.size())
                throw InvalidGraph("relation references entity " +
                                   std::to_string(std::max(r.head, r.tail)) + " of " +
                                   std::to_string(entities.size()));
    }
    friend bool operator==(const EntityGraph&, const EntityGraph&) = default;
};

namespace detail {

template <typename K>
double multiset_f1(const std::map<K, std::size_t>& a, const std::map<K, std::size_t>& b) {
    std::size_t na = 0, nb = 0, tp = 0;
    for (const auto& [k, n] : a) na += n;
    for (const auto& [k, n] : b) {
        nb += n;
        auto it = a.find(k);
        if (it != a.end()) tp += std::min(n, it->second);
    }
    if (na == 0 && nb == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(na + nb);
}

using RelationKey = std::tuple<Entity, Entity, std::string>;

inline std::map<RelationKey, std::size_t> relation_keys(const EntityGraph& g) {
    std::map<RelationKey, std::size_t> out;
    for (const auto& r : g.relations) ++out[{g.entities[r.head], g.entities[r.tail], r.label}];
    return out;
}

inline std::map<Entity, std::size_t> entity_keys(const EntityGraph& g) {
    std::map<Entity, std::size_t> out;
    for (const auto& e : g.entities) ++out[e];
    return out;
}

} // namespace detail

/// Mean of entity F1 and relation F1. Relations match on endpoint content
/// and label, not on indices.
inline double graph_f1(const EntityGraph& gt, const EntityGraph& me) {
    gt.validate();
    me.validate();
    const double ent = detail::multiset_f1(detail::entity_keys(gt), detail::entity_keys(me));
    const double rel = detail::multiset_f1(detail::relation_keys(gt), detail::relation_keys(me));
    return 0.5 * (ent + rel);
}

inline bool is_laterality_token(std::string_view t) {
    return t == "left" || t == "right" || t == "bilateral";
}

/// Observations are condition mentions, anatomy comes from the gazetteer list
/// (a directly preceding laterality word joins the span). Each observation
/// is linked to the nearest anatomy in its sentence, ties to the left.
inline EntityGraph extract_graph(std::string_view text, const Gazetteer& g) {
    EntityGraph out;
    for (const auto& sentence : split_token_sentences(tokenize(text))) {
        const auto stems = detail::stems_of(sentence);
        const auto mentions = find_mentions(sentence, g);
        std::vector<bool> covered(sentence.size(), false);
        for (const auto& m : mentions)
            for (auto i = m.span.begin; i < m.span.end; ++i) covered[i] = true;

        auto span_text = [&](TokenSpan sp) {
            std::string s;
            for (auto i = sp.begin; i < sp.end; ++i) {
                if (i > sp.begin) s += ' ';
                s += sentence[i];
            }
            return s;
        };

        std::vector<std::pair<TokenSpan, std::size_t>> anat; // span, entity index
        std::size_t i = 0;
        while (i < sentence.size()) {
            std::size_t len = 0;
            if (!covered[i] && g.anatomy().match_at(stems, i, len)) {
                TokenSpan sp{i, i + len};
                if (sp.begin > 0 && is_laterality_token(sentence[sp.begin - 1]) &&
                    !covered[sp.begin - 1])
                    --sp.begin;
                anat.emplace_back(sp, 0);
                i += len;
            } else {
                ++i;
            }
        }

        std::vector<std::size_t> obs_idx;
        for (const auto& m : mentions) {
            obs_idx.push_back(out.entities.size());
            out.entities.push_back({span_text(m.span), "obs"});
        }
        for (auto& [sp, idx] : anat) {
            idx = out.entities.size();
            out.entities.push_back({span_text(sp), "anat"});
        }
        for (std::size_t k = 0; k < mentions.size(); ++k) {
            const auto& ms = mentions[k].span;
            std::size_t best = 0;
            std::size_t best_dist = static_cast<std::size_t>(-1);
            for (const auto& [sp, idx] : anat) {
                std::size_t d = sp.end <= ms.begin ? ms.begin - sp.end
                                : ms.end <= sp.begin ? sp.begin - ms.end
                                                     : 0;
                if (d < best_dist) {
                    best_dist = d;
                    best = idx;
                }
            }
            if (best_dist != static_cast<std::size_t>(-1))
                out.relations.push_back({obs_idx[k], best, "located_at"});
        }
    }
    return out;
}

inline double graph_f1(std::string_view reference, std::string_view candidate,
                       const Gazetteer& g) {
    return graph_f1(extract_graph(reference, g), extract_graph(candidate, g));
}

} // namespace medmeta
