// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace medmeta;
using Catch::Matchers::WithinAbs;

TEST_CASE("bleu hand-counted fixture", "[metrics][bleu]") {
    const auto ref = tokenize("the cat is on the mat");
    const auto cand = tokenize("the cat sat on the mat");
    using P = std::pair<std::size_t, std::size_t>;
    CHECK(bleu_match_counts(ref, cand, 1) == P{5, 6});
    CHECK(bleu_match_counts(ref, cand, 2) == P{3, 5});
    CHECK(bleu_match_counts(ref, cand, 3) == P{1, 4});
    CHECK(bleu_match_counts(ref, cand, 4) == P{0, 3});
    // p4 = (1/12)/3, so the geometric mean is (5/6 * 3/5 * 1/4 * 1/36)^(1/4) = 288^(-1/4).
    CHECK_THAT(bleu(ref, cand), WithinAbs(std::pow(288.0, -0.25), 1e-12));
}

TEST_CASE("bleu clips repeated candidate n-grams", "[metrics][bleu]") {
    using P = std::pair<std::size_t, std::size_t>;
    CHECK(bleu_match_counts(tokenize("the cat"), tokenize("the the the"), 1) == P{1, 3});
}

TEST_CASE("bleu edge cases", "[metrics][bleu]") {
    CHECK(bleu("mild cardiomegaly .", "mild cardiomegaly .") == 1.0);
    CHECK(bleu("cardiomegaly", "cardiomegaly") == 1.0);
    CHECK(bleu("anything", "") == 0.0);
    CHECK(bleu("x1 x2 x3 x4 x5 x6 x7 x8 x9 x10 x11 x12",
               "y1 y2 y3 y4 y5 y6 y7 y8 y9 y10 y11 y12") < 0.01);
    const std::string ref = "moderate left pleural effusion with adjacent atelectasis";
    CHECK(bleu(ref, "moderate left pleural effusion with") < 1.0);
}

TEST_CASE("bleu is asymmetric", "[metrics][bleu]") {
    const std::string a = "small left pleural effusion";
    const std::string b = "small left pleural effusion and mild edema";
    CHECK(bleu(a, b) != bleu(b, a));
}

TEST_CASE("rouge_l fixtures", "[metrics][rouge]") {
    CHECK_THAT(rouge_l("the cat on the mat", "the cat sat"), WithinAbs(0.5, 1e-12));
    CHECK(rouge_l("no pneumothorax", "no pneumothorax") == 1.0);
    CHECK(rouge_l("a b", "c d") == 0.0);
    CHECK(rouge_l("", "") == 1.0);
    CHECK(rouge_l("", "x") == 0.0);
}

TEST_CASE("rouge_l balanced F1 is symmetric", "[metrics][rouge][property]") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const auto a = test::random_text(rng, 15), b = test::random_text(rng, 15);
        CHECK(rouge_l(a, b) == rouge_l(b, a));
    }
}

TEST_CASE("meteor fixtures", "[metrics][meteor]") {
    const std::string ten = "the heart size is normal and lungs are clear today";
    REQUIRE(tokenize(ten).size() == 10);
    // Fmean = 1, one chunk over 10 matches: 1 - 0.5 * (1/10)^3.
    CHECK_THAT(meteor(ten, ten), WithinAbs(0.9995, 1e-12));
    // Two single-token chunks: penalty 0.5 * (2/2)^3.
    CHECK_THAT(meteor("severe cardiomegaly", "cardiomegaly severe"), WithinAbs(0.5, 1e-12));
    CHECK(meteor("a b", "c d") == 0.0);
    // The stem stage aligns effusions/effusion: m = 2, one chunk.
    CHECK_THAT(meteor("small effusions", "small effusion"), WithinAbs(1.0 - 0.5 / 8.0, 1e-12));
}

TEST_CASE("meteor Fmean weights recall", "[metrics][meteor]") {
    // ref 4 tokens, cand 2 contiguous matches: P = 1, R = 1/2, Fmean = 10PR/(R+9P) = 5/9.5.
    const double expect = (5.0 / 9.5) * (1.0 - 0.5 * std::pow(0.5, 3));
    CHECK_THAT(meteor("a b c d", "a b"), WithinAbs(expect, 1e-12));
}

TEST_CASE("meteor aligns to the leftmost unused reference token", "[metrics][meteor]") {
    const auto al = meteor_align(tokenize("x a x"), tokenize("x"));
    REQUIRE(al.links.size() == 1);
    CHECK(al.links[0].second == 0);
}

TEST_CASE("rouge_l and meteor ignore trailing whitespace", "[metrics]") {
    const std::string r = "mild pulmonary edema", c = "mild edema";
    CHECK(rouge_l(r, c) == rouge_l(r + "  \n", c + " "));
    CHECK(meteor(r, c) == meteor(r + "\t", c + "  "));
}

TEST_CASE("chexpert_f1", "[metrics][labels]") {
    const auto& g = test::gazetteer();
    CHECK(chexpert_f1("No evidence of pneumothorax", "Pneumothorax is present", g) == 0.0);
    CHECK(chexpert_f1("Moderate cardiomegaly.", "Moderate cardiomegaly.", g) == 1.0);
    CHECK(chexpert_f1("Degenerative changes of the spine.", "Recommend follow-up.", g) == 1.0);
}

TEST_CASE("chexpert_f1 is symmetric", "[metrics][labels][property]") {
    const auto& g = test::gazetteer();
    std::mt19937_64 rng(9);
    for (int i = 0; i < 300; ++i) {
        const auto a = test::random_text(rng, 12), b = test::random_text(rng, 12);
        CHECK(chexpert_f1(a, b, g) == chexpert_f1(b, a, g));
    }
}

TEST_CASE("graph_f1 on hand-built graphs", "[metrics][graph]") {
    EntityGraph gt{{{"consolidation", "obs"}, {"right base", "anat"}}, {{0, 1, "located_at"}}};
    // ME shares one of two entities and adds one: TP = 1, FP = 1, FN = 1.
    EntityGraph me{{{"consolidation", "obs"}, {"left base", "anat"}}, {}};
    // entity F1 = 2*1/(2*1+1+1) = 0.5, relation F1 = 0, mean 0.25.
    CHECK_THAT(graph_f1(gt, me), WithinAbs(0.25, 1e-12));
    EntityGraph subset{{{"consolidation", "obs"}}, {}};
    // entity F1 = 2*1/(2*1+0+1) = 2/3.
    CHECK_THAT(graph_f1(gt, subset), WithinAbs(1.0 / 3.0, 1e-12));
    CHECK(graph_f1(gt, gt) == 1.0);
    CHECK(graph_f1(EntityGraph{}, EntityGraph{}) == 1.0);
}

TEST_CASE("graph_f1 rejects dangling relations", "[metrics][graph]") {
    EntityGraph bad{{{"edema", "obs"}}, {{0, 3, "located_at"}}};
    CHECK_THROWS_AS(graph_f1(bad, bad), InvalidGraph);
}

TEST_CASE("extract_graph", "[metrics][graph]") {
    const auto& g = test::gazetteer();
    const auto gr = extract_graph("consolidation in the right base", g);
    REQUIRE(gr.entities.size() == 2);
    CHECK(gr.entities[0] == Entity{"consolidation", "obs"});
    CHECK(gr.entities[1] == Entity{"right base", "anat"});
    REQUIRE(gr.relations.size() == 1);
    CHECK(gr.relations[0] == Relation{0, 1, "located_at"});

    CHECK(extract_graph("", g) == EntityGraph{});
    const auto only = extract_graph("Cardiomegaly.", g);
    CHECK(only.entities.size() == 1);
    CHECK(only.relations.empty());
}

TEST_CASE("every metric is 1 on identical text", "[metrics][property]") {
    const auto& g = test::gazetteer();
    std::mt19937_64 rng(123);
    int checked = 0;
    while (checked < 50) {
        const auto t = test::random_text(rng, 25);
        const auto n = tokenize(t).size();
        if (n == 0) continue;
        ++checked;
        CHECK(bleu(t, t) == 1.0);
        CHECK(rouge_l(t, t) == 1.0);
        CHECK(chexpert_f1(t, t, g) == 1.0);
        CHECK(graph_f1(t, t, g) == 1.0);
        const double m = meteor(t, t);
        CHECK_THAT(m, WithinAbs(1.0 - 0.5 / std::pow(static_cast<double>(n), 3), 1e-12));
        if (n >= 10) CHECK(m >= 0.999);
    }
}

TEST_CASE("every metric stays in [0,1] under fuzzing", "[metrics][property]") {
    const auto& g = test::gazetteer();
    std::mt19937_64 rng(77);
    for (int i = 0; i < 5000; ++i) {
        const auto a = test::random_text(rng, 20), b = test::random_text(rng, 20);
        for (double v : {bleu(a, b), rouge_l(a, b), meteor(a, b), chexpert_f1(a, b, g), graph_f1(a, b, g)}) {
            REQUIRE(std::isfinite(v));
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}
