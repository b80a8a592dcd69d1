// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#include <catch_amalgamated.hpp>

#include <random>

#include "support.hpp"

using namespace medmeta;

namespace {

std::string pair_line(const std::string& id, const std::string& aspect = "location",
                      const std::string& gt = "Left effusion.", const std::string& me = "Right effusion.") {
    nlohmann::ordered_json j;
    j["pair_id"] = id;
    j["aspect"] = aspect;
    j["error_type"] = "inaccuracy";
    j["significance"] = "significant";
    j["gt_text"] = gt;
    j["me_text"] = me;
    j["explanation"] = "";
    j["source"] = "synthetic";
    return j.dump() + "\n";
}

ReportPair make_pair(const std::string& id, Aspect a, ErrorType e, Significance s) {
    ReportPair p;
    p.pair_id = id;
    p.gt = {id + ":gt", "GT text for " + id, ReportSource::Synthetic};
    p.me = {id + ":me", "ME text for " + id, ReportSource::Synthetic};
    p.aspect = a;
    p.error_type = e;
    p.significance = s;
    p.explanation = "edit \"" + id + "\"";
    return p;
}

// Built directly from the quota definition, independent of the generator.
PairDataset conforming() {
    PairDataset d;
    int n = 0;
    for (auto a : kAllAspects)
        for (auto s : kAllSignificances) {
            if (is_high_impact(a)) {
                for (auto e : kAllErrorTypes)
                    for (int i = 0; i < 10; ++i) d.pairs.push_back(make_pair("p" + std::to_string(n++), a, e, s));
            } else {
                for (int i = 0; i < 10; ++i)
                    d.pairs.push_back(make_pair("p" + std::to_string(n++), a, kAllErrorTypes[i % 3], s));
            }
        }
    return d;
}

} // namespace

TEST_CASE("aspect groups", "[corpus]") {
    CHECK(kAllAspects.size() == 12);
    CHECK(kClinicalAspects.size() == 10);
    CHECK(kRobustnessAspects.size() == 2);
    for (std::size_t i = 0; i < 10; ++i) CHECK(is_clinical(kAllAspects[i]));
    CHECK_FALSE(is_clinical(Aspect::Noise));
    CHECK_FALSE(is_clinical(Aspect::StylisticVariation));
    for (auto a : kAllAspects) CHECK(parse_aspect(to_string(a)) == a);
}

TEST_CASE("load_pairs reads records in order", "[corpus]") {
    auto d = parse_pairs(pair_line("x1"));
    REQUIRE(d.size() == 1);
    CHECK(d.pairs[0].pair_id == "x1");
    CHECK(d.pairs[0].aspect == Aspect::Location);
    CHECK(d.pairs[0].gt.text == "Left effusion.");
    CHECK(parse_pairs("").empty());
}

TEST_CASE("load_pairs rejects bad records with the line number", "[corpus]") {
    try {
        parse_pairs(pair_line("x1", "Teleportation"));
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        CHECK(e.line() == 1);
    }
    try {
        parse_pairs(pair_line("x1") + "{not json}\n");
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_pairs(pair_line("x1") + pair_line("x1")), DuplicateId);
    CHECK_THROWS_AS(parse_pairs(pair_line("x1", "location", "Same.", "Same.")), MalformedRecord);
    CHECK_THROWS_AS(parse_pairs(pair_line("x1", "location", "  ", "x")), MalformedRecord);
    CHECK_THROWS_AS(parse_pairs(R"({"pair_id":"a"})" "\n"), MalformedRecord);
    CHECK_THROWS_AS(load_pairs(test::data_dir() / "no_such_file.jsonl"), IoError);
}

TEST_CASE("save then load is the identity", "[corpus][property]") {
    auto d = conforming();
    d.pairs[3].gt.text = "Quotes \" and unicode \xC3\xA9 and\nnewline";
    d.pairs[4].gt.source = d.pairs[4].me.source = ReportSource::External;
    const auto text = serialize_pairs(d);
    const auto back = parse_pairs(text);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.pairs[i].pair_id == d.pairs[i].pair_id);
        CHECK(back.pairs[i].aspect == d.pairs[i].aspect);
        CHECK(back.pairs[i].error_type == d.pairs[i].error_type);
        CHECK(back.pairs[i].significance == d.pairs[i].significance);
        CHECK(back.pairs[i].gt.text == d.pairs[i].gt.text);
        CHECK(back.pairs[i].me.text == d.pairs[i].me.text);
        CHECK(back.pairs[i].gt.source == d.pairs[i].gt.source);
        CHECK(back.pairs[i].explanation == d.pairs[i].explanation);
    }
    CHECK(serialize_pairs(back) == text);

    const auto dir = test::scratch_dir("corpus_roundtrip");
    save_pairs(dir / "pairs.jsonl", d);
    CHECK(serialize_pairs(load_pairs(dir / "pairs.jsonl")) == text);
}

TEST_CASE("pairs.jsonl keys come in a fixed order", "[corpus]") {
    const auto line = serialize_pairs(parse_pairs(pair_line("k")));
    CHECK(line.rfind(R"({"pair_id":"k","aspect":"location","error_type":"inaccuracy",)"
                     R"("significance":"significant","gt_text":)", 0) == 0);
}

TEST_CASE("validate_composition", "[corpus]") {
    CHECK(validate_composition(conforming()).empty());

    const auto empty = validate_composition(PairDataset{});
    CHECK(empty.size() == 12);
    for (const auto& v : empty) CHECK(v.found == 0);

    auto d = conforming();
    auto it = std::find_if(d.pairs.begin(), d.pairs.end(), [](const ReportPair& p) {
        return p.aspect == Aspect::Noise && p.significance == Significance::Insignificant;
    });
    d.pairs.erase(it);
    const auto v = validate_composition(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].aspect == Aspect::Noise);
    CHECK_FALSE(v[0].error_type);
    CHECK(v[0].significance == Significance::Insignificant);
    CHECK(v[0].expected == 10);
    CHECK(v[0].found == 9);

    // High-impact aspects are checked per error type.
    auto e = conforming();
    for (auto& p : e.pairs)
        if (p.aspect == Aspect::Severity && p.error_type == ErrorType::Omission &&
            p.significance == Significance::Significant) {
            p.error_type = ErrorType::Fabrication;
            break;
        }
    CHECK(validate_composition(e).size() == 2);
}

TEST_CASE("validate_composition is permutation-invariant", "[corpus][property]") {
    auto d = conforming();
    d.pairs.pop_back();
    const auto base = validate_composition(d);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(d.pairs.begin(), d.pairs.end(), rng);
        CHECK(validate_composition(d) == base);
    }
}

TEST_CASE("severity fixtures", "[corpus]") {
    const std::string ok =
        R"({"report_id":"s1","gt_text":"G","variants":{"0":"a","1":"b","2":"c","3":"d","4":"e"}})"
        "\n";
    auto f = parse_severity_fixtures(ok + R"({"report_id":"s2","gt_text":"G","variants":{"0":"a","1":"b","2":"c","3":"d","4":"e"}})" "\n");
    REQUIRE(f.size() == 2);
    CHECK(f[0].variants[4].text == "e");
    CHECK(f[1].variants[0].id == "s2:g0");
    CHECK(serialize_severity_fixtures(f) == ok + R"({"report_id":"s2","gt_text":"G","variants":{"0":"a","1":"b","2":"c","3":"d","4":"e"}})" "\n");

    try {
        parse_severity_fixtures(R"({"report_id":"s9","gt_text":"G","variants":{"0":"a","1":"b","2":"c","3":"d"}})");
        FAIL("expected MissingGroup");
    } catch (const MissingGroup& e) {
        CHECK(e.report_id() == "s9");
        CHECK(e.group() == 4);
    }
    CHECK_THROWS_AS(parse_severity_fixtures(R"({"report_id":"s","gt_text":"G","variants":{"0":"G","1":"b","2":"c","3":"d","4":"e"}})"),
                    MalformedRecord);
    CHECK_THROWS_AS(parse_severity_fixtures(ok + ok), DuplicateId);
}

TEST_CASE("annotations", "[corpus]") {
    std::string csv(kAnnotationHeader);
    csv += "\n";
    for (int a = 1; a <= 6; ++a)
        for (auto c : kAllCategories)
            csv += "set1,bleu,r" + std::to_string(a) + "," + std::string(to_string(c)) + ",1,2\n";
    const auto rs = parse_annotations(csv);
    CHECK(rs.size() == 36);
    CHECK(serialize_annotations(rs) == csv);
    CHECK(rs[0].count(Significance::Insignificant) == 2);

    const std::string h = std::string(kAnnotationHeader) + "\n";
    CHECK_THROWS_AS(parse_annotations("item,x\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_annotations(h + "i,m,a,g,1,2\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_annotations(h + "i,m,a,a,-1,2\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_annotations(h + "i,m,a,a,1.5,2\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_annotations(h + "i,m,a,a,1\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_annotations(h + "i,m,a,a,1,2\ni,m,a,1,3,4\n"), DuplicateId);
    CHECK_THROWS_AS(parse_annotations(""), MalformedRecord);
    CHECK(parse_annotations(h + "\"i,1\",m,a,b,0,0\n")[0].item_id == "i,1");
}

TEST_CASE("reports", "[corpus]") {
    const auto& rs = test::corpus();
    CHECK(rs.size() >= 30);
    CHECK(parse_reports(serialize_reports(rs)) == rs);
    CHECK_THROWS_AS(parse_reports(R"({"id":"a","text":" ","source":"synthetic"})"), MalformedRecord);
    CHECK_THROWS_AS(parse_reports(R"({"id":"a","text":"x","source":"synthetic"})" "\n"
                                  R"({"id":"a","text":"y","source":"synthetic"})"),
                    DuplicateId);
}
