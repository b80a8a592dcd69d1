// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#include <catch_amalgamated.hpp>

#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

using namespace medmeta;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MEDMETA_CLI;

std::string cli(const std::string& args) { return test::quote(kCli) + " " + args; }

/// Run a shell command with stdout captured into `out`.
int capture(const std::string& cmd, std::string& out) {
    const auto file = test::scratch_dir("capture") / "stdout.txt";
    const int st = std::system((cmd + " >" + test::quote(file.string()) + " 2>/dev/null").c_str());
    out = detail::read_file(file);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) { return detail::read_file(p); }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

const fs::path& full_dataset() {
    static const fs::path dir = [] {
        const auto d = test::scratch_dir("cli_full");
        REQUIRE(test::run(cli("perturb --full-dataset --seed 42 --out-dir " + test::quote(d.string()))) == 0);
        return d;
    }();
    return dir;
}

std::string q(const fs::path& p) { return test::quote(p.string()); }

} // namespace

TEST_CASE("perturb writes identical outputs across runs", "[cli]") {
    const auto a = full_dataset();
    const auto b = test::scratch_dir("cli_full_again");
    REQUIRE(test::run(cli("perturb --full-dataset --seed 42 --out-dir " + q(b))) == 0);
    for (const char* f : {"pairs.jsonl", "pairs.provenance.jsonl"})
        CHECK(slurp(a / f) == slurp(b / f));
    CHECK(load_pairs(a / "pairs.jsonl").size() == 400);
    CHECK(validate_composition(load_pairs(a / "pairs.jsonl")).empty());
    const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(m.at("seed") == 42);
    CHECK(m.at("run_id") == nlohmann::json::parse(slurp(b / "manifest.json")).at("run_id"));
}

TEST_CASE("perturb a single cell", "[cli]") {
    const auto d = test::scratch_dir("cli_cell");
    REQUIRE(test::run(cli("perturb --seed 1 --aspect negation --significance significant --count 4 --out-dir " +
                          q(d))) == 0);
    const auto pairs = load_pairs(d / "pairs.jsonl");
    CHECK(pairs.size() == 4);
    for (const auto& p : pairs.pairs) {
        CHECK(p.aspect == Aspect::Negation);
        CHECK(p.significance == Significance::Significant);
    }
    // High-impact aspects need an error type.
    CHECK(test::run(cli("perturb --seed 1 --aspect location --significance significant --out-dir " + q(d))) == 2);
}

TEST_CASE("perturb severity fixtures", "[cli]") {
    const auto d = test::scratch_dir("cli_sev");
    REQUIRE(test::run(cli("perturb --seed 3 --severity " + q(test::data_dir() / "severity_reports.jsonl") +
                          " --out-dir " + q(d))) == 0);
    CHECK(load_severity_fixtures(d / "severity.jsonl").size() == 4);
}

TEST_CASE("score pairs that differ only in whitespace", "[cli]") {
    const auto d = test::scratch_dir("cli_score");
    PairDataset ds;
    for (int i = 0; i < 3; ++i) {
        ReportPair p;
        p.pair_id = "p" + std::to_string(i);
        p.gt = {"r" + std::to_string(i), "Moderate left pleural effusion. No pneumothorax.",
                ReportSource::Synthetic};
        // Pairs must differ, so the ME copy only gains trailing whitespace.
        p.me = p.gt;
        p.me.text += " ";
        ds.pairs.push_back(p);
    }
    test::write_text(d / "pairs.jsonl", serialize_pairs(ds));
    REQUIRE(test::run(cli("score --pairs " + q(d / "pairs.jsonl") +
                          " --metrics bleu,rouge_l,chexpert_f1 --out-dir " + q(d / "out"))) == 0);
    const auto rows = csv_rows(slurp(d / "out" / "scores.csv"));
    REQUIRE(rows.size() == 1 + 9);
    CHECK(rows[0] == std::vector<std::string>{"pair_id", "metric_id", "value"});
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][2] == "1");
    CHECK(rows[1][0] == "p0");
    CHECK(rows[1][1] == "bleu");
}

TEST_CASE("metaeval tables", "[cli]") {
    const auto d = test::scratch_dir("cli_meta");
    std::string out;
    REQUIRE(capture(cli("metaeval --pairs " + q(full_dataset() / "pairs.jsonl") +
                        " --metrics oracle,constant,bleu --seed 5 --bootstrap 200 --out-dir " + q(d)),
                    out) == 0);
    CHECK(out.find("constant: zero discrimination-robustness gap") != std::string::npos);
    CHECK(out.find("oracle:") == std::string::npos);

    const auto disc = csv_rows(slurp(d / "discriminative.csv"));
    const auto rob = csv_rows(slurp(d / "robustness.csv"));
    REQUIRE(disc.size() == 4);
    REQUIRE(rob.size() == 4);
    CHECK(disc[0][0] == "metric_id");
    CHECK(disc[0][1] == "location/omission");
    CHECK(disc[0].back() == "ci_high");
    CHECK(disc[1][0] == "oracle");
    for (std::size_t i = 1; i < disc[1].size(); ++i) CHECK(disc[1][i] == "0.00");
    for (std::size_t i = 1; i < rob[1].size(); ++i) CHECK(rob[1][i] == "100.00");
    for (std::size_t i = 1; i < disc[2].size(); ++i) CHECK(disc[2][i] == "50.00");
    for (const char* f : {"scores.csv", "metaeval.json", "summary.md", "manifest.json"})
        CHECK(fs::exists(d / f));
    CHECK(slurp(d / "summary.md").find("zero gap") != std::string::npos);

    const auto d2 = test::scratch_dir("cli_meta_two");
    REQUIRE(test::run(cli("metaeval --pairs " + q(full_dataset() / "pairs.jsonl") +
                          " --metrics bleu,rouge_l --seed 5 --bootstrap 100 --out-dir " + q(d2))) == 0);
    CHECK(csv_rows(slurp(d2 / "discriminative.csv")).size() == 3);
}

TEST_CASE("monotonicity through an external adapter", "[cli][adapters]") {
    const auto d = test::scratch_dir("cli_mono");
    SeverityFixture f;
    f.report_id = "f1";
    f.gt = {"f1", "Mild cardiomegaly.", ReportSource::Synthetic};
    for (int g = 0; g < kSeverityGroups; ++g)
        f.variants[static_cast<std::size_t>(g)] = {"f1:g" + std::to_string(g), "v" + std::to_string(g),
                                                   ReportSource::Synthetic};
    test::write_text(d / "fixtures.jsonl", serialize_severity_fixtures({f}));
    test::write_text(d / "table.json", R"({"v0":0.95,"v1":0.90,"v2":0.92,"v3":0.80,"v4":0.85})");
    nlohmann::json cfg;
    cfg["metrics"] = {{{"id", "scripted"},
                       {"command", {MEDMETA_MOCK_ADAPTER, "lookup", "--table", (d / "table.json").string()}},
                       {"range", {0, 1}}}};
    test::write_text(d / "metrics.json", cfg.dump());
    REQUIRE(test::run(cli("metaeval --pairs " + q(full_dataset() / "pairs.jsonl") + " --metrics scripted" +
                          " --metrics-config " + q(d / "metrics.json") + " --severity-fixtures " +
                          q(d / "fixtures.jsonl") + " --seed 1 --bootstrap 50 --out-dir " + q(d / "out"))) == 0);
    const auto m = nlohmann::json::parse(slurp(d / "out" / "monotonicity.json"));
    const auto& v = m.at("metrics").at(0).at("violations");
    REQUIRE(v.size() == 2);
    CHECK(v[0].at("from") == 1);
    CHECK(v[0].at("to") == 2);
    CHECK(v[1].at("from") == 3);
    CHECK(v[1].at("to") == 4);
    CHECK(m.at("metrics").at(0).at("monotonic") == false);
}

TEST_CASE("agreement command", "[cli]") {
    const auto d = test::scratch_dir("cli_agree");
    std::string dup(kAnnotationHeader);
    dup += "\n";
    for (const char* ann : {"x", "y"})
        for (int i = 1; i <= 3; ++i)
            dup += "i" + std::to_string(i) + ",bleu," + ann + ",a," + std::to_string(i) + "," +
                   std::to_string(4 - i) + "\n";
    test::write_text(d / "dup.csv", dup);
    REQUIRE(test::run(cli("agreement --annotations " + q(d / "dup.csv") + " --out-dir " + q(d / "dup"))) == 0);
    const auto rows = csv_rows(slurp(d / "dup" / "agreement.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].size() == 13);
    CHECK(rows[0][1] == "cat1_significant");
    CHECK(rows[1][0] == "bleu");
    CHECK(rows[1][1] == "1");
    CHECK(rows[1][2] == "1");
    CHECK(rows[1][3].empty());

    std::string single(kAnnotationHeader);
    single += "\ni1,bleu,x,a,1,2\ni2,bleu,x,a,3,4\n";
    test::write_text(d / "single.csv", single);
    REQUIRE(test::run(cli("agreement --annotations " + q(d / "single.csv") + " --out-dir " + q(d / "single"))) == 0);
    const auto srows = csv_rows(slurp(d / "single" / "agreement.csv"));
    REQUIRE(srows.size() == 2);
    for (std::size_t i = 1; i < srows[1].size(); ++i) CHECK(srows[1][i].empty());
}

TEST_CASE("replay reproduces a run", "[cli]") {
    const auto d = test::scratch_dir("cli_replay");
    REQUIRE(test::run(cli("metaeval --pairs " + q(full_dataset() / "pairs.jsonl") +
                          " --metrics bleu,chexpert_f1 --seed 9 --bootstrap 100 --out-dir " + q(d / "a"))) == 0);
    std::string out;
    REQUIRE(capture(cli("replay --manifest " + q(d / "a" / "manifest.json") + " --out-dir " + q(d / "b")), out) == 0);
    CHECK(out.find("0 different") != std::string::npos);
    CHECK(slurp(d / "a" / "discriminative.csv") == slurp(d / "b" / "discriminative.csv"));
}

TEST_CASE("exit codes", "[cli]") {
    const auto d = test::scratch_dir("cli_exit");
    const auto pairs = q(full_dataset() / "pairs.jsonl");
    CHECK(test::run(cli("--help")) == 0);
    CHECK(test::run(cli("score --pairs " + pairs + " --metrics nope --out-dir " + q(d))) == 2);
    CHECK(test::run(cli("frobnicate")) == 2);
    CHECK(test::run(cli("metaeval --pairs " + pairs + " --metrics bleu --out-dir " + q(d))) == 2);

    test::write_text(d / "bad.csv", "item_id,retrieval_metric\n");
    CHECK(test::run(cli("agreement --annotations " + q(d / "bad.csv") + " --out-dir " + q(d))) == 2);

    test::write_text(d / "tiny.jsonl", R"({"id":"t1","text":"Hello world.","source":"synthetic"})" "\n");
    CHECK(test::run(cli("perturb --input " + q(d / "tiny.jsonl") + " --full-dataset --seed 1 --out-dir " +
                        q(d / "tiny"))) == 2);

    nlohmann::json cfg;
    cfg["metrics"] = {{{"id", "broken"}, {"command", {MEDMETA_MOCK_ADAPTER, "garbage"}}, {"range", {0, 1}}}};
    test::write_text(d / "metrics.json", cfg.dump());
    CHECK(test::run(cli("score --pairs " + pairs + " --metrics broken --metrics-config " +
                        q(d / "metrics.json") + " --out-dir " + q(d / "broken"))) == 3);
}

TEST_CASE("gazetteer override from the environment", "[cli]") {
    const auto d = test::scratch_dir("cli_gaz");
    fs::copy_file(test::data_dir() / "gazetteer.json", d / "gaz.json", fs::copy_options::overwrite_existing);
    const auto pairs = q(full_dataset() / "pairs.jsonl");
    REQUIRE(test::run("MEDMETA_GAZETTEER=" + q(d / "gaz.json") + " " +
                      cli("score --pairs " + pairs + " --metrics chexpert_f1 --out-dir " + q(d / "ok"))) == 0);
    const auto m = nlohmann::json::parse(slurp(d / "ok" / "manifest.json"));
    bool seen = false;
    for (const auto& in : m.at("inputs"))
        if (in.at("path").get<std::string>().find("gaz.json") != std::string::npos) seen = true;
    CHECK(seen);
    CHECK(test::run("MEDMETA_GAZETTEER=" + q(d / "missing.json") + " " +
                    cli("score --pairs " + pairs + " --metrics chexpert_f1 --out-dir " + q(d / "bad"))) != 0);
}
