// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "../support.hpp"

using namespace medmeta;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Collects the first failure of a criterion.
struct Probe {
    std::string failure;
    void expect(bool ok, const std::string& what) {
        if (!ok && failure.empty()) failure = what;
    }
    void near(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol) && failure.empty()) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s: got %.12g, want %.12g", what.c_str(), got, want);
            failure = buf;
        }
    }
};

std::string q(const fs::path& p) { return test::quote(p.string()); }
std::string cli(const std::string& args) { return test::quote(MEDMETA_CLI) + " " + args; }

int capture(const std::string& cmd, const fs::path& out) {
    const int st = std::system((cmd + " >" + q(out) + " 2>/dev/null").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

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

const std::vector<std::string>* row_for(const std::vector<std::vector<std::string>>& rows,
                                        const std::string& id) {
    for (const auto& r : rows)
        if (!r.empty() && r[0] == id) return &r;
    return nullptr;
}

bool is_subsequence(const std::vector<std::string>& sub, const TokenSeq& seq) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i)
        if (seq[i] == sub[j]) ++j;
    return j == sub.size();
}

std::size_t brute_lcs(const TokenSeq& a, const TokenSeq& b) {
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
        const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
        if (bits <= best) continue;
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (mask & (1u << i)) sub.push_back(s[i]);
        if (is_subsequence(sub, t)) best = bits;
    }
    return best;
}

const std::vector<PerturbationOutcome>& generated() {
    static const auto d = test::perturber().generate_dataset(test::corpus(), 42);
    return d;
}

std::vector<PairInput> inputs_of(const std::vector<PerturbationOutcome>& d) {
    std::vector<PairInput> in;
    for (const auto& o : d)
        in.push_back({o.pair.pair_id, o.pair.gt.text, o.pair.me.text, o.pair.significance});
    return in;
}

// ---------------------------------------------------------------------------

void metric_oracles(Probe& p) {
    const auto start = Clock::now();
    p.near(bleu("the cat is on the mat", "the cat sat on the mat"), std::pow(288.0, -0.25), 1e-9, "bleu fixture");
    p.near(rouge_l("the cat on the mat", "the cat sat"), 0.5, 1e-9, "rouge_l fixture");
    p.near(meteor("the heart size is normal and lungs are clear today",
                  "the heart size is normal and lungs are clear today"),
           0.9995, 1e-9, "meteor fixture");
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const auto a = test::random_tokens(rng, 12), b = test::random_tokens(rng, 12);
        if (lcs_length(a, b) != brute_lcs(a, b)) {
            p.expect(false, "lcs_length disagrees with brute force on pair " + std::to_string(i));
            break;
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    p.expect(secs < 10.0, "took " + std::to_string(secs) + " s");
}

void identity_suite(Probe& p) {
    const auto& g = test::gazetteer();
    std::mt19937_64 rng(99);
    for (int checked = 0; checked < 50;) {
        const auto t = test::random_text(rng, 25);
        const auto n = tokenize(t).size();
        if (n == 0) continue;
        ++checked;
        p.expect(bleu(t, t) == 1.0 && rouge_l(t, t) == 1.0 && chexpert_f1(t, t, g) == 1.0 &&
                     graph_f1(t, t, g) == 1.0,
                 "identity below 1 for: " + t);
        if (n >= 10) p.expect(meteor(t, t) >= 0.999, "meteor identity below 0.999 for: " + t);
    }
    for (int i = 0; i < 5000; ++i) {
        const auto a = test::random_text(rng, 20), b = test::random_text(rng, 20);
        for (double v : {bleu(a, b), rouge_l(a, b), meteor(a, b), chexpert_f1(a, b, g), graph_f1(a, b, g)})
            p.expect(std::isfinite(v) && v >= 0.0 && v <= 1.0, "score outside [0,1] for: " + a + " | " + b);
    }
}

void framework_soundness(Probe& p, const fs::path& work) {
    const auto start = Clock::now();
    const auto data = work / "sound_data";
    const auto out = work / "sound_out";
    p.expect(test::run(cli("perturb --full-dataset --seed 42 --out-dir " + q(data))) == 0, "perturb failed");
    p.expect(capture(cli("metaeval --pairs " + q(data / "pairs.jsonl") +
                         " --metrics oracle,constant --seed 1 --out-dir " + q(out)),
                     work / "sound_stdout.txt") == 0,
             "metaeval failed");
    if (!p.failure.empty()) return;
    const auto disc = csv_rows(detail::read_file(out / "discriminative.csv"));
    const auto rob = csv_rows(detail::read_file(out / "robustness.csv"));
    const auto check_row = [&](const auto& rows, const std::string& id, const std::string& want,
                               const std::string& table) {
        const auto* r = row_for(rows, id);
        p.expect(r != nullptr, id + " missing from " + table);
        if (!r) return;
        std::size_t populated = 0;
        for (std::size_t i = 1; i < r->size(); ++i) {
            if ((*r)[i].empty()) continue;
            ++populated;
            p.expect((*r)[i] == want, id + " " + table + " column " + rows[0][i] + " is " + (*r)[i]);
        }
        p.expect(populated == rows[0].size() - 1, id + " " + table + " has unpopulated cells");
    };
    check_row(disc, "oracle", "0.00", "discriminative");
    check_row(rob, "oracle", "100.00", "robustness");
    check_row(disc, "constant", "50.00", "discriminative");
    check_row(rob, "constant", "50.00", "robustness");
    const auto stdout_text = detail::read_file(work / "sound_stdout.txt");
    p.expect(stdout_text.find("constant: zero discrimination-robustness gap") != std::string::npos,
             "constant metric not flagged");
    p.expect(stdout_text.find("oracle:") == std::string::npos, "oracle flagged as zero gap");
    const auto report = nlohmann::json::parse(detail::read_file(out / "metaeval.json"));
    for (const auto& m : report.at("metrics"))
        p.expect(m.at("zero_gap").get<bool>() == (m.at("metric_id") == "constant"), "zero_gap field wrong");
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    p.expect(secs < 30.0, "took " + std::to_string(secs) + " s");
}

void composition(Probe& p, const fs::path& work) {
    const auto a = work / "comp_a", b = work / "comp_b";
    p.expect(test::run(cli("perturb --full-dataset --seed 42 --out-dir " + q(a))) == 0, "first run failed");
    p.expect(test::run(cli("perturb --full-dataset --seed 42 --out-dir " + q(b))) == 0, "second run failed");
    if (!p.failure.empty()) return;
    const auto d = load_pairs(a / "pairs.jsonl");
    p.expect(d.size() == 400, "dataset has " + std::to_string(d.size()) + " pairs");
    const auto v = validate_composition(d);
    p.expect(v.empty(), v.empty() ? "" : v.front().describe());
    for (const char* f : {"pairs.jsonl", "pairs.provenance.jsonl"})
        p.expect(detail::read_file(a / f) == detail::read_file(b / f), std::string(f) + " differs between runs");
}

void perturbation_guards(Probe& p) {
    const auto& g = test::gazetteer();
    for (const auto& o : generated()) {
        const auto& pr = o.pair;
        const bool same = label_report(pr.gt.text, g) == label_report(pr.me.text, g);
        if (pr.significance == Significance::Insignificant &&
            (pr.aspect == Aspect::Noise || pr.aspect == Aspect::StylisticVariation))
            p.expect(same, pr.pair_id + " changes labels");
        if (pr.significance == Significance::Significant && pr.aspect == Aspect::Negation)
            p.expect(!same, pr.pair_id + " keeps labels");
        if (pr.error_type == ErrorType::Inaccuracy) {
            const auto& gt = pr.gt.text;
            const auto& me = pr.me.text;
            const auto b = o.edited_span.begin, e = o.edited_span.end;
            const auto tail = gt.size() - e;
            const bool confined = e <= gt.size() && me.size() >= b + tail && gt.compare(0, b, me, 0, b) == 0 &&
                                  gt.compare(e, tail, me, me.size() - tail, tail) == 0;
            p.expect(confined, pr.pair_id + " edits outside its span");
        }
    }
}

void monotonicity_semantics(Probe& p) {
    const auto prof = monotonicity_from_means("m", {0.95, 0.90, 0.92, 0.80, 0.85});
    std::vector<std::pair<int, int>> got;
    for (const auto& v : prof.violations) got.emplace_back(v.from_group, v.to_group);
    p.expect(got == std::vector<std::pair<int, int>>{{1, 2}, {3, 4}}, "wrong violations");
    p.expect(monotonicity_from_means("m", {0.9, 0.8, 0.7, 0.6, 0.5}).violations.empty(),
             "violations on decreasing input");
}

void directional_sanity(Probe& p) {
    const auto& g = test::gazetteer();
    const auto& d = generated();
    const auto ds = to_dataset(d);
    const auto in = inputs_of(d);
    const CellFilter cell{Aspect::StylisticVariation, std::nullopt};
    const BootstrapOptions bo{1000, 0.95, 1};
    const double b = robustness_score(score_native("bleu", in, &g).scores, ds, cell, bo).mean;
    const double c = robustness_score(score_native("chexpert_f1", in, &g).scores, ds, cell, bo).mean;
    char buf[128];
    std::snprintf(buf, sizeof buf, "bleu %.2f vs chexpert_f1 %.2f", 100 * b, 100 * c);
    p.expect(b < c, buf);
}

void agreement_engine(Probe& p) {
    using C = AnnotationCategory;
    std::vector<AnnotationRecord> rs;
    auto add = [&](const std::string& ann, C cat, std::vector<long> sig, std::vector<long> insig) {
        for (std::size_t i = 0; i < sig.size(); ++i)
            rs.push_back({"i" + std::to_string(i + 1), "bleu", ann, cat, sig[i], insig[i]});
    };
    add("A1", C::A, {1, 2, 3, 4}, {0, 1, 0, 1});
    add("A2", C::A, {2, 4, 6, 8}, {1, 0, 1, 0});
    add("A3", C::A, {1, 3, 2, 4}, {0, 1, 1, 0});
    add("A1", C::C, {1, 2, 3, 4}, {0, 0, 0, 0});
    add("A2", C::C, {1, 2, 3, 5}, {0, 0, 0, 0});
    add("A3", C::C, {3, 2, 1}, {0, 0, 0});
    const auto m = agreement_matrix(rs).at(0);
    const auto value = [&](C c, Significance s) { return m.at(c, s).value.value_or(NAN); };
    p.near(value(C::A, Significance::Significant), 2.6 / 3.0, 1e-9, "cat a significant");
    p.near(value(C::A, Significance::Insignificant), -1.0 / 3.0, 1e-9, "cat a insignificant");
    p.near(value(C::C, Significance::Significant), (6.5 / std::sqrt(43.75) - 2.0) / 3.0, 1e-9, "cat c significant");
    p.expect(!m.at(C::C, Significance::Insignificant).value, "constant cell should be undefined");

    std::vector<AnnotationRecord> dup;
    for (const char* ann : {"x", "y"})
        for (long i = 1; i <= 4; ++i) dup.push_back({"i" + std::to_string(i), "bleu", ann, C::B, i, 5 - i});
    const auto dm = agreement_matrix(dup).at(0);
    p.near(dm.at(C::B, Significance::Significant).value.value_or(NAN), 1.0, 1e-9, "duplicate significant");
    p.near(dm.at(C::B, Significance::Insignificant).value.value_or(NAN), 1.0, 1e-9, "duplicate insignificant");
}

void statistics(Probe& p) {
    p.near(pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12, "pearson perfect");
    p.near(pearson({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12, "pearson reversed");
    p.near(pearson({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12, "pearson 0.8");
    const auto c = bootstrap_ci(std::vector<double>(10, 0.5), 1000, 0.95, 3);
    p.expect(c.lo == 0.5 && c.hi == 0.5, "constant vector interval has width");
    const auto g = bootstrap_ci({0.2, 0.9, 0.4, 0.55, 0.8, 0.1, 0.65}, 2000, 0.9, 7);
    p.near(g.lo, 0.3357142857142858, 1e-12, "pinned lower bound");
    p.near(g.hi, 0.6717857142857141, 1e-12, "pinned upper bound");
}

} // namespace

int main() {
    const auto work = test::scratch_dir("acceptance");
    const std::vector<std::pair<std::string, std::function<void(Probe&)>>> criteria = {
        {"metric-oracles", metric_oracles},
        {"identity-suite", identity_suite},
        {"framework-soundness", [&](Probe& p) { framework_soundness(p, work); }},
        {"composition-check", [&](Probe& p) { composition(p, work); }},
        {"perturbation-guards", perturbation_guards},
        {"monotonicity-semantics", monotonicity_semantics},
        {"directional-sanity", directional_sanity},
        {"agreement-engine", agreement_engine},
        {"statistics", statistics},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Probe p;
        const auto start = Clock::now();
        try {
            fn(p);
        } catch (const std::exception& e) {
            p.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (p.failure.empty()) {
            std::printf("PASS %s (%.2f s)\n", name.c_str(), secs);
        } else {
            std::printf("FAIL %s: %s\n", name.c_str(), p.failure.c_str());
            ++failed;
        }
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
