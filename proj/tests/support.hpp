// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "medmeta/medmeta.hpp"

namespace medmeta::test {

namespace fs = std::filesystem;

inline fs::path data_dir() { return MEDMETA_TEST_DATA_DIR; }

inline const Gazetteer& gazetteer() {
    static const Gazetteer g = Gazetteer::load(data_dir() / "gazetteer.json");
    return g;
}

inline const Perturber& perturber() {
    static const Perturber p(RuleBook::load_dir(data_dir() / "rules", gazetteer()), gazetteer());
    return p;
}

inline const std::vector<Report>& corpus() {
    static const auto r = load_reports(data_dir() / "reports.jsonl");
    return r;
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("medmeta_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline void write_text(const fs::path& p, const std::string& s) { write_file_atomic(p, s); }

/// Random token sequence over a small vocabulary so overlaps are common.
inline TokenSeq random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab = 6) {
    std::uniform_int_distribution<std::size_t> len(0, max_len), word(0, vocab - 1);
    std::vector<std::string> t;
    for (std::size_t i = len(rng); i > 0; --i) t.push_back("w" + std::to_string(word(rng)));
    return TokenSeq(std::move(t));
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
    static const std::vector<std::string> words = {
        "the",  "left", "right", "lung",   "effusion", "no",   "pneumothorax", "mild",
        "is",   "seen", "mass",  "3-cm",   "4.5",      "cm",   "edema",        "clear",
        "lungs","are",  ".",     ",",      "possible", "severe","cardiomegaly", "opacity"};
    std::uniform_int_distribution<std::size_t> len(0, max_words), word(0, words.size() - 1);
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) {
        if (!s.empty()) s += ' ';
        s += words[word(rng)];
    }
    return s;
}

/// Run a shell command, returning its exit status.
inline int run(const std::string& cmd) {
    const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

inline std::string quote(const std::string& s) { return "'" + s + "'"; }

} // namespace medmeta::test
