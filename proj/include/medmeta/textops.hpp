// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

// Text primitives shared by the native metrics: tokenization, Porter stemming,
// n-gram counting and longest common subsequence.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medmeta {

/// Ordered list of non-empty tokens.
class TokenSeq {
public:
    TokenSeq() = default;
    explicit TokenSeq(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        for (const auto& t : tokens_)
            if (t.empty()) throw std::invalid_argument("TokenSeq: empty token");
    }
    TokenSeq(std::initializer_list<std::string> tokens)
        : TokenSeq(std::vector<std::string>(tokens)) {}

    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }
    const std::string& operator[](std::size_t i) const { return tokens_[i]; }
    auto begin() const noexcept { return tokens_.begin(); }
    auto end() const noexcept { return tokens_.end(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    std::string join(std::string_view sep = " ") const {
        std::string out;
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (i) out += sep;
            out += tokens_[i];
        }
        return out;
    }

    friend bool operator==(const TokenSeq&, const TokenSeq&) = default;

private:
    std::vector<std::string> tokens_;
};

namespace detail {

inline bool is_ascii_digit(char c) noexcept { return c >= '0' && c <= '9'; }
inline bool is_ascii_alpha(char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

/// Length in bytes of the Unicode whitespace sequence starting at s[i], or 0.
inline std::size_t utf8_space_len(std::string_view s, std::size_t i) noexcept {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 == ' ' || (b0 >= 0x09 && b0 <= 0x0d)) return 1;
    if (b0 == 0xc2 && i + 1 < s.size()) {
        const auto b1 = static_cast<unsigned char>(s[i + 1]);
        if (b1 == 0x85 || b1 == 0xa0) return 2; // NEL, NBSP
    }
    if (b0 == 0xe1 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x9a &&
        static_cast<unsigned char>(s[i + 2]) == 0x80)
        return 3; // U+1680
    if (b0 == 0xe2 && i + 2 < s.size()) {
        const auto b1 = static_cast<unsigned char>(s[i + 1]);
        const auto b2 = static_cast<unsigned char>(s[i + 2]);
        if (b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8a) || b2 == 0xa8 || b2 == 0xa9 || b2 == 0xaf))
            return 3; // U+2000..200A, U+2028, U+2029, U+202F
        if (b1 == 0x81 && b2 == 0x9f) return 3; // U+205F
    }
    if (b0 == 0xe3 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x80)
        return 3; // U+3000
    return 0;
}

inline bool is_detached_punct(char c) noexcept {
    switch (c) {
    case '.': case ',': case ';': case ':': case '(': case ')': case '/':
        return true;
    default:
        return false;
    }
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// "3-cm", "4.5-mm": a number, a hyphen, then letters.
inline bool is_hyphenated_measurement(std::string_view w, std::size_t& hyphen) {
    std::size_t i = 0;
    bool digits = false;
    while (i < w.size() && is_ascii_digit(w[i])) { ++i; digits = true; }
    if (!digits) return false;
    if (i < w.size() && w[i] == '.') {
        std::size_t j = i + 1;
        bool frac = false;
        while (j < w.size() && is_ascii_digit(w[j])) { ++j; frac = true; }
        if (!frac) return false;
        i = j;
    }
    if (i >= w.size() || w[i] != '-' || i + 1 >= w.size()) return false;
    for (std::size_t j = i + 1; j < w.size(); ++j)
        if (!is_ascii_alpha(w[j])) return false;
    hyphen = i;
    return true;
}

inline void push_piece(std::vector<std::string>& out, std::string piece) {
    if (piece.empty()) return;
    std::size_t hyphen = 0;
    if (is_hyphenated_measurement(piece, hyphen)) {
        out.push_back(piece.substr(0, hyphen));
        out.push_back(piece.substr(hyphen + 1));
        return;
    }
    out.push_back(std::move(piece));
}

inline void split_word(std::string_view w, std::vector<std::string>& out) {
    std::string cur;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const char c = w[i];
        const bool decimal_point = c == '.' && i > 0 && i + 1 < w.size() &&
                                   is_ascii_digit(w[i - 1]) && is_ascii_digit(w[i + 1]);
        if (is_detached_punct(c) && !decimal_point) {
            push_piece(out, std::move(cur));
            cur.clear();
            out.emplace_back(1, c);
        } else {
            cur.push_back(c);
        }
    }
    push_piece(out, std::move(cur));
}

} // namespace detail

/// Lowercase, whitespace-split tokenization with `. , ; : ( ) /` detached.
/// Decimal points stay inside numbers ("4.5"); hyphenated measurements split
/// into number and unit ("3-cm" -> "3" "cm").
inline TokenSeq tokenize(std::string_view text) {
    std::vector<std::string> out;
    const std::string lower = detail::ascii_lower(text);
    std::string_view s = lower;
    std::size_t i = 0;
    while (i < s.size()) {
        if (auto n = detail::utf8_space_len(s, i)) {
            i += n;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && detail::utf8_space_len(s, j) == 0) ++j;
        detail::split_word(s.substr(i, j - i), out);
        i = j;
    }
    return TokenSeq(std::move(out));
}

namespace detail {

// Porter (1980) stemmer, following the reference C implementation.
class PorterStemmer {
public:
    explicit PorterStemmer(std::string word) : b_(std::move(word)) {}

    std::string run() {
        if (b_.size() <= 2) return b_;
        k_ = static_cast<int>(b_.size()) - 1;
        step1ab();
        if (k_ > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        return b_.substr(0, static_cast<std::size_t>(k_ + 1));
    }

private:
    std::string b_;
    int k_ = 0;
    int j_ = 0;

    bool cons(int i) const {
        switch (b_[static_cast<std::size_t>(i)]) {
        case 'a': case 'e': case 'i': case 'o': case 'u':
            return false;
        case 'y':
            return i == 0 ? true : !cons(i - 1);
        default:
            return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int m() const {
        int n = 0;
        int i = 0;
        for (;;) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        for (;;) {
            for (;;) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            for (;;) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_cons(int j) const {
        if (j < 1) return false;
        if (b_[static_cast<std::size_t>(j)] != b_[static_cast<std::size_t>(j - 1)]) return false;
        return cons(j);
    }

    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = b_[static_cast<std::size_t>(i)];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        const int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (std::string_view(b_).substr(static_cast<std::size_t>(k_ - len + 1), s.size()) != s)
            return false;
        j_ = k_ - len;
        return true;
    }

    void set_to(std::string_view s) {
        b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
        k_ = j_ + static_cast<int>(s.size());
    }

    void r(std::string_view s) {
        if (m() > 0) set_to(s);
    }

    char at(int i) const { return b_[static_cast<std::size_t>(i)]; }

    void step1ab() {
        if (at(k_) == 's') {
            if (ends("sses")) k_ -= 2;
            else if (ends("ies")) set_to("i");
            else if (at(k_ - 1) != 's') --k_;
        }
        if (ends("eed")) {
            if (m() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at")) set_to("ate");
            else if (ends("bl")) set_to("ble");
            else if (ends("iz")) set_to("ize");
            else if (double_cons(k_)) {
                --k_;
                const char ch = at(k_);
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else {
                j_ = k_;
                if (m() == 1 && cvc(k_)) set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
    }

    void step2() {
        if (k_ < 1) return;
        switch (at(k_ - 1)) {
        case 'a':
            if (ends("ational")) { r("ate"); break; }
            if (ends("tional")) { r("tion"); break; }
            break;
        case 'c':
            if (ends("enci")) { r("ence"); break; }
            if (ends("anci")) { r("ance"); break; }
            break;
        case 'e':
            if (ends("izer")) { r("ize"); break; }
            break;
        case 'l':
            if (ends("bli")) { r("ble"); break; }
            if (ends("alli")) { r("al"); break; }
            if (ends("entli")) { r("ent"); break; }
            if (ends("eli")) { r("e"); break; }
            if (ends("ousli")) { r("ous"); break; }
            break;
        case 'o':
            if (ends("ization")) { r("ize"); break; }
            if (ends("ation")) { r("ate"); break; }
            if (ends("ator")) { r("ate"); break; }
            break;
        case 's':
            if (ends("alism")) { r("al"); break; }
            if (ends("iveness")) { r("ive"); break; }
            if (ends("fulness")) { r("ful"); break; }
            if (ends("ousness")) { r("ous"); break; }
            break;
        case 't':
            if (ends("aliti")) { r("al"); break; }
            if (ends("iviti")) { r("ive"); break; }
            if (ends("biliti")) { r("ble"); break; }
            break;
        case 'g':
            if (ends("logi")) { r("log"); break; }
            break;
        default:
            break;
        }
    }

    void step3() {
        switch (at(k_)) {
        case 'e':
            if (ends("icate")) { r("ic"); break; }
            if (ends("ative")) { r(""); break; }
            if (ends("alize")) { r("al"); break; }
            break;
        case 'i':
            if (ends("iciti")) { r("ic"); break; }
            break;
        case 'l':
            if (ends("ical")) { r("ic"); break; }
            if (ends("ful")) { r(""); break; }
            break;
        case 's':
            if (ends("ness")) { r(""); break; }
            break;
        default:
            break;
        }
    }

    void step4() {
        if (k_ < 1) return;
        switch (at(k_ - 1)) {
        case 'a':
            if (ends("al")) break;
            return;
        case 'c':
            if (ends("ance")) break;
            if (ends("ence")) break;
            return;
        case 'e':
            if (ends("er")) break;
            return;
        case 'i':
            if (ends("ic")) break;
            return;
        case 'l':
            if (ends("able")) break;
            if (ends("ible")) break;
            return;
        case 'n':
            if (ends("ant")) break;
            if (ends("ement")) break;
            if (ends("ment")) break;
            if (ends("ent")) break;
            return;
        case 'o':
            if (ends("ion") && j_ >= 0 && (at(j_) == 's' || at(j_) == 't')) break;
            if (ends("ou")) break;
            return;
        case 's':
            if (ends("ism")) break;
            return;
        case 't':
            if (ends("ate")) break;
            if (ends("iti")) break;
            return;
        case 'u':
            if (ends("ous")) break;
            return;
        case 'v':
            if (ends("ive")) break;
            return;
        case 'z':
            if (ends("ize")) break;
            return;
        default:
            return;
        }
        if (m() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (at(k_) == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
        }
        if (at(k_) == 'l' && double_cons(k_)) {
            j_ = k_;
            if (m() > 1) --k_;
        }
    }
};

} // namespace detail

/// Porter stem of a lowercase ASCII word. Tokens containing anything other
/// than a-z (digits, hyphens, non-ASCII bytes) are returned unchanged.
inline std::string porter_stem(std::string_view token) {
    if (token.empty()) return {};
    for (char c : token)
        if (c < 'a' || c > 'z') return std::string(token);
    return detail::PorterStemmer(std::string(token)).run();
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

/// Contiguous n-token windows in order.
inline std::vector<std::vector<std::string>> ngram_windows(const TokenSeq& seq, std::size_t n) {
    if (n == 0) throw std::invalid_argument("ngrams: n must be >= 1");
    std::vector<std::vector<std::string>> out;
    if (seq.size() < n) return out;
    out.reserve(seq.size() - n + 1);
    for (std::size_t i = 0; i + n <= seq.size(); ++i)
        out.emplace_back(seq.tokens().begin() + static_cast<std::ptrdiff_t>(i),
                         seq.tokens().begin() + static_cast<std::ptrdiff_t>(i + n));
    return out;
}

/// Multiset of n-token windows; total multiplicity is max(0, len - n + 1).
inline NgramCounts ngrams(const TokenSeq& seq, std::size_t n) {
    NgramCounts counts;
    for (auto& w : ngram_windows(seq, n)) ++counts[std::move(w)];
    return counts;
}

/// Length of the longest common subsequence, O(|a|*|b|) time, O(min) memory.
inline std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const TokenSeq& lo = a.size() < b.size() ? a : b;
    const TokenSeq& hi = a.size() < b.size() ? b : a;
    std::vector<std::size_t> prev(lo.size() + 1, 0), cur(lo.size() + 1, 0);
    for (std::size_t i = 1; i <= hi.size(); ++i) {
        for (std::size_t j = 1; j <= lo.size(); ++j) {
            cur[j] = hi[i - 1] == lo[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[lo.size()];
}

/// Character span of one sentence inside a larger text, terminator included.
struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

/// Split free text into sentences at `.`, `!` or `?` followed by whitespace
/// or end of text. Decimal points never split. Leading/trailing whitespace
/// is excluded from every span.
inline std::vector<SentenceSpan> split_sentences(std::string_view text) {
    std::vector<SentenceSpan> out;
    std::size_t i = 0;
    auto skip_space = [&] {
        while (i < text.size()) {
            auto n = detail::utf8_space_len(text, i);
            if (!n) break;
            i += n;
        }
    };
    skip_space();
    while (i < text.size()) {
        const std::size_t begin = i;
        std::size_t last_non_space = i;
        while (i < text.size()) {
            const char c = text[i];
            if (auto n = detail::utf8_space_len(text, i)) {
                i += n;
                continue;
            }
            last_non_space = i;
            ++i;
            if ((c == '.' || c == '!' || c == '?') &&
                (i == text.size() || detail::utf8_space_len(text, i) != 0))
                break;
        }
        out.push_back({begin, last_non_space + 1});
        skip_space();
    }
    return out;
}

} // namespace medmeta
