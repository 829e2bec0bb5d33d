#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "textcnn/text/tokenizer.hpp"

namespace textcnn::qa {

inline constexpr std::size_t kMinSentenceTokens = 3;

/// Collapses every whitespace run to one space and trims both ends.
inline std::string squeeze_whitespace(std::string_view s) {
    std::string out;
    bool gap = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            gap = !out.empty();
        } else {
            if (gap) out += ' ';
            gap = false;
            out += c;
        }
    }
    return out;
}

/// Splits after '.', '?' or '!' when followed by whitespace (or the end).
/// Pieces with fewer than 3 tokens are merged into the previous sentence; a
/// short leading piece is carried into the next one. Pieces without any token
/// are dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> pieces;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '?' || c == '!') &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            pieces.push_back(squeeze_whitespace(text.substr(start, i + 1 - start)));
            start = i + 1;
        }
    }
    if (start < text.size()) pieces.push_back(squeeze_whitespace(text.substr(start)));

    std::vector<std::string> out;
    std::string carry;
    for (auto& p : pieces) {
        const std::size_t n = text::normalize_tokenize(p).size();
        if (n == 0) continue;
        if (n < kMinSentenceTokens) {
            if (!out.empty() && carry.empty()) {
                out.back() += ' ' + p;
            } else {
                carry += carry.empty() ? p : ' ' + p;
            }
            continue;
        }
        out.push_back(carry.empty() ? p : carry + ' ' + p);
        carry.clear();
    }
    if (!carry.empty()) {
        if (out.empty()) {
            out.push_back(carry);
        } else {
            out.back() += ' ' + carry;
        }
    }
    return out;
}

}  // namespace textcnn::qa
