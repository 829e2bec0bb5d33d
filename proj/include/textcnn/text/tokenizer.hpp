#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace textcnn::text {

inline bool is_token_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '$' || c == '%';
}

/// Lowercases, splits on whitespace, and trims every token of leading and
/// trailing characters outside [a-z0-9$%]. Empty tokens are dropped. Bytes
/// >= 0x80 are left alone, so multi-byte UTF-8 only survives mid-token.
inline std::vector<std::string> normalize_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        if (j > i) {
            std::string tok(text.substr(i, j - i));
            for (char& c : tok) {
                const auto u = static_cast<unsigned char>(c);
                if (u < 0x80) {
                    c = static_cast<char>(std::tolower(u));
                }
            }
            std::size_t b = 0;
            std::size_t e = tok.size();
            while (b < e && !is_token_char(static_cast<unsigned char>(tok[b]))) {
                ++b;
            }
            while (e > b && !is_token_char(static_cast<unsigned char>(tok[e - 1]))) {
                --e;
            }
            if (e > b) {
                tokens.push_back(tok.substr(b, e - b));
            }
        }
        i = j;
    }
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

}  // namespace textcnn::text
