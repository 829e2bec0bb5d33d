#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "textcnn/common.hpp"

namespace textcnn::text {

/// Bidirectional token <-> index map. Index 0 is the padding token and index 1
/// the unknown token; both are always present.
class Vocabulary {
public:
    static constexpr TokenId kPadId = 0;
    static constexpr TokenId kUnkId = 1;
    static constexpr std::string_view kPadToken = "<pad>";
    static constexpr std::string_view kUnkToken = "<unk>";
    static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

    Vocabulary() {
        add(std::string(kPadToken));
        add(std::string(kUnkToken));
    }

    /// Keeps tokens seen at least `min_count` times, ranked by frequency
    /// (descending) then first occurrence (ascending), capped at `max_size`
    /// non-reserved entries.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_count = 1, std::size_t max_size = 50000) {
        if (min_count < 1) {
            throw InvalidArgument("build_vocabulary: min_count must be >= 1");
        }
        struct Stat {
            std::size_t count = 0;
            std::size_t first = 0;
        };
        std::unordered_map<std::string, Stat> stats;
        std::size_t position = 0;
        for (const auto& doc : corpus) {
            for (const auto& tok : doc) {
                auto [it, inserted] = stats.try_emplace(tok);
                if (inserted) {
                    it->second.first = position;
                }
                ++it->second.count;
                ++position;
            }
        }
        std::vector<std::pair<const std::string*, Stat>> ranked;
        ranked.reserve(stats.size());
        for (const auto& [tok, st] : stats) {
            if (st.count >= min_count && tok != kPadToken && tok != kUnkToken) {
                ranked.emplace_back(&tok, st);
            }
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second.count != b.second.count) {
                return a.second.count > b.second.count;
            }
            return a.second.first < b.second.first;
        });
        if (ranked.size() > max_size) {
            ranked.resize(max_size);
        }
        Vocabulary vocab;
        for (const auto& entry : ranked) {
            vocab.add(*entry.first);
        }
        return vocab;
    }

    std::size_t size() const { return tokens_.size(); }

    std::optional<TokenId> find(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// Index of `token`, or the unknown index for out-of-vocabulary tokens.
    TokenId id_of(std::string_view token) const { return find(token).value_or(kUnkId); }

    const std::string& token(TokenId id) const {
        if (id >= tokens_.size()) {
            throw InvalidArgument("vocabulary index " + std::to_string(id) + " out of range");
        }
        return tokens_[id];
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Stable content hash, used to tie checkpoints to the vocabulary they were trained with.
    std::uint64_t fingerprint() const {
        std::uint64_t h = kFnvOffset;
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            h = fnv1a64(std::to_string(i), h);
            h = fnv1a64("\t", h);
            h = fnv1a64(tokens_[i], h);
            h = fnv1a64("\n", h);
        }
        return h;
    }

    void save(std::ostream& out) const {
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            out << i << '\t' << tokens_[i] << '\n';
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write vocabulary file '" + path + "'");
        }
        save(out);
    }

    static Vocabulary load(std::istream& in) {
        Vocabulary vocab;
        vocab.tokens_.clear();
        vocab.index_.clear();
        std::string line;
        std::size_t expected = 0;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw IoError("vocabulary line " + std::to_string(expected) + " has no tab");
            }
            std::size_t idx = 0;
            try {
                idx = std::stoul(line.substr(0, tab));
            } catch (const std::exception&) {
                throw IoError("vocabulary line " + std::to_string(expected) + " has a bad index");
            }
            if (idx != expected) {
                throw IoError("vocabulary indices must be dense and ascending");
            }
            std::string tok = line.substr(tab + 1);
            if (vocab.index_.count(tok)) {
                throw IoError("duplicate vocabulary token '" + tok + "'");
            }
            vocab.add(std::move(tok));
            ++expected;
        }
        if (vocab.tokens_.size() < 2 || vocab.tokens_[kPadId] != kPadToken ||
            vocab.tokens_[kUnkId] != kUnkToken) {
            throw IoError("vocabulary file must start with <pad> and <unk>");
        }
        return vocab;
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open vocabulary file '" + path + "'");
        }
        return load(in);
    }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    void add(std::string token) {
        const auto id = static_cast<TokenId>(tokens_.size());
        index_.emplace(token, id);
        tokens_.push_back(std::move(token));
    }

    std::unordered_map<std::string, TokenId> index_;
    std::vector<std::string> tokens_;
};

}  // namespace textcnn::text
