#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "textcnn/common.hpp"
#include "textcnn/text/csv.hpp"
#include "textcnn/text/tokenizer.hpp"
#include "textcnn/text/vocabulary.hpp"

namespace textcnn::text {

/// Dense category-name -> id map. Names are kept sorted so ids do not depend
/// on row order.
class LabelSet {
public:
    LabelSet() = default;

    template <typename Range>
    static LabelSet from_names(const Range& names) {
        LabelSet set;
        for (const auto& n : names) {
            set.names_.emplace_back(n);
        }
        std::sort(set.names_.begin(), set.names_.end());
        set.names_.erase(std::unique(set.names_.begin(), set.names_.end()), set.names_.end());
        if (set.names_.size() < 2) {
            throw InvalidArgument("a label set needs at least 2 distinct categories, got " +
                                  std::to_string(set.names_.size()));
        }
        set.reindex();
        return set;
    }

    std::size_t size() const { return names_.size(); }

    std::size_t id_of(const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) {
            throw InvalidArgument("unknown category '" + name + "'");
        }
        return it->second;
    }

    bool contains(const std::string& name) const { return ids_.count(name) != 0; }

    const std::string& name(std::size_t id) const {
        if (id >= names_.size()) {
            throw InvalidArgument("category id " + std::to_string(id) + " out of range");
        }
        return names_[id];
    }

    const std::vector<std::string>& names() const { return names_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write label file '" + path + "'");
        }
        for (const auto& n : names_) {
            out << n << '\n';
        }
    }

    static LabelSet load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open label file '" + path + "'");
        }
        std::vector<std::string> names;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) {
                names.push_back(line);
            }
        }
        return from_names(names);
    }

    bool operator==(const LabelSet& other) const { return names_ == other.names_; }

private:
    void reindex() {
        ids_.clear();
        for (std::size_t i = 0; i < names_.size(); ++i) {
            ids_.emplace(names_[i], i);
        }
    }

    std::vector<std::string> names_;
    std::map<std::string, std::size_t> ids_;
};

struct EncodedExample {
    std::vector<TokenId> token_ids;  // exactly L entries
    std::size_t label_id = 0;
    std::string raw_text;

    bool operator==(const EncodedExample&) const = default;
};

/// OOV tokens map to the unknown id; output is truncated or right-padded with
/// the padding id to exactly `length` entries.
inline std::vector<TokenId> encode_and_pad(const std::vector<std::string>& tokens,
                                           const Vocabulary& vocab, std::size_t length) {
    if (length < 1) {
        throw InvalidArgument("encode_and_pad: target length must be >= 1");
    }
    std::vector<TokenId> ids(length, Vocabulary::kPadId);
    const std::size_t n = std::min(length, tokens.size());
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = vocab.id_of(tokens[i]);
    }
    return ids;
}

/// Unpadded ids for every token (no truncation).
inline std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens,
                                          const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(vocab.id_of(t));
    }
    return ids;
}

/// Longest tokenized length, capped at `max_length` and never below
/// `min_length` (the widest convolution filter).
inline std::size_t padded_length(const std::vector<std::vector<std::string>>& docs,
                                 std::size_t max_length, std::size_t min_length) {
    std::size_t longest = 0;
    for (const auto& d : docs) {
        longest = std::max(longest, d.size());
    }
    return std::max(std::min(longest, max_length), std::max<std::size_t>(min_length, 1));
}

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> validation;
    std::vector<T> test;
    std::uint64_t seed = 0;
    SplitRatios ratios;
};

using SplitDataset = Split<EncodedExample>;

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

inline SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
    if (!(r.train > 0 && r.validation > 0 && r.test > 0) ||
        std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
        throw InvalidArgument("split ratios must be positive and sum to 1");
    }
    SplitSizes s;
    s.validation = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.validation + 1e-9));
    s.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.test + 1e-9));
    s.train = n - s.validation - s.test;
    if (n >= 3 && (s.train == 0 || s.validation == 0 || s.test == 0)) {
        throw InvalidArgument("split of " + std::to_string(n) +
                              " examples leaves a partition empty; adjust the ratios");
    }
    return s;
}

/// Seeded shuffle of indices followed by contiguous train/validation/test slices.
template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const SplitRatios& ratios, std::uint64_t seed) {
    const SplitSizes sizes = split_sizes(items.size(), ratios);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5eed));
    rng.shuffle(order);

    Split<T> out;
    out.seed = seed;
    out.ratios = ratios;
    std::size_t k = 0;
    for (; k < sizes.train; ++k) {
        out.train.push_back(items[order[k]]);
    }
    for (; k < sizes.train + sizes.validation; ++k) {
        out.validation.push_back(items[order[k]]);
    }
    for (; k < items.size(); ++k) {
        out.test.push_back(items[order[k]]);
    }
    return out;
}

struct CorpusOptions {
    std::size_t min_count = 1;
    std::size_t max_vocab = 50000;
    std::size_t max_sentence_length = 256;
    std::size_t min_sentence_length = 5;  // at least the widest filter
    SplitRatios ratios;
    std::uint64_t seed = 0;
};

/// Everything the trainer needs: encoded splits plus the maps that produced them.
struct PreparedCorpus {
    Vocabulary vocab;
    LabelSet labels;
    std::size_t padded_length = 0;
    SplitDataset split;
};

/// Tokenizes, splits, builds the vocabulary and padded length from the
/// training split, and encodes every partition.
inline PreparedCorpus prepare_corpus(const std::vector<LabeledText>& rows, const CorpusOptions& opt) {
    std::vector<std::string> label_names;
    label_names.reserve(rows.size());
    for (const auto& r : rows) {
        label_names.push_back(r.label);
    }
    PreparedCorpus corpus;
    corpus.labels = LabelSet::from_names(label_names);

    struct Doc {
        std::vector<std::string> tokens;
        std::size_t label = 0;
        std::string text;
    };
    std::vector<Doc> docs;
    docs.reserve(rows.size());
    for (const auto& r : rows) {
        docs.push_back({normalize_tokenize(r.text), corpus.labels.id_of(r.label), r.text});
    }
    Split<Doc> split = split_dataset(docs, opt.ratios, opt.seed);

    std::vector<std::vector<std::string>> train_tokens;
    train_tokens.reserve(split.train.size());
    for (const auto& d : split.train) {
        train_tokens.push_back(d.tokens);
    }
    corpus.vocab = Vocabulary::build(train_tokens, opt.min_count, opt.max_vocab);
    corpus.padded_length =
        padded_length(train_tokens, opt.max_sentence_length, opt.min_sentence_length);

    auto encode_all = [&](const std::vector<Doc>& in) {
        std::vector<EncodedExample> out;
        out.reserve(in.size());
        for (const auto& d : in) {
            out.push_back({encode_and_pad(d.tokens, corpus.vocab, corpus.padded_length), d.label, d.text});
        }
        return out;
    };
    corpus.split.train = encode_all(split.train);
    corpus.split.validation = encode_all(split.validation);
    corpus.split.test = encode_all(split.test);
    corpus.split.seed = split.seed;
    corpus.split.ratios = split.ratios;
    return corpus;
}

}  // namespace textcnn::text
