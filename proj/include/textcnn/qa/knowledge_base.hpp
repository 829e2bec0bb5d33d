#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "textcnn/common.hpp"
#include "textcnn/nn/matrix.hpp"
#include "textcnn/text/dataset.hpp"
#include "textcnn/text/tokenizer.hpp"
#include "textcnn/text/vocabulary.hpp"

namespace textcnn::qa {

enum class Origin { Ingested, Learned };

inline std::string to_string(Origin o) { return o == Origin::Ingested ? "ingested" : "learned"; }

inline Origin origin_from_string(const std::string& s) {
    if (s == "ingested") return Origin::Ingested;
    if (s == "learned") return Origin::Learned;
    throw InvalidArgument("unknown knowledge-base origin '" + s + "'");
}

struct KbEntry {
    std::string text;
    std::vector<TokenId> token_ids;  // unpadded
    std::size_t category = 0;
    Origin origin = Origin::Ingested;
    std::vector<double> embedding;  // empty while stale
    bool stale = true;

    bool operator==(const KbEntry&) const = default;
};

/// Mean of the embedding rows of every non-padding id. All-padding input
/// gives the zero vector.
inline std::vector<double> mean_embedding(const std::vector<TokenId>& ids, const nn::Matrix<double>& table) {
    std::vector<double> out(table.cols(), 0.0);
    std::size_t n = 0;
    for (TokenId id : ids) {
        if (id == text::Vocabulary::kPadId) continue;
        if (id >= table.rows()) {
            throw InvalidArgument("mean_embedding: id " + std::to_string(id) + " outside the embedding table");
        }
        const auto row = table.row(id);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
        ++n;
    }
    if (n > 0) {
        for (auto& v : out) v /= static_cast<double>(n);
    }
    return out;
}

/// Cosine of the angle between a and b; 0 when either vector is zero.
inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("cosine_similarity: length mismatch");
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Match {
    std::size_t index = 0;
    double similarity = 0;
};

class KnowledgeBase {
public:
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<KbEntry>& entries() const { return entries_; }
    const KbEntry& at(std::size_t i) const { return entries_.at(i); }

    void add(KbEntry e) {
        if (e.category >= by_category_.size()) by_category_.resize(e.category + 1);
        by_category_[e.category].push_back(entries_.size());
        entries_.push_back(std::move(e));
    }

    /// Entry indices of one category, ascending.
    const std::vector<std::size_t>& indices_for(std::size_t category) const {
        static const std::vector<std::size_t> none;
        return category < by_category_.size() ? by_category_[category] : none;
    }

    std::size_t count(std::size_t category) const { return indices_for(category).size(); }

    std::size_t count(Origin o) const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.origin == o;
        return n;
    }

    bool any_stale() const {
        for (const auto& e : entries_) {
            if (e.stale) return true;
        }
        return false;
    }

    void mark_all_stale() {
        for (auto& e : entries_) {
            e.stale = true;
            e.embedding.clear();
        }
    }

    void recompute_embeddings(const nn::Matrix<double>& table) {
        for (auto& e : entries_) {
            e.embedding = mean_embedding(e.token_ids, table);
            e.stale = false;
        }
    }

    /// Highest cosine similarity to `query` among entries of `category` (all
    /// entries when absent). Ties keep the lowest index. Stale entries are
    /// an error because their vectors belong to an older model.
    std::optional<Match> best_match(const std::vector<double>& query,
                                    std::optional<std::size_t> category = std::nullopt) const {
        std::optional<Match> best;
        auto consider = [&](std::size_t i) {
            const auto& e = entries_[i];
            if (e.stale) {
                throw Error("knowledge-base entry " + std::to_string(i) + " has a stale embedding");
            }
            const double s = cosine_similarity(query, e.embedding);
            if (!best || s > best->similarity) best = Match{i, s};
        };
        if (category) {
            for (auto i : indices_for(*category)) consider(i);
        } else {
            for (std::size_t i = 0; i < entries_.size(); ++i) consider(i);
        }
        return best;
    }

    /// One line per entry: category id, origin, text, comma-separated
    /// embedding (empty when stale), tab separated.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write knowledge base '" + path + "'");
        char buf[32];
        for (const auto& e : entries_) {
            out << e.category << '\t' << to_string(e.origin) << '\t' << e.text << '\t';
            for (std::size_t i = 0; i < e.embedding.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", e.embedding[i]);
                out << (i ? "," : "") << buf;
            }
            out << '\n';
        }
        if (!out) throw IoError("failed writing knowledge base '" + path + "'");
    }

    /// Token ids are re-derived from the text with `vocab`.
    static KnowledgeBase load(const std::string& path, const text::Vocabulary& vocab, std::size_t num_classes) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open knowledge base '" + path + "'");
        KnowledgeBase kb;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string part;
            while (std::getline(ss, part, '\t')) f.push_back(part);
            if (f.size() == 3 && !line.empty() && line.back() == '\t') f.emplace_back();
            if (f.size() != 4) {
                throw IoError("knowledge base '" + path + "' line " + std::to_string(lineno) + ": expected 4 fields");
            }
            KbEntry e;
            try {
                e.category = std::stoul(f[0]);
                e.origin = origin_from_string(f[1]);
                std::stringstream vs(f[3]);
                while (std::getline(vs, part, ',')) e.embedding.push_back(std::stod(part));
            } catch (const std::exception& ex) {
                throw IoError("knowledge base '" + path + "' line " + std::to_string(lineno) + ": " + ex.what());
            }
            if (e.category >= num_classes) {
                throw IoError("knowledge base '" + path + "' line " + std::to_string(lineno) + ": bad category");
            }
            e.text = f[2];
            e.token_ids = text::encode_tokens(text::normalize_tokenize(e.text), vocab);
            e.stale = e.embedding.empty();
            kb.add(std::move(e));
        }
        return kb;
    }

    bool operator==(const KnowledgeBase& o) const { return entries_ == o.entries_; }

private:
    std::vector<KbEntry> entries_;
    std::vector<std::vector<std::size_t>> by_category_;
};

}  // namespace textcnn::qa
