#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "textcnn/metrics/evaluate.hpp"
#include "textcnn/nn/network.hpp"
#include "textcnn/qa/knowledge_base.hpp"
#include "textcnn/qa/sentences.hpp"
#include "textcnn/text/csv.hpp"
#include "textcnn/text/dataset.hpp"
#include "textcnn/train/trainer.hpp"

namespace textcnn::qa {

/// Errors that carry a machine-readable code for API clients.
class QaError : public Error {
public:
    QaError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

enum class DomainStatus { Created, Ingested, Trained };

inline std::string to_string(DomainStatus s) {
    switch (s) {
        case DomainStatus::Created: return "created";
        case DomainStatus::Ingested: return "ingested";
        case DomainStatus::Trained: return "trained";
    }
    return "unknown";
}

inline DomainStatus status_from_string(const std::string& s) {
    if (s == "created") return DomainStatus::Created;
    if (s == "ingested") return DomainStatus::Ingested;
    if (s == "trained") return DomainStatus::Trained;
    throw InvalidArgument("unknown domain status '" + s + "'");
}

/// Ids double as directory names: 1-64 characters from [A-Za-z0-9_-].
inline bool valid_domain_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (unsigned char c : id) {
        if (!(std::isalnum(c) || c == '_' || c == '-')) return false;
    }
    return true;
}

/// Everything a query reads, published as one immutable value.
struct DomainSnapshot {
    std::string id;
    DomainStatus status = DomainStatus::Created;
    std::uint64_t version = 0;
    text::Vocabulary vocab;
    text::LabelSet labels;
    std::size_t padded_length = 0;
    nn::HyperParams hp;
    std::shared_ptr<const nn::ModelParams<double>> model;
    KnowledgeBase kb;
};

/// Training settings for domain classifiers: the default table with enough
/// passes to fit a small document set.
inline nn::HyperParams default_domain_hyperparams() {
    nn::HyperParams hp;
    hp.epochs = 60;
    hp.eval_every = 20;
    return hp;
}

struct Classification {
    std::size_t category = 0;
    double confidence = 0;
    std::vector<double> probs;
};

struct Answer {
    std::string text;
    std::string category;
    std::size_t category_id = 0;
    double confidence = 0;
    double similarity = 0;
    std::string domain_id;
    bool fallback = false;
    std::size_t entry_index = 0;
    std::uint64_t snapshot_version = 0;
};

namespace detail {

inline std::vector<std::string> question_tokens(const std::string& question) {
    auto tokens = text::normalize_tokenize(question);
    if (tokens.empty()) {
        throw QaError("EMPTY_QUESTION", "question has no usable tokens");
    }
    return tokens;
}

inline void require_trained(const DomainSnapshot& s) {
    if (s.status != DomainStatus::Trained || !s.model) {
        throw QaError("NOT_TRAINED", "domain '" + s.id + "' has no trained model");
    }
}

}  // namespace detail

/// Eval-mode forward of the question; OOV tokens use the unknown id.
inline Classification classify_question(const DomainSnapshot& s, const std::string& question) {
    detail::require_trained(s);
    const auto ids = text::encode_and_pad(detail::question_tokens(question), s.vocab, s.padded_length);
    Classification c;
    c.probs = nn::predict_probs<double>(ids, *s.model);
    c.category = nn::argmax_of<double>(c.probs);
    c.confidence = c.probs[c.category];
    return c;
}

/// Mean learned embedding of the question (padding excluded).
inline std::vector<double> question_embedding(const DomainSnapshot& s, const std::string& question) {
    detail::require_trained(s);
    return mean_embedding(text::encode_tokens(detail::question_tokens(question), s.vocab), s.model->embedding);
}

/// Classifies, then returns the most similar knowledge-base sentence of the
/// predicted category. An empty category falls back to the whole base.
inline Answer retrieve_answer(const DomainSnapshot& s, const std::string& question) {
    const auto cls = classify_question(s, question);
    if (s.kb.empty()) {
        throw QaError("EMPTY_KB", "domain '" + s.id + "' has an empty knowledge base");
    }
    const auto query = question_embedding(s, question);
    Answer a;
    auto match = s.kb.best_match(query, cls.category);
    if (!match) {
        match = s.kb.best_match(query);
        a.fallback = true;
    }
    const auto& entry = s.kb.at(match->index);
    a.text = entry.text;
    a.category_id = entry.category;
    a.category = s.labels.name(entry.category);
    a.confidence = cls.confidence;
    a.similarity = match->similarity;
    a.domain_id = s.id;
    a.entry_index = match->index;
    a.snapshot_version = s.version;
    return a;
}

struct DomainSummary {
    std::string id;
    DomainStatus status = DomainStatus::Created;
    bool training = false;
    std::uint64_t version = 0;
    std::vector<std::string> categories;
    std::vector<std::size_t> entries_per_category;
    std::size_t kb_size = 0;
    std::size_t learned = 0;
    std::size_t vocab_size = 0;
};

/// One QA domain. Queries read an immutable snapshot without locking;
/// ingest, train and kb_learn are serialized and publish a new snapshot.
class Domain {
public:
    using PersistHook = std::function<void(const DomainSnapshot&)>;

    explicit Domain(std::string id, PersistHook persist = {}) : persist_(std::move(persist)) {
        if (!valid_domain_id(id)) {
            throw QaError("INVALID_DOMAIN_ID", "domain id must be 1-64 characters of [A-Za-z0-9_-]");
        }
        auto s = std::make_shared<DomainSnapshot>();
        s->id = std::move(id);
        snap_ = std::move(s);
    }

    Domain(std::shared_ptr<const DomainSnapshot> restored, PersistHook persist = {})
        : persist_(std::move(persist)), snap_(std::move(restored)) {}

    const std::string& id() const { return snapshot()->id; }

    std::shared_ptr<const DomainSnapshot> snapshot() const { return std::atomic_load(&snap_); }

    bool training() const { return training_.load(); }

    DomainSummary summary() const {
        auto s = snapshot();
        DomainSummary d;
        d.id = s->id;
        d.status = s->status;
        d.training = training();
        d.version = s->version;
        if (s->status != DomainStatus::Created) {
            d.categories = s->labels.names();
            for (std::size_t c = 0; c < s->labels.size(); ++c) d.entries_per_category.push_back(s->kb.count(c));
            d.vocab_size = s->vocab.size();
        }
        d.kb_size = s->kb.size();
        d.learned = s->kb.count(Origin::Learned);
        return d;
    }

    /// Adds documents, splits them into sentences, and rebuilds vocabulary and
    /// labels from every ingested sentence. Any model is dropped and all
    /// knowledge-base vectors go stale until the next training run.
    void ingest(const std::vector<text::LabeledText>& documents) {
        std::lock_guard lock(mutex_);
        if (training_) {
            throw QaError("TRAINING_IN_PROGRESS", "domain '" + id() + "' is training");
        }
        const auto cur = snapshot();

        struct Row {
            std::string text;
            std::string category;
            Origin origin;
        };
        std::vector<Row> rows;
        for (const auto& e : cur->kb.entries()) {
            rows.push_back({e.text, cur->labels.name(e.category), e.origin});
        }
        std::size_t added = 0;
        for (const auto& d : documents) {
            if (d.label.empty() || d.label.find_first_of("\t\r\n") != std::string::npos) {
                throw QaError("INVALID_CATEGORY", "category names must be non-empty single-line strings");
            }
            for (auto& sentence : split_sentences(d.text)) {
                rows.push_back({std::move(sentence), d.label, Origin::Ingested});
                ++added;
            }
        }
        if (added == 0) {
            throw QaError("EMPTY_CORPUS", "no sentences found in the submitted documents");
        }

        std::vector<std::string> names;
        std::vector<std::vector<std::string>> corpus_tokens;
        for (const auto& r : rows) {
            names.push_back(r.category);
            if (r.origin == Origin::Ingested) corpus_tokens.push_back(text::normalize_tokenize(r.text));
        }
        auto next = std::make_shared<DomainSnapshot>();
        next->id = cur->id;
        next->status = DomainStatus::Ingested;
        next->hp = cur->hp;
        try {
            next->labels = text::LabelSet::from_names(names);
        } catch (const InvalidArgument&) {
            throw QaError("SINGLE_CATEGORY", "a domain needs documents from at least two categories");
        }
        next->vocab = text::Vocabulary::build(corpus_tokens);
        for (auto& r : rows) {
            KbEntry e;
            e.token_ids = text::encode_tokens(text::normalize_tokenize(r.text), next->vocab);
            e.text = std::move(r.text);
            e.category = next->labels.id_of(r.category);
            e.origin = r.origin;
            next->kb.add(std::move(e));
        }
        publish(std::move(next), cur->version);
    }

    /// Trains the classifier on every ingested sentence and recomputes all
    /// knowledge-base vectors from the new embedding table. Queries keep
    /// using the previous snapshot until this returns.
    train::TrainRun<double> train(const nn::HyperParams& hp, train::TrainOptions<double> opt = {}) {
        std::shared_ptr<const DomainSnapshot> base;
        {
            std::lock_guard lock(mutex_);
            base = snapshot();
            if (base->status == DomainStatus::Created) {
                throw QaError("NOT_INGESTED", "domain '" + base->id + "' has no documents");
            }
            if (training_) {
                throw QaError("TRAINING_IN_PROGRESS", "domain '" + base->id + "' is already training");
            }
            training_ = true;
        }
        struct Reset {
            std::atomic<bool>& flag;
            ~Reset() { flag = false; }
        } reset{training_};

        text::PreparedCorpus corpus;
        corpus.vocab = base->vocab;
        corpus.labels = base->labels;
        std::vector<std::vector<std::string>> tokens;
        for (const auto& e : base->kb.entries()) {
            if (e.origin == Origin::Ingested) tokens.push_back(text::normalize_tokenize(e.text));
        }
        corpus.padded_length = text::padded_length(tokens, text::CorpusOptions{}.max_sentence_length,
                                                   std::max<std::size_t>(5, hp.max_width()));
        for (const auto& e : base->kb.entries()) {
            if (e.origin != Origin::Ingested) continue;
            corpus.split.train.push_back(
                {text::encode_and_pad(text::normalize_tokenize(e.text), corpus.vocab, corpus.padded_length),
                 e.category, e.text});
        }
        corpus.split.validation = corpus.split.train;
        auto run = train::train<double>(corpus, hp, std::move(opt));

        std::lock_guard lock(mutex_);
        const auto cur = snapshot();  // may carry entries learned meanwhile
        auto next = std::make_shared<DomainSnapshot>(*cur);
        next->status = DomainStatus::Trained;
        next->hp = hp;
        next->padded_length = corpus.padded_length;
        next->model = std::make_shared<const nn::ModelParams<double>>(run.final_params);
        next->kb.recompute_embeddings(next->model->embedding);
        publish(std::move(next), cur->version);
        return run;
    }

    /// Stores an accepted question under `category` as a learned entry. The
    /// model is never touched. Returns whether the base changed.
    bool kb_learn(const std::string& question, std::size_t category, bool accepted) {
        if (!accepted) return false;
        std::lock_guard lock(mutex_);
        const auto cur = snapshot();
        detail::require_trained(*cur);
        if (category >= cur->labels.size()) {
            throw QaError("INVALID_CATEGORY", "category id " + std::to_string(category) + " is out of range");
        }
        auto next = std::make_shared<DomainSnapshot>(*cur);
        KbEntry e;
        e.text = squeeze_whitespace(question);
        e.token_ids = text::encode_tokens(detail::question_tokens(question), cur->vocab);
        e.category = category;
        e.origin = Origin::Learned;
        e.embedding = mean_embedding(e.token_ids, cur->model->embedding);
        e.stale = false;
        next->kb.add(std::move(e));
        publish(std::move(next), cur->version);
        return true;
    }

    /// Looks the category up by name, so ids remapped by a later ingest still
    /// land in the right place.
    bool kb_learn(const std::string& question, const Answer& answer, bool accepted) {
        if (!accepted) return false;
        const auto cur = snapshot();
        if (cur->status == DomainStatus::Created || !cur->labels.contains(answer.category)) {
            throw QaError("INVALID_CATEGORY", "category '" + answer.category + "' is not in domain '" + cur->id + "'");
        }
        return kb_learn(question, cur->labels.id_of(answer.category), accepted);
    }

private:
    void publish(std::shared_ptr<DomainSnapshot> next, std::uint64_t previous_version) {
        next->version = previous_version + 1;
        if (persist_) persist_(*next);
        std::atomic_store(&snap_, std::shared_ptr<const DomainSnapshot>(std::move(next)));
    }

    PersistHook persist_;
    mutable std::mutex mutex_;
    std::atomic<bool> training_{false};
    std::shared_ptr<const DomainSnapshot> snap_;
};

}  // namespace textcnn::qa
