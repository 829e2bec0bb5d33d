#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "textcnn/nn/checkpoint.hpp"
#include "textcnn/qa/domain.hpp"

namespace textcnn::qa {

namespace fs = std::filesystem;

/// Directory layout per domain: domain.json, vocab.tsv, labels.txt, kb.tsv
/// and model.ckpt (the last four only once they exist).
inline void save_domain(const DomainSnapshot& s, const fs::path& dir) {
    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    nlohmann::json meta{{"id", s.id},
                        {"status", to_string(s.status)},
                        {"version", s.version},
                        {"padded_length", s.padded_length},
                        {"hyperparams", s.hp}};
    {
        std::ofstream out(tmp / "domain.json");
        out << meta.dump(2) << "\n";
        if (!out) throw IoError("cannot write " + (tmp / "domain.json").string());
    }
    if (s.status != DomainStatus::Created) {
        s.vocab.save((tmp / "vocab.tsv").string());
        s.labels.save((tmp / "labels.txt").string());
        s.kb.save((tmp / "kb.tsv").string());
    }
    if (s.model) {
        nn::CheckpointMeta cm{s.hp, s.vocab.fingerprint(), s.labels.names(), s.padded_length, 0};
        nn::save_checkpoint(*s.model, cm, (tmp / "model.ckpt").string());
    }
    // Swap in the complete directory; a crash leaves either version intact.
    const fs::path old = dir.string() + ".old";
    fs::remove_all(old);
    if (fs::exists(dir)) fs::rename(dir, old);
    fs::rename(tmp, dir);
    fs::remove_all(old);
}

inline std::shared_ptr<const DomainSnapshot> load_domain(const fs::path& dir) {
    std::ifstream in(dir / "domain.json");
    if (!in) throw IoError("cannot open " + (dir / "domain.json").string());
    auto s = std::make_shared<DomainSnapshot>();
    try {
        const auto meta = nlohmann::json::parse(in);
        s->id = meta.at("id").get<std::string>();
        s->status = status_from_string(meta.at("status").get<std::string>());
        s->version = meta.at("version").get<std::uint64_t>();
        s->padded_length = meta.at("padded_length").get<std::size_t>();
        s->hp = meta.at("hyperparams").get<nn::HyperParams>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt " + (dir / "domain.json").string() + ": " + e.what());
    }
    if (s->status != DomainStatus::Created) {
        s->vocab = text::Vocabulary::load((dir / "vocab.tsv").string());
        s->labels = text::LabelSet::load((dir / "labels.txt").string());
        s->kb = KnowledgeBase::load((dir / "kb.tsv").string(), s->vocab, s->labels.size());
    }
    if (s->status == DomainStatus::Trained) {
        auto ck = nn::load_checkpoint((dir / "model.ckpt").string(), s->vocab.fingerprint());
        s->model = std::make_shared<const nn::ModelParams<double>>(std::move(ck.params));
        if (s->kb.any_stale()) s->kb.recompute_embeddings(s->model->embedding);
    }
    return s;
}

/// All domains of one process, optionally persisted under a data directory.
/// Domains found on disk are loaded on first access.
class DomainRegistry {
public:
    explicit DomainRegistry(std::string data_dir = "") : data_dir_(std::move(data_dir)) {
        if (!data_dir_.empty()) fs::create_directories(data_dir_);
    }

    const std::string& data_dir() const { return data_dir_; }

    std::shared_ptr<Domain> create(const std::string& id) {
        std::lock_guard lock(mutex_);
        if (!valid_domain_id(id)) {
            throw QaError("INVALID_DOMAIN_ID", "domain id must be 1-64 characters of [A-Za-z0-9_-]");
        }
        if (domains_.count(id) || (!data_dir_.empty() && fs::exists(path_of(id) / "domain.json"))) {
            throw QaError("DOMAIN_EXISTS", "domain '" + id + "' already exists");
        }
        auto d = std::make_shared<Domain>(id, hook());
        if (!data_dir_.empty()) save_domain(*d->snapshot(), path_of(id));
        domains_[id] = d;
        return d;
    }

    /// nullptr when the domain is unknown.
    std::shared_ptr<Domain> find(const std::string& id) {
        std::lock_guard lock(mutex_);
        if (auto it = domains_.find(id); it != domains_.end()) return it->second;
        if (data_dir_.empty() || !valid_domain_id(id) || !fs::exists(path_of(id) / "domain.json")) return nullptr;
        auto d = std::make_shared<Domain>(load_domain(path_of(id)), hook());
        domains_[id] = d;
        return d;
    }

    std::shared_ptr<Domain> get(const std::string& id) {
        auto d = find(id);
        if (!d) throw QaError("UNKNOWN_DOMAIN", "no domain named '" + id + "'");
        return d;
    }

    /// Sorted ids of every known domain, in memory or on disk.
    std::vector<std::string> ids() {
        std::vector<std::string> out;
        {
            std::lock_guard lock(mutex_);
            for (const auto& [id, d] : domains_) out.push_back(id);
            if (!data_dir_.empty()) {
                for (const auto& entry : fs::directory_iterator(data_dir_)) {
                    const auto name = entry.path().filename().string();
                    if (entry.is_directory() && valid_domain_id(name) && fs::exists(entry.path() / "domain.json")) {
                        out.push_back(name);
                    }
                }
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<std::shared_ptr<Domain>> all() {
        std::vector<std::shared_ptr<Domain>> out;
        for (const auto& id : ids()) out.push_back(get(id));
        return out;
    }

    /// Classifies against every trained domain and answers from the most
    /// confident one; ties go to the smallest domain id.
    Answer answer_general(const std::string& question) {
        std::shared_ptr<const DomainSnapshot> best;
        double best_conf = -1;
        for (const auto& d : all()) {
            auto s = d->snapshot();
            if (s->status != DomainStatus::Trained) continue;
            const double conf = classify_question(*s, question).confidence;
            if (conf > best_conf) {
                best_conf = conf;
                best = s;
            }
        }
        if (!best) throw QaError("NO_TRAINED_DOMAIN", "no domain has a trained model yet");
        return retrieve_answer(*best, question);
    }

private:
    fs::path path_of(const std::string& id) const { return fs::path(data_dir_) / id; }

    Domain::PersistHook hook() const {
        if (data_dir_.empty()) return {};
        const std::string root = data_dir_;
        return [root](const DomainSnapshot& s) { save_domain(s, fs::path(root) / s.id); };
    }

    std::string data_dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Domain>> domains_;
};

}  // namespace textcnn::qa
