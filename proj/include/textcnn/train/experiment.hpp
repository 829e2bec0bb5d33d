#pragma once

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "textcnn/metrics/evaluate.hpp"
#include "textcnn/metrics/metrics.hpp"
#include "textcnn/nn/checkpoint.hpp"
#include "textcnn/text/csv.hpp"
#include "textcnn/text/dataset.hpp"
#include "textcnn/train/trainer.hpp"

namespace textcnn::train {

/// Everything a training run reads besides the data and the seed.
struct ExperimentConfig {
    nn::HyperParams hp;
    text::CorpusOptions corpus;
    std::string text_column{text::kDefaultTextColumn};
    std::string label_column{text::kDefaultLabelColumn};
    std::size_t subsample = 0;  // 0 = use every row

    bool operator==(const ExperimentConfig& o) const {
        return hp == o.hp && corpus.min_count == o.corpus.min_count && corpus.max_vocab == o.corpus.max_vocab &&
               corpus.max_sentence_length == o.corpus.max_sentence_length &&
               corpus.ratios.train == o.corpus.ratios.train &&
               corpus.ratios.validation == o.corpus.ratios.validation &&
               corpus.ratios.test == o.corpus.ratios.test && text_column == o.text_column &&
               label_column == o.label_column && subsample == o.subsample;
    }
};

/// The three published parameter tables. They share batch 37, 32 filters per
/// width over widths 3/4/5, 50-dim embeddings and dropout 0.5.
inline ExperimentConfig experiment_preset(int id) {
    ExperimentConfig cfg;
    auto& hp = cfg.hp;
    hp.batch_size = 37;
    hp.filters_per_width = 32;
    hp.widths = {3, 4, 5};
    hp.embedding_dim = 50;
    hp.dropout = 0.5;
    switch (id) {
        case 1:
            hp.epochs = 1;
            hp.l2_lambda = 0.1;
            hp.eval_every = 200;
            break;
        case 2:
            hp.epochs = 2;
            hp.l2_lambda = 0.0;
            hp.eval_every = 400;
            break;
        case 3:
            hp.epochs = 4;
            hp.l2_lambda = 0.0;
            hp.eval_every = 400;
            break;
        default:
            throw InvalidArgument("unknown experiment " + std::to_string(id) + " (expected 1, 2 or 3)");
    }
    return cfg;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& value, std::size_t line) {
    std::istringstream in(value);
    N out{};
    in >> out;
    if (!in || !(in >> std::ws).eof() || (std::is_unsigned_v<N> && value.front() == '-')) {
        throw InvalidArgument("config line " + std::to_string(line) + ": bad value '" + value + "' for " + key);
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value, std::size_t line) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InvalidArgument("config line " + std::to_string(line) + ": bad boolean '" + value + "' for " + key);
}

}  // namespace detail

/// Reads `key = value` lines on top of `base`. Blank lines and lines starting
/// with # are ignored; unknown keys are errors.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
    ExperimentConfig cfg = std::move(base);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = detail::trim(raw);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("config line " + std::to_string(line) + ": expected key = value");
        }
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (value.empty()) {
            throw InvalidArgument("config line " + std::to_string(line) + ": empty value for " + key);
        }
        using detail::parse_number;
        auto& hp = cfg.hp;
        if (key == "epochs") hp.epochs = parse_number<std::size_t>(key, value, line);
        else if (key == "batch_size") hp.batch_size = parse_number<std::size_t>(key, value, line);
        else if (key == "filters_per_width") hp.filters_per_width = parse_number<std::size_t>(key, value, line);
        else if (key == "widths") {
            hp.widths.clear();
            std::stringstream ss(value);
            std::string part;
            while (std::getline(ss, part, ',')) {
                hp.widths.push_back(parse_number<std::size_t>(key, detail::trim(part), line));
            }
        }
        else if (key == "embedding_dim") hp.embedding_dim = parse_number<std::size_t>(key, value, line);
        else if (key == "l2_lambda") hp.l2_lambda = parse_number<double>(key, value, line);
        else if (key == "eval_every") hp.eval_every = parse_number<std::size_t>(key, value, line);
        else if (key == "dropout") hp.dropout = parse_number<double>(key, value, line);
        else if (key == "learning_rate") hp.learning_rate = parse_number<double>(key, value, line);
        else if (key == "optimizer") hp.optimizer = nn::optimizer_from_string(value);
        else if (key == "seed") hp.seed = parse_number<std::uint64_t>(key, value, line);
        else if (key == "threads") hp.threads = parse_number<std::size_t>(key, value, line);
        else if (key == "strict") hp.strict = detail::parse_bool(key, value, line);
        else if (key == "min_count") cfg.corpus.min_count = parse_number<std::size_t>(key, value, line);
        else if (key == "max_vocab") cfg.corpus.max_vocab = parse_number<std::size_t>(key, value, line);
        else if (key == "max_sentence_length") cfg.corpus.max_sentence_length = parse_number<std::size_t>(key, value, line);
        else if (key == "train_ratio") cfg.corpus.ratios.train = parse_number<double>(key, value, line);
        else if (key == "validation_ratio") cfg.corpus.ratios.validation = parse_number<double>(key, value, line);
        else if (key == "test_ratio") cfg.corpus.ratios.test = parse_number<double>(key, value, line);
        else if (key == "text_column") cfg.text_column = value;
        else if (key == "label_column") cfg.label_column = value;
        else if (key == "subsample") cfg.subsample = parse_number<std::size_t>(key, value, line);
        else throw InvalidArgument("config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    cfg.hp.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    return parse_config(in, std::move(base));
}

/// Picks `n` rows with a seeded shuffle, keeping their file order. n = 0 or
/// n >= rows.size() returns every row.
inline std::vector<text::LabeledText> subsample_rows(const std::vector<text::LabeledText>& rows, std::size_t n,
                                                     std::uint64_t seed) {
    if (n == 0 || n >= rows.size()) return rows;
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5ab5));
    rng.shuffle(order);
    order.resize(n);
    std::sort(order.begin(), order.end());
    std::vector<text::LabeledText> out;
    out.reserve(n);
    for (auto i : order) out.push_back(rows[i]);
    return out;
}

/// Test accuracy (percent) of always predicting the most common training label.
inline double majority_baseline(const text::PreparedCorpus& corpus) {
    const auto& test = corpus.split.test;
    if (test.empty()) return 0;
    std::vector<std::size_t> counts(corpus.labels.size(), 0);
    for (const auto& ex : corpus.split.train) ++counts[ex.label_id];
    const auto majority = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::size_t hits = 0;
    for (const auto& ex : test) hits += ex.label_id == majority;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
}

struct ExperimentResult {
    ExperimentConfig config;
    std::size_t rows_used = 0;
    text::PreparedCorpus corpus;
    TrainRun<double> run;
    metrics::EvalReport test;
    double majority_baseline = 0;
};

/// Prepares `rows`, trains and scores the final parameters on the test split.
/// `seed` drives the subsample, the split, initialization and batching.
inline ExperimentResult run_experiment(const std::vector<text::LabeledText>& rows, ExperimentConfig cfg,
                                       std::uint64_t seed, TrainOptions<double> opt = {}) {
    cfg.hp.seed = seed;
    cfg.corpus.seed = seed;
    cfg.corpus.min_sentence_length = std::max<std::size_t>(cfg.corpus.min_sentence_length, cfg.hp.max_width());
    ExperimentResult result;
    const auto used = subsample_rows(rows, cfg.subsample, seed);
    result.rows_used = used.size();
    result.corpus = text::prepare_corpus(used, cfg.corpus);
    result.config = cfg;
    result.run = train<double>(result.corpus, cfg.hp, std::move(opt));
    result.test = metrics::evaluate_model<double>(result.run.final_params, result.corpus.split.test,
                                                  result.corpus.labels.names());
    result.majority_baseline = majority_baseline(result.corpus);
    return result;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

/// Run summary. Everything that varies between identical runs (clock time)
/// lives under the single key "run_info".
inline nlohmann::json experiment_report_json(const ExperimentResult& r, int experiment_id = 0) {
    nlohmann::json j;
    if (experiment_id) j["experiment"] = experiment_id;
    j["hyperparams"] = r.config.hp;
    j["data"] = {{"rows_used", r.rows_used},
                 {"subsample", r.config.subsample},
                 {"train", r.corpus.split.train.size()},
                 {"validation", r.corpus.split.validation.size()},
                 {"test", r.corpus.split.test.size()},
                 {"vocab_size", r.corpus.vocab.size()},
                 {"vocab_hash", r.corpus.vocab.fingerprint()},
                 {"padded_length", r.corpus.padded_length},
                 {"labels", r.corpus.labels.names()}};
    j["test"] = metrics::report_to_json(r.test);
    j["majority_baseline"] = metrics::round_percent(r.majority_baseline);
    j["steps"] = r.run.steps;
    j["best_step"] = r.run.best_step;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : r.run.history) {
        hist.push_back({{"step", h.step},
                        {"train_loss", h.train_loss},
                        {"val_accuracy", metrics::round_percent(h.validation.accuracy)},
                        {"val_f1", metrics::round_percent(h.validation.macro_f1)}});
    }
    j["history"] = hist;
    j["run_info"] = {{"timestamp", utc_timestamp()}, {"wall_time_seconds", r.run.wall_time_seconds}};
    return j;
}

/// Writes report.json, report.txt, history.csv, vocab.tsv, labels.txt,
/// model.ckpt (final) and model_best.ckpt into `dir`.
inline void write_experiment_outputs(const ExperimentResult& r, const std::string& dir, int experiment_id = 0) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);
    {
        std::ofstream out(base / "report.json");
        out << experiment_report_json(r, experiment_id).dump(2) << "\n";
        if (!out) throw IoError("cannot write " + (base / "report.json").string());
    }
    {
        std::ofstream out(base / "report.txt");
        out << "test split (" << r.corpus.split.test.size() << " examples), majority baseline "
            << metrics::format_percent(r.majority_baseline) << "%\n"
            << metrics::format_report(r.test);
    }
    write_history_csv(r.run.history, (base / "history.csv").string());
    r.corpus.vocab.save((base / "vocab.tsv").string());
    r.corpus.labels.save((base / "labels.txt").string());
    nn::CheckpointMeta meta{r.config.hp, r.corpus.vocab.fingerprint(), r.corpus.labels.names(),
                            r.corpus.padded_length, r.run.steps};
    nn::save_checkpoint(r.run.final_params, meta, (base / "model.ckpt").string());
    meta.step = r.run.best_step;
    nn::save_checkpoint(r.run.best_params, meta, (base / "model_best.ckpt").string());
}

struct ReplicateOptions {
    std::size_t subsample = 0;
    std::size_t threads = 1;
    std::string out_dir;  // empty = no files
    std::string text_column{text::kDefaultTextColumn};
    std::string label_column{text::kDefaultLabelColumn};
    TrainOptions<double> train;
};

/// Loads the CSV at `data_path` and runs one of the published configurations.
inline ExperimentResult replicate_experiment(int experiment_id, const std::string& data_path, std::uint64_t seed,
                                             ReplicateOptions opt = {}) {
    ExperimentConfig cfg = experiment_preset(experiment_id);
    cfg.subsample = opt.subsample;
    cfg.hp.threads = opt.threads;
    cfg.text_column = opt.text_column;
    cfg.label_column = opt.label_column;
    if (!std::filesystem::exists(data_path)) {
        throw IoError("data file '" + data_path + "' not found");
    }
    const auto loaded = text::load_labeled_csv(data_path, cfg.text_column, cfg.label_column);
    auto result = run_experiment(loaded.rows, cfg, seed, std::move(opt.train));
    if (!opt.out_dir.empty()) {
        write_experiment_outputs(result, opt.out_dir, experiment_id);
    }
    return result;
}

}  // namespace textcnn::train
