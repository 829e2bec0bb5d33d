#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "textcnn/metrics/evaluate.hpp"
#include "textcnn/nn/checkpoint.hpp"
#include "textcnn/service/http_service.hpp"
#include "textcnn/train/experiment.hpp"

namespace textcnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline volatile std::sig_atomic_t g_stop_requested = 0;

inline void on_stop_signal(int) { g_stop_requested = 1; }

struct DataOptions {
    std::string data;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string text_column;
    std::string label_column;
    std::optional<std::size_t> subsample;
};

inline void add_data_options(CLI::App* cmd, DataOptions& o, bool data_required = true) {
    auto* d = cmd->add_option("--data", o.data, "Labeled CSV file");
    if (data_required) d->required();
    cmd->add_option("--config", o.config, "Experiment config file (key = value lines)");
    cmd->add_option("--seed", o.seed, "Seed for subsample, split, initialization and batching");
    cmd->add_option("--text-column", o.text_column, "CSV column holding the text");
    cmd->add_option("--label-column", o.label_column, "CSV column holding the category");
    cmd->add_option("--subsample", o.subsample, "Use this many rows (0 = all)");
}

/// Config file first, then command-line overrides.
inline train::ExperimentConfig resolve_config(const DataOptions& o, train::ExperimentConfig base = {}) {
    auto cfg = o.config.empty() ? std::move(base) : train::load_config(o.config, std::move(base));
    if (!o.text_column.empty()) cfg.text_column = o.text_column;
    if (!o.label_column.empty()) cfg.label_column = o.label_column;
    if (o.subsample) cfg.subsample = *o.subsample;
    return cfg;
}

inline std::uint64_t resolve_seed(const DataOptions& o, const train::ExperimentConfig& cfg) {
    return o.seed ? *o.seed : cfg.hp.seed;
}

inline std::vector<text::LabeledText> load_rows(const std::string& path, const train::ExperimentConfig& cfg,
                                                std::ostream& err) {
    if (!fs::exists(path)) throw IoError("data file '" + path + "' not found");
    auto loaded = text::load_labeled_csv(path, cfg.text_column, cfg.label_column);
    if (loaded.dropped_empty || !loaded.issues.empty()) {
        err << "note: " << loaded.dropped_empty << " empty rows dropped, " << loaded.issues.size()
            << " malformed rows skipped\n";
    }
    return std::move(loaded.rows);
}

inline void write_encoded(const std::vector<text::EncodedExample>& examples, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& ex : examples) {
        out << ex.label_id << '\t';
        for (std::size_t i = 0; i < ex.token_ids.size(); ++i) out << (i ? " " : "") << ex.token_ids[i];
        out << '\n';
    }
}

inline void print_summary(std::ostream& out, const train::ExperimentResult& r) {
    out << "rows " << r.rows_used << " (train " << r.corpus.split.train.size() << ", validation "
        << r.corpus.split.validation.size() << ", test " << r.corpus.split.test.size() << "), vocab "
        << r.corpus.vocab.size() << ", padded length " << r.corpus.padded_length << "\n"
        << "steps " << r.run.steps << ", best validation step " << r.run.best_step << "\n"
        << "test accuracy " << metrics::format_percent(r.test.accuracy) << "  precision "
        << metrics::format_percent(r.test.macro_precision) << "  recall "
        << metrics::format_percent(r.test.macro_recall) << "  f1 " << metrics::format_percent(r.test.macro_f1)
        << "  (majority baseline " << metrics::format_percent(r.majority_baseline) << ")\n";
}

inline std::string default_data_dir() {
    if (const char* d = std::getenv("TEXTCNN_DATA_DIR"); d && *d) return d;
    return "textcnn_data";
}

}  // namespace detail

/// Entry point of the textcnn tool. `args` excludes the program name.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"Convolutional text classifier and question-answering service", "textcnn"};
    app.require_subcommand(1);
    app.fallthrough(false);

    // prepare
    detail::DataOptions prep;
    std::string prep_out;
    auto* prepare = app.add_subcommand("prepare", "Tokenize, split and encode a CSV; write vocabulary and splits");
    detail::add_data_options(prepare, prep);
    prepare->add_option("--out", prep_out, "Output directory")->required();

    // train
    detail::DataOptions tr;
    std::string tr_out;
    std::size_t tr_threads = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier and write reports and checkpoints");
    detail::add_data_options(train_cmd, tr);
    train_cmd->add_option("--out", tr_out, "Output directory")->required();
    train_cmd->add_option("--threads", tr_threads, "Gradient worker threads (overrides the config)");

    // evaluate
    detail::DataOptions ev;
    std::string ev_model, ev_vocab, ev_labels, ev_json, ev_split = "test";
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on one split of a CSV");
    evaluate->add_option("--model", ev_model, "Checkpoint file")->required()->check(CLI::ExistingFile);
    detail::add_data_options(evaluate, ev);
    evaluate->add_option("--split", ev_split, "Which split to score")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}));
    evaluate->add_option("--vocab", ev_vocab, "Vocabulary file (default: vocab.tsv next to the model)");
    evaluate->add_option("--labels", ev_labels, "Label file (default: labels.txt next to the model)");
    evaluate->add_option("--json", ev_json, "Also write the report as JSON to this path");

    // replicate
    int rep_experiment = 0;
    std::string rep_data, rep_out;
    std::uint64_t rep_seed = 1;
    std::size_t rep_subsample = 0, rep_threads = 1;
    auto* replicate = app.add_subcommand("replicate", "Run one of the published experiment configurations");
    replicate->add_option("--experiment", rep_experiment, "Experiment number")
        ->required()
        ->check(CLI::IsMember({1, 2, 3}));
    replicate->add_option("--data", rep_data, "Consumer complaints CSV")->required();
    replicate->add_option("--seed", rep_seed, "Seed");
    replicate->add_option("--subsample", rep_subsample, "Use this many rows (0 = all)");
    replicate->add_option("--out", rep_out, "Output directory for report and checkpoints");
    replicate->add_option("--threads", rep_threads, "Gradient worker threads")->check(CLI::PositiveNumber);

    // domain
    std::string dom_dir = detail::default_data_dir();
    auto* domain = app.add_subcommand("domain", "Manage question-answering domains on disk");
    domain->add_option("--data-dir", dom_dir, "Domain storage directory (env TEXTCNN_DATA_DIR)");
    domain->require_subcommand(1);
    std::string dom_id;
    auto* dom_create = domain->add_subcommand("create", "Register an empty domain");
    dom_create->add_option("id", dom_id, "Domain id")->required();
    std::string ing_data, ing_text = "text", ing_label = "category";
    auto* dom_ingest = domain->add_subcommand("ingest", "Add documents from a CSV");
    dom_ingest->add_option("id", dom_id, "Domain id")->required();
    dom_ingest->add_option("--data", ing_data, "CSV of documents")->required();
    dom_ingest->add_option("--text-column", ing_text, "Column holding the document text");
    dom_ingest->add_option("--label-column", ing_label, "Column holding the category");
    std::string dtr_config;
    std::optional<std::uint64_t> dtr_seed;
    auto* dom_train = domain->add_subcommand("train", "Train the domain classifier");
    dom_train->add_option("id", dom_id, "Domain id")->required();
    dom_train->add_option("--config", dtr_config, "Hyperparameter overrides (key = value lines)");
    dom_train->add_option("--seed", dtr_seed, "Seed");
    std::string ask_question;
    auto* dom_ask = domain->add_subcommand("ask", "Answer a question from one domain or all of them");
    dom_ask->add_option("question", ask_question, "Question text")->required();
    dom_ask->add_option("--id", dom_id, "Domain id (default: route across every trained domain)");

    // serve
    service::ServiceConfig svc;
    std::optional<std::string> sv_host, sv_dir;
    std::optional<int> sv_port;
    double sv_max_seconds = 0;
    auto* serve = app.add_subcommand("serve", "Run the HTTP JSON service");
    serve->add_option("--host", sv_host, "Listen address (default 127.0.0.1)");
    serve->add_option("--port", sv_port, "Listen port, 0 for any free port (env TEXTCNN_PORT)");
    serve->add_option("--data-dir", sv_dir, "Domain storage directory (env TEXTCNN_DATA_DIR)");
    serve->add_option("--cors-origin", svc.cors_origins, "Allowed browser origin; repeatable, * for any");
    serve->add_option("--max-body-bytes", svc.max_body_bytes, "Largest accepted request body");
    serve->add_option("--threads", svc.threads, "Request worker threads")->check(CLI::PositiveNumber);
    serve->add_option("--max-seconds", sv_max_seconds, "Stop after this many seconds (0 = until interrupted)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        err << app.help();
        return kExitUsage;
    }

    try {
        if (*prepare) {
            const auto cfg = detail::resolve_config(prep);
            const auto seed = detail::resolve_seed(prep, cfg);
            auto c = cfg.corpus;
            c.seed = seed;
            c.min_sentence_length = std::max<std::size_t>(c.min_sentence_length, cfg.hp.max_width());
            const auto rows = train::subsample_rows(detail::load_rows(prep.data, cfg, err), cfg.subsample, seed);
            const auto corpus = text::prepare_corpus(rows, c);
            const fs::path dir(prep_out);
            fs::create_directories(dir);
            corpus.vocab.save((dir / "vocab.tsv").string());
            corpus.labels.save((dir / "labels.txt").string());
            detail::write_encoded(corpus.split.train, dir / "train.tsv");
            detail::write_encoded(corpus.split.validation, dir / "validation.tsv");
            detail::write_encoded(corpus.split.test, dir / "test.tsv");
            json summary{{"rows", rows.size()},
                         {"seed", seed},
                         {"train", corpus.split.train.size()},
                         {"validation", corpus.split.validation.size()},
                         {"test", corpus.split.test.size()},
                         {"vocab_size", corpus.vocab.size()},
                         {"vocab_hash", corpus.vocab.fingerprint()},
                         {"padded_length", corpus.padded_length},
                         {"labels", corpus.labels.names()}};
            std::ofstream(dir / "prepare.json") << summary.dump(2) << "\n";
            out << "prepared " << rows.size() << " rows into " << dir.string() << " (vocab "
                << corpus.vocab.size() << ", padded length " << corpus.padded_length << ")\n";
            return kExitOk;
        }

        if (*train_cmd) {
            auto cfg = detail::resolve_config(tr);
            if (tr_threads) cfg.hp.threads = tr_threads;
            const auto seed = detail::resolve_seed(tr, cfg);
            const auto rows = detail::load_rows(tr.data, cfg, err);
            const auto r = train::run_experiment(rows, cfg, seed);
            train::write_experiment_outputs(r, tr_out);
            detail::print_summary(out, r);
            out << "wrote " << tr_out << "\n";
            return kExitOk;
        }

        if (*evaluate) {
            const fs::path model_dir = fs::path(ev_model).parent_path();
            if (ev_vocab.empty()) ev_vocab = (model_dir / "vocab.tsv").string();
            if (ev_labels.empty()) ev_labels = (model_dir / "labels.txt").string();
            const auto vocab = text::Vocabulary::load(ev_vocab);
            const auto labels = text::LabelSet::load(ev_labels);
            const auto ck = nn::load_checkpoint(ev_model, vocab.fingerprint());
            if (ck.meta.labels != labels.names()) {
                throw IoError("label file '" + ev_labels + "' does not match the checkpoint");
            }
            const auto cfg = detail::resolve_config(ev);
            const auto seed = detail::resolve_seed(ev, cfg);
            const auto rows = train::subsample_rows(detail::load_rows(ev.data, cfg, err), cfg.subsample, seed);
            // Same seeded split as training used, so "test" means the held-out rows.
            const auto split = text::split_dataset(rows, cfg.corpus.ratios, seed);
            std::vector<text::LabeledText> chosen;
            if (ev_split == "train" || ev_split == "all") chosen.insert(chosen.end(), split.train.begin(), split.train.end());
            if (ev_split == "validation" || ev_split == "all") {
                chosen.insert(chosen.end(), split.validation.begin(), split.validation.end());
            }
            if (ev_split == "test" || ev_split == "all") chosen.insert(chosen.end(), split.test.begin(), split.test.end());
            std::vector<text::EncodedExample> examples;
            std::size_t unknown = 0;
            for (const auto& r : chosen) {
                if (!labels.contains(r.label)) {
                    ++unknown;
                    continue;
                }
                examples.push_back({text::encode_and_pad(text::normalize_tokenize(r.text), vocab,
                                                         ck.meta.padded_length),
                                    labels.id_of(r.label), r.text});
            }
            if (unknown) err << "note: " << unknown << " rows with categories unknown to the model skipped\n";
            const auto report = metrics::evaluate_model<double>(ck.params, examples, labels.names());
            out << ev_split << " split (" << examples.size() << " examples)\n" << metrics::format_report(report);
            if (!ev_json.empty()) {
                std::ofstream j(ev_json);
                j << metrics::report_to_json(report).dump(2) << "\n";
                if (!j) throw IoError("cannot write " + ev_json);
            }
            return kExitOk;
        }

        if (*replicate) {
            train::ReplicateOptions opt;
            opt.subsample = rep_subsample;
            opt.threads = rep_threads;
            opt.out_dir = rep_out;
            const auto r = train::replicate_experiment(rep_experiment, rep_data, rep_seed, opt);
            out << "experiment " << rep_experiment << "\n";
            detail::print_summary(out, r);
            if (!rep_out.empty()) out << "wrote " << rep_out << "\n";
            return kExitOk;
        }

        if (*domain) {
            qa::DomainRegistry reg(dom_dir);
            if (*dom_create) {
                reg.create(dom_id);
                out << service::summary_json(reg.get(dom_id)->summary()).dump(2) << "\n";
            } else if (*dom_ingest) {
                if (!fs::exists(ing_data)) throw IoError("data file '" + ing_data + "' not found");
                const auto loaded = text::load_labeled_csv(ing_data, ing_text, ing_label);
                auto d = reg.get(dom_id);
                d->ingest(loaded.rows);
                out << service::summary_json(d->summary()).dump(2) << "\n";
            } else if (*dom_train) {
                auto d = reg.get(dom_id);
                train::ExperimentConfig base;
                base.hp = qa::default_domain_hyperparams();
                auto hp = dtr_config.empty() ? base.hp : train::load_config(dtr_config, base).hp;
                if (dtr_seed) hp.seed = *dtr_seed;
                const auto run = d->train(hp);
                auto j = service::summary_json(d->summary());
                j["steps"] = run.steps;
                if (!run.history.empty()) {
                    j["train_accuracy"] = metrics::round_percent(run.history.back().validation.accuracy);
                }
                out << j.dump(2) << "\n";
            } else if (*dom_ask) {
                const auto a = dom_id.empty() ? reg.answer_general(ask_question)
                                              : qa::retrieve_answer(*reg.get(dom_id)->snapshot(), ask_question);
                out << service::answer_json(a).dump(2) << "\n";
            }
            return kExitOk;
        }

        if (*serve) {
            svc.apply_env();
            if (sv_host) svc.host = *sv_host;
            if (sv_port) svc.port = *sv_port;
            if (sv_dir) svc.data_dir = *sv_dir;
            if (svc.data_dir.empty()) svc.data_dir = detail::default_data_dir();
            service::QaService server(svc);
            const int port = server.start();
            out << "listening on http://" << svc.host << ":" << port << " (data " << svc.data_dir << ")"
                << std::endl;
            detail::g_stop_requested = 0;
            auto prev_int = std::signal(SIGINT, detail::on_stop_signal);
            auto prev_term = std::signal(SIGTERM, detail::on_stop_signal);
            const auto t0 = std::chrono::steady_clock::now();
            while (!detail::g_stop_requested) {
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
                if (sv_max_seconds > 0 &&
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= sv_max_seconds) {
                    break;
                }
            }
            std::signal(SIGINT, prev_int);
            std::signal(SIGTERM, prev_term);
            server.stop();
            out << "stopped" << std::endl;
            return kExitOk;
        }
    } catch (const qa::QaError& e) {
        err << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace textcnn::cli
