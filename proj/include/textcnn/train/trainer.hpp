#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "textcnn/metrics/evaluate.hpp"
#include "textcnn/nn/network.hpp"
#include "textcnn/nn/params.hpp"
#include "textcnn/text/dataset.hpp"
#include "textcnn/train/batches.hpp"
#include "textcnn/train/optimizer.hpp"

namespace textcnn::train {

struct HistoryEntry {
    std::size_t step = 0;
    double train_loss = 0;  // mean batch loss since the previous evaluation
    metrics::EvalReport validation;
};

template <typename T>
struct TrainRun {
    nn::HyperParams hp;
    std::vector<HistoryEntry> history;
    nn::ModelParams<T> initial_params;
    nn::ModelParams<T> final_params;
    nn::ModelParams<T> best_params;  // highest validation accuracy seen (final if none)
    std::size_t best_step = 0;
    std::size_t steps = 0;
    double wall_time_seconds = 0;
};

template <typename T>
struct TrainOptions {
    std::optional<nn::ModelParams<T>> initial;
    nn::InitOptions init;
    std::function<void(std::size_t step, std::size_t total_steps)> on_step;
};

/// Loss and batch-mean gradient of one minibatch; gradients are written into
/// `grads` (zeroed first). Returns the mean loss.
template <typename T>
T batch_gradient(const std::vector<const text::EncodedExample*>& batch, const nn::ParameterSet<T>& params,
                 const nn::HyperParams& hp, std::uint64_t step_seed, nn::Gradients<T>& grads) {
    grads.set_zero();
    const std::size_t B = batch.size();
    const T scale = T{1} / static_cast<T>(B);

    auto run_one = [&](std::size_t i) {
        Rng rng(derive_seed(step_seed, i));
        return nn::forward<T>(batch[i]->token_ids, batch[i]->label_id, params, hp, nn::Mode::Train, &rng);
    };

    T loss_sum = T{};
    const std::size_t workers = std::min<std::size_t>(hp.threads, B);
    if (workers <= 1) {
        for (std::size_t i = 0; i < B; ++i) {
            auto tr = run_one(i);
            loss_sum += tr.loss.total;
            nn::accumulate_backward(tr, params, hp, grads, scale);
        }
    } else if (hp.strict) {
        // Forward passes in parallel, reduction in example order.
        std::vector<nn::ForwardTrace<T>> traces(B);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < B; i += workers) traces[i] = run_one(i);
            });
        }
        for (auto& th : pool) th.join();
        for (std::size_t i = 0; i < B; ++i) {
            loss_sum += traces[i].loss.total;
            nn::accumulate_backward(traces[i], params, hp, grads, scale);
        }
    } else {
        std::vector<nn::Gradients<T>> partial(workers, nn::Gradients<T>::like(params));
        std::vector<T> partial_loss(workers, T{});
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < B; i += workers) {
                    auto tr = run_one(i);
                    partial_loss[w] += tr.loss.total;
                    nn::accumulate_backward(tr, params, hp, partial[w], scale);
                }
            });
        }
        for (auto& th : pool) th.join();
        std::vector<std::span<T>> dst;
        grads.for_each_tensor([&](nn::TensorRef<T> t) { dst.push_back(t.values); });
        for (std::size_t w = 0; w < workers; ++w) {
            loss_sum += partial_loss[w];
            std::size_t k = 0;
            partial[w].for_each_tensor([&](nn::TensorRef<T> t) {
                for (std::size_t i = 0; i < t.values.size(); ++i) dst[k][i] += t.values[i];
                ++k;
            });
        }
    }
    return loss_sum / static_cast<T>(B);
}

/// Minibatch training: per batch, train-mode forward and backward for each
/// example, batch-mean gradient, one optimizer step. Every `eval_every` steps
/// the full validation split is evaluated in eval mode and logged.
template <typename T = double>
TrainRun<T> train(const text::PreparedCorpus& corpus, const nn::HyperParams& hp, TrainOptions<T> opt = {}) {
    hp.validate(corpus.padded_length);
    const auto& train_set = corpus.split.train;
    const auto& val_set = corpus.split.validation;
    const auto start = std::chrono::steady_clock::now();

    TrainRun<T> run;
    run.hp = hp;
    run.initial_params = opt.initial ? *opt.initial
                                     : nn::init_params<T>(hp, corpus.vocab.size(), corpus.labels.size(), opt.init);
    if (run.initial_params.vocab_size() != corpus.vocab.size() ||
        run.initial_params.num_classes() != corpus.labels.size()) {
        throw InvalidArgument("initial parameters do not match the corpus vocabulary/labels");
    }
    nn::ModelParams<T> params = run.initial_params;
    run.best_params = params;

    if (hp.epochs > 0) {
        if (val_set.empty()) {
            throw InvalidArgument("training needs a non-empty validation split");
        }
        BatchIterator batches(train_set.size(), hp.batch_size, hp.epochs, hp.seed);
        const std::size_t total = batches.total_batches();
        auto state = OptimizerState<T>::fresh(params, hp);
        auto grads = nn::Gradients<T>::like(params);
        std::vector<const text::EncodedExample*> members;
        double window_loss = 0;
        std::size_t window_steps = 0;
        double best_accuracy = -1;
        std::size_t step = 0;
        while (auto batch = batches.next()) {
            members.clear();
            for (auto i : batch->indices) members.push_back(&train_set[i]);
            const T batch_loss =
                batch_gradient<T>(members, params, hp, derive_seed(hp.seed, 0xd0d0000000ULL + step), grads);
            if (!std::isfinite(batch_loss)) {
                throw Error("non-finite training loss at step " + std::to_string(step + 1));
            }
            if (hp.optimizer == nn::Optimizer::Adam) {
                adam_step<T>(params, grads, state);
            } else {
                sgd_step<T>(params, grads, hp.learning_rate);
            }
            ++step;
            window_loss += static_cast<double>(batch_loss);
            ++window_steps;
            if (step % hp.eval_every == 0) {
                HistoryEntry entry;
                entry.step = step;
                entry.train_loss = window_loss / static_cast<double>(window_steps);
                entry.validation = metrics::evaluate_model<T>(params, val_set, corpus.labels.names());
                if (entry.validation.accuracy > best_accuracy) {
                    best_accuracy = entry.validation.accuracy;
                    run.best_params = params;
                    run.best_step = step;
                }
                run.history.push_back(std::move(entry));
                window_loss = 0;
                window_steps = 0;
            }
            if (opt.on_step) opt.on_step(step, total);
        }
        run.steps = step;
        if (run.history.empty()) {
            run.best_params = params;
            run.best_step = step;
        }
    }
    run.final_params = std::move(params);
    run.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

inline std::string history_csv(const std::vector<HistoryEntry>& history) {
    std::string out = "step,train_loss,val_accuracy,val_precision,val_recall,val_f1\n";
    char buf[256];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.10f,%.4f,%.4f,%.4f,%.4f\n", h.step, h.train_loss,
                      h.validation.accuracy, h.validation.macro_precision, h.validation.macro_recall,
                      h.validation.macro_f1);
        out += buf;
    }
    return out;
}

inline void write_history_csv(const std::vector<HistoryEntry>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write history file '" + path + "'");
    }
    out << history_csv(history);
}

}  // namespace textcnn::train
