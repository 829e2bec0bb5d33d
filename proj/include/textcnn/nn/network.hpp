#pragma once

#include <optional>
#include <span>
#include <vector>

#include "textcnn/common.hpp"
#include "textcnn/nn/hyperparams.hpp"
#include "textcnn/nn/layers.hpp"
#include "textcnn/nn/params.hpp"

namespace textcnn::nn {

/// Everything forward() computed that backward() needs.
template <typename T>
struct ForwardTrace {
    Mode mode = Mode::Eval;
    std::vector<TokenId> token_ids;
    std::size_t label = 0;
    Matrix<T> embedded;                   // L x d
    std::vector<std::vector<T>> conv_pre; // per pooled feature j = w*F + f, length L-h+1
    std::vector<std::size_t> argmax;      // per pooled feature, time step of the max
    std::vector<T> pooled;                // F*|widths|, width-major then filter index
    std::vector<T> dropout_mask;
    std::vector<T> dropped;               // pooled after dropout
    std::vector<T> logits;
    std::vector<T> probs;
    LossValue<T> loss{};
};

namespace detail {

template <typename T>
void run_forward(ForwardTrace<T>& tr, const ParameterSet<T>& params, double drop_prob, Rng* rng) {
    const std::size_t L = tr.token_ids.size();
    const std::size_t d = params.embedding_dim();
    const std::size_t F = params.filters_per_width();
    tr.embedded = embed<T>(tr.token_ids, params.embedding);

    // Windows that start past the last real token see only zero rows, so their
    // pre-activation is exactly the bias.
    std::size_t active = L;
    while (active > 0 && tr.token_ids[active - 1] == 0) {
        --active;
    }

    const std::size_t P = F * params.widths.size();
    tr.conv_pre.assign(P, {});
    tr.argmax.assign(P, 0);
    tr.pooled.assign(P, T{});
    const T* base = tr.embedded.flat().data();
    for (std::size_t w = 0; w < params.widths.size(); ++w) {
        const std::size_t h = params.widths[w];
        if (h > L) {
            throw InvalidArgument("filter width " + std::to_string(h) + " exceeds sentence length " +
                                  std::to_string(L));
        }
        const std::size_t steps = L - h + 1;
        const std::size_t computed = std::min(steps, active);
        for (std::size_t f = 0; f < F; ++f) {
            const std::size_t j = w * F + f;
            const T bias = params.filter_biases[w][f];
            const T* filt = params.filters[w].row(f).data();
            auto& pre = tr.conv_pre[j];
            pre.resize(steps);
            for (std::size_t t = 0; t < computed; ++t) {
                pre[t] = dot(base + t * d, filt, h * d) + bias;
            }
            std::fill(pre.begin() + static_cast<std::ptrdiff_t>(computed), pre.end(), bias);
            std::size_t best = 0;
            T best_val = relu(pre[0]);
            for (std::size_t t = 1; t < steps; ++t) {
                const T v = relu(pre[t]);
                if (v > best_val) {
                    best_val = v;
                    best = t;
                }
            }
            tr.argmax[j] = best;
            tr.pooled[j] = best_val;
        }
    }

    if (tr.mode == Mode::Train) {
        if (rng == nullptr && drop_prob > 0) {
            throw InvalidArgument("train-mode forward with dropout needs an RNG");
        }
        Rng unused(0);
        auto drop = dropout_apply<T>(tr.pooled, drop_prob, Mode::Train, rng ? *rng : unused);
        tr.dropped = std::move(drop.values);
        tr.dropout_mask = std::move(drop.mask);
    } else {
        tr.dropped = tr.pooled;
        tr.dropout_mask.assign(P, T{1});
    }
    auto out = dense_softmax<T>(tr.dropped, params);
    tr.logits = std::move(out.logits);
    tr.probs = std::move(out.probs);
}

}  // namespace detail

/// embed -> convolution + ReLU per filter -> max over time -> concatenate ->
/// dropout (train mode only) -> dense softmax -> cross-entropy + L2.
template <typename T>
ForwardTrace<T> forward(std::span<const TokenId> token_ids, std::size_t label,
                        const ParameterSet<T>& params, const HyperParams& hp, Mode mode,
                        Rng* rng = nullptr) {
    if (label >= params.num_classes()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range");
    }
    ForwardTrace<T> tr;
    tr.mode = mode;
    tr.token_ids.assign(token_ids.begin(), token_ids.end());
    tr.label = label;
    detail::run_forward(tr, params, hp.dropout, rng);
    tr.loss = loss<T>(tr.probs, label, params, hp.l2_lambda);
    return tr;
}

/// Eval-mode class probabilities.
template <typename T>
std::vector<T> predict_probs(std::span<const TokenId> token_ids, const ParameterSet<T>& params) {
    ForwardTrace<T> tr;
    tr.mode = Mode::Eval;
    tr.token_ids.assign(token_ids.begin(), token_ids.end());
    detail::run_forward(tr, params, 0.0, nullptr);
    return std::move(tr.probs);
}

template <typename T>
std::size_t argmax_of(std::span<const T> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Adds scale * dLoss/dtheta for one traced example into `grads`.
template <typename T>
void accumulate_backward(const ForwardTrace<T>& tr, const ParameterSet<T>& params,
                         const HyperParams& hp, ParameterSet<T>& grads, T scale = T{1}) {
    if (tr.mode != Mode::Train) {
        throw InvalidArgument("backward needs a train-mode forward trace");
    }
    const std::size_t C = params.num_classes();
    const std::size_t P = params.pooled_size();
    const std::size_t F = params.filters_per_width();
    const std::size_t d = params.embedding_dim();

    std::vector<T> dlogits(C);
    for (std::size_t c = 0; c < C; ++c) {
        dlogits[c] = (tr.probs[c] - (c == tr.label ? T{1} : T{})) * scale;
        grads.dense_bias[c] += dlogits[c];
    }

    std::vector<T> dpooled(P, T{});
    for (std::size_t j = 0; j < P; ++j) {
        const auto wrow = params.dense_weights.row(j);
        auto grow = grads.dense_weights.row(j);
        const T x = tr.dropped[j];
        T back = T{};
        for (std::size_t c = 0; c < C; ++c) {
            grow[c] += x * dlogits[c];
            back += wrow[c] * dlogits[c];
        }
        dpooled[j] = back * tr.dropout_mask[j];
    }

    const T* emb = tr.embedded.flat().data();
    for (std::size_t w = 0; w < params.widths.size(); ++w) {
        const std::size_t h = params.widths[w];
        for (std::size_t f = 0; f < F; ++f) {
            const std::size_t j = w * F + f;
            const std::size_t t = tr.argmax[j];
            // ReLU passes gradient only when the winning window was positive.
            if (dpooled[j] == T{} || !(tr.conv_pre[j][t] > T{})) {
                continue;
            }
            const T g = dpooled[j];
            grads.filter_biases[w][f] += g;
            auto gfilt = grads.filters[w].row(f);
            const auto filt = params.filters[w].row(f);
            const T* window = emb + t * d;
            for (std::size_t k = 0; k < h * d; ++k) {
                gfilt[k] += g * window[k];
            }
            for (std::size_t r = 0; r < h; ++r) {
                const TokenId id = tr.token_ids[t + r];
                if (id == 0) {
                    continue;
                }
                auto gemb = grads.embedding.row(id);
                for (std::size_t e = 0; e < d; ++e) {
                    gemb[e] += g * filt[r * d + e];
                }
            }
        }
    }

    if (hp.l2_lambda > 0) {
        const T coeff = static_cast<T>(2.0 * hp.l2_lambda) * scale;
        for (std::size_t w = 0; w < params.widths.size(); ++w) {
            auto src = params.filters[w].flat();
            auto dst = grads.filters[w].flat();
            for (std::size_t i = 0; i < src.size(); ++i) {
                dst[i] += coeff * src[i];
            }
        }
        auto src = params.dense_weights.flat();
        auto dst = grads.dense_weights.flat();
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] += coeff * src[i];
        }
    }
    grads.zero_padding_row();
}

template <typename T>
Gradients<T> backward(const ForwardTrace<T>& tr, const ParameterSet<T>& params, const HyperParams& hp) {
    auto grads = Gradients<T>::like(params);
    accumulate_backward(tr, params, hp, grads);
    return grads;
}

}  // namespace textcnn::nn
