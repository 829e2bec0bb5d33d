#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "textcnn/common.hpp"
#include "textcnn/nn/matrix.hpp"
#include "textcnn/nn/params.hpp"

namespace textcnn::nn {

enum class Mode { Train, Eval };

inline constexpr double kLogFloor = 1e-12;

/// Row i of the result is embedding row token_ids[i].
template <typename T>
Matrix<T> embed(std::span<const TokenId> token_ids, const Matrix<T>& table) {
    Matrix<T> out(token_ids.size(), table.cols());
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        if (token_ids[i] >= table.rows()) {
            throw InvalidArgument("token id " + std::to_string(token_ids[i]) +
                                  " outside embedding table of " + std::to_string(table.rows()) + " rows");
        }
        std::copy_n(table.row(token_ids[i]).begin(), table.cols(), out.row(i).begin());
    }
    return out;
}

template <typename T>
T relu(T x) {
    return x > T{} ? x : T{};
}

/// Valid convolution of an h x d filter (flattened row-major) down the rows of
/// an L x d sentence matrix: one pre-activation per window start, L - h + 1 total.
template <typename T>
std::vector<T> conv_preactivation(const Matrix<T>& sentence, std::span<const T> filter,
                                  std::size_t width, T bias) {
    const std::size_t d = sentence.cols();
    if (width == 0 || width > sentence.rows()) {
        throw InvalidArgument("filter width " + std::to_string(width) +
                              " does not fit a sentence of " + std::to_string(sentence.rows()) + " rows");
    }
    if (filter.size() != width * d) {
        throw InvalidArgument("filter size does not match width x embedding dimension");
    }
    const std::size_t steps = sentence.rows() - width + 1;
    std::vector<T> out(steps);
    const T* base = sentence.flat().data();
    for (std::size_t t = 0; t < steps; ++t) {
        // Rows t..t+h-1 are contiguous, so the window is one dot product.
        out[t] = dot(base + t * d, filter.data(), width * d) + bias;
    }
    return out;
}

template <typename T>
std::vector<T> conv_forward(const Matrix<T>& sentence, std::span<const T> filter, std::size_t width,
                            T bias) {
    auto out = conv_preactivation(sentence, filter, width, bias);
    for (auto& v : out) {
        v = relu(v);
    }
    return out;
}

template <typename T>
struct PoolResult {
    T value;
    std::size_t argmax;  // first index holding the maximum
};

template <typename T>
PoolResult<T> max_over_time(std::span<const T> feature_map) {
    if (feature_map.empty()) {
        throw InvalidArgument("max_over_time: empty feature map");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < feature_map.size(); ++i) {
        if (feature_map[i] > feature_map[best]) {
            best = i;
        }
    }
    return {feature_map[best], best};
}

template <typename T>
struct DropoutResult {
    std::vector<T> values;
    std::vector<T> mask;  // multiplier per entry: 0 or 1/(1-p); all ones in eval mode
};

/// Inverted dropout: in train mode every entry is dropped with probability
/// `drop_prob` and survivors are scaled by 1/(1 - drop_prob).
template <typename T>
DropoutResult<T> dropout_apply(std::span<const T> input, double drop_prob, Mode mode, Rng& rng) {
    if (!(drop_prob >= 0 && drop_prob < 1)) {
        throw InvalidArgument("dropout probability must be in [0, 1)");
    }
    DropoutResult<T> r;
    r.values.assign(input.begin(), input.end());
    r.mask.assign(input.size(), T{1});
    if (mode == Mode::Eval || drop_prob == 0) {
        return r;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - drop_prob));
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.mask[i] = rng.bernoulli(drop_prob) ? T{} : scale;
        r.values[i] = input[i] * r.mask[i];
    }
    return r;
}

/// Max-shifted softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
    const T top = *std::max_element(logits.begin(), logits.end());
    std::vector<T> probs(logits.size());
    T total = T{};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - top);
        total += probs[i];
    }
    for (auto& p : probs) {
        p /= total;
    }
    return probs;
}

template <typename T>
struct SoftmaxOutput {
    std::vector<T> logits;
    std::vector<T> probs;
};

template <typename T>
SoftmaxOutput<T> dense_softmax(std::span<const T> pooled, const ParameterSet<T>& params) {
    const auto& W = params.dense_weights;
    if (pooled.size() != W.rows()) {
        throw InvalidArgument("dense layer expects " + std::to_string(W.rows()) + " features, got " +
                              std::to_string(pooled.size()));
    }
    SoftmaxOutput<T> out;
    out.logits = params.dense_bias;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
        const T x = pooled[j];
        if (x == T{}) {
            continue;
        }
        const auto row = W.row(j);
        for (std::size_t c = 0; c < out.logits.size(); ++c) {
            out.logits[c] += x * row[c];
        }
    }
    out.probs = softmax<T>(out.logits);
    return out;
}

/// lambda * sum of squares over convolution filters and dense weights.
template <typename T>
T l2_penalty(const ParameterSet<T>& params, double lambda) {
    if (lambda == 0) {
        return T{};
    }
    T sum = T{};
    params.for_each_tensor([&](const TensorRef<const T>& t) {
        if (t.kind != TensorKind::Weight) {
            return;
        }
        for (T v : t.values) {
            sum += v * v;
        }
    });
    return static_cast<T>(lambda) * sum;
}

template <typename T>
struct LossValue {
    T cross_entropy;
    T penalty;
    T total;
    bool clamped;  // probs[label] fell below the log floor
};

template <typename T>
LossValue<T> loss(std::span<const T> probs, std::size_t label, const ParameterSet<T>& params,
                  double lambda) {
    if (label >= probs.size()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                              std::to_string(probs.size()) + " classes");
    }
    const T floor = static_cast<T>(kLogFloor);
    const bool clamped = probs[label] < floor;
    const T ce = -std::log(clamped ? floor : probs[label]);
    const T pen = l2_penalty(params, lambda);
    return {ce, pen, ce + pen, clamped};
}

}  // namespace textcnn::nn
