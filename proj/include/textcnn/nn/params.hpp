#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "textcnn/common.hpp"
#include "textcnn/nn/hyperparams.hpp"
#include "textcnn/nn/matrix.hpp"

namespace textcnn::nn {

enum class TensorKind { Embedding, Weight, Bias };

/// View of one parameter tensor as used by the optimizer, gradient checker
/// and checkpoint code.
template <typename T>
struct TensorRef {
    std::string name;
    TensorKind kind;
    std::size_t rows;
    std::size_t cols;
    std::span<T> values;
};

/// The trainable tensors of the classifier:
///   embedding      V x d, row 0 is the padding vector and stays zero
///   filters[w]     F x (h*d) for width widths[w]; row f is filter f laid out as h rows of d
///   filter_biases  F per width
///   dense_weights  (F*|widths|) x C
///   dense_bias     C
template <typename T>
struct ParameterSet {
    std::vector<std::size_t> widths;
    Matrix<T> embedding;
    std::vector<Matrix<T>> filters;
    std::vector<std::vector<T>> filter_biases;
    Matrix<T> dense_weights;
    std::vector<T> dense_bias;

    std::size_t vocab_size() const { return embedding.rows(); }
    std::size_t embedding_dim() const { return embedding.cols(); }
    std::size_t filters_per_width() const { return filters.empty() ? 0 : filters.front().rows(); }
    std::size_t pooled_size() const { return dense_weights.rows(); }
    std::size_t num_classes() const { return dense_bias.size(); }

    /// All-zero tensors with the given shapes.
    static ParameterSet zeros(const std::vector<std::size_t>& widths, std::size_t vocab,
                              std::size_t dim, std::size_t filters_per_width, std::size_t classes) {
        ParameterSet p;
        p.widths = widths;
        p.embedding = Matrix<T>(vocab, dim);
        for (auto h : widths) {
            p.filters.emplace_back(filters_per_width, h * dim);
            p.filter_biases.emplace_back(filters_per_width, T{});
        }
        p.dense_weights = Matrix<T>(filters_per_width * widths.size(), classes);
        p.dense_bias.assign(classes, T{});
        return p;
    }

    template <typename U>
    static ParameterSet zeros_like(const ParameterSet<U>& other) {
        return zeros(other.widths, other.vocab_size(), other.embedding_dim(),
                     other.filters_per_width(), other.num_classes());
    }

    /// Tensors in checkpoint order: embedding, then per width (filters, bias),
    /// then dense weights and dense bias.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(TensorRef<T>{"embedding", TensorKind::Embedding, embedding.rows(), embedding.cols(),
                        embedding.flat()});
        for (std::size_t w = 0; w < widths.size(); ++w) {
            const std::string suffix = std::to_string(widths[w]);
            fn(TensorRef<T>{"filters_h" + suffix, TensorKind::Weight, filters[w].rows(),
                            filters[w].cols(), filters[w].flat()});
            fn(TensorRef<T>{"filter_bias_h" + suffix, TensorKind::Bias, 1,
                            filter_biases[w].size(), std::span<T>(filter_biases[w])});
        }
        fn(TensorRef<T>{"dense_weights", TensorKind::Weight, dense_weights.rows(),
                        dense_weights.cols(), dense_weights.flat()});
        fn(TensorRef<T>{"dense_bias", TensorKind::Bias, 1, dense_bias.size(),
                        std::span<T>(dense_bias)});
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<ParameterSet*>(this)->for_each_tensor([&](TensorRef<T> ref) {
            fn(TensorRef<const T>{std::move(ref.name), ref.kind, ref.rows, ref.cols,
                                  std::span<const T>(ref.values)});
        });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_tensor([&](const TensorRef<const T>& t) { n += t.values.size(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const TensorRef<const T>& t) {
            for (T v : t.values) {
                ok = ok && std::isfinite(v);
            }
        });
        return ok;
    }

    bool shapes_match(const ParameterSet& other) const {
        if (widths != other.widths || filters.size() != other.filters.size()) return false;
        if (embedding.rows() != other.embedding.rows() || embedding.cols() != other.embedding.cols())
            return false;
        for (std::size_t w = 0; w < filters.size(); ++w) {
            if (filters[w].rows() != other.filters[w].rows() ||
                filters[w].cols() != other.filters[w].cols() ||
                filter_biases[w].size() != other.filter_biases[w].size())
                return false;
        }
        return dense_weights.rows() == other.dense_weights.rows() &&
               dense_weights.cols() == other.dense_weights.cols() &&
               dense_bias.size() == other.dense_bias.size();
    }

    void zero_padding_row() {
        for (auto& v : embedding.row(0)) {
            v = T{};
        }
    }

    bool operator==(const ParameterSet&) const = default;
};

template <typename T>
struct ModelParams : ParameterSet<T> {
    ModelParams() = default;
    explicit ModelParams(ParameterSet<T> base) : ParameterSet<T>(std::move(base)) {}
};

/// dLoss/dtheta, shape-identical to ModelParams.
template <typename T>
struct Gradients : ParameterSet<T> {
    Gradients() = default;
    explicit Gradients(ParameterSet<T> base) : ParameterSet<T>(std::move(base)) {}

    static Gradients like(const ParameterSet<T>& params) {
        return Gradients(ParameterSet<T>::zeros_like(params));
    }

    void set_zero() {
        this->for_each_tensor([](TensorRef<T> t) { std::fill(t.values.begin(), t.values.end(), T{}); });
    }
};

struct InitOptions {
    bool zero_dense = false;  // dense weights and bias all zero
};

/// Embedding rows 1..V-1 ~ U(-0.25, 0.25); filters and dense weights use
/// Glorot-uniform bounds; biases start at zero.
template <typename T = double>
ModelParams<T> init_params(const HyperParams& hp, std::size_t vocab_size, std::size_t num_classes,
                           InitOptions opt = {}) {
    if (vocab_size < 2) {
        throw InvalidArgument("init_params: vocabulary must hold at least the 2 reserved tokens");
    }
    if (num_classes < 2) {
        throw InvalidArgument("init_params: at least 2 classes are required");
    }
    hp.validate();
    ModelParams<T> p(ParameterSet<T>::zeros(hp.widths, vocab_size, hp.embedding_dim,
                                            hp.filters_per_width, num_classes));
    Rng rng(derive_seed(hp.seed, 0x1417));
    for (std::size_t r = 1; r < vocab_size; ++r) {
        for (auto& v : p.embedding.row(r)) {
            v = static_cast<T>(rng.uniform(-0.25, 0.25));
        }
    }
    for (std::size_t w = 0; w < hp.widths.size(); ++w) {
        const double fan_in = static_cast<double>(hp.widths[w] * hp.embedding_dim);
        const double fan_out = static_cast<double>(hp.filters_per_width);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : p.filters[w].flat()) {
            v = static_cast<T>(rng.uniform(-bound, bound));
        }
    }
    if (!opt.zero_dense) {
        const double bound = std::sqrt(6.0 / static_cast<double>(hp.pooled_size() + num_classes));
        for (auto& v : p.dense_weights.flat()) {
            v = static_cast<T>(rng.uniform(-bound, bound));
        }
    }
    return p;
}

template <typename To, typename From>
ModelParams<To> convert_params(const ParameterSet<From>& src) {
    ModelParams<To> dst(ParameterSet<To>::zeros_like(src));
    std::vector<std::span<const From>> in;
    src.for_each_tensor([&](const TensorRef<const From>& t) { in.push_back(t.values); });
    std::size_t k = 0;
    dst.for_each_tensor([&](TensorRef<To> t) {
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            t.values[i] = static_cast<To>(in[k][i]);
        }
        ++k;
    });
    return dst;
}

}  // namespace textcnn::nn
