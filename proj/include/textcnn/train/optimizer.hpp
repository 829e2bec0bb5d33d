#pragma once

#include <cmath>
#include <cstdint>

#include "textcnn/common.hpp"
#include "textcnn/nn/hyperparams.hpp"
#include "textcnn/nn/params.hpp"

namespace textcnn::train {

template <typename T>
struct OptimizerState {
    nn::ParameterSet<T> first_moment;
    nn::ParameterSet<T> second_moment;
    std::uint64_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerState fresh(const nn::ParameterSet<T>& params, const nn::HyperParams& hp) {
        OptimizerState s;
        s.first_moment = nn::ParameterSet<T>::zeros_like(params);
        s.second_moment = nn::ParameterSet<T>::zeros_like(params);
        s.learning_rate = hp.learning_rate;
        s.beta1 = hp.adam_beta1;
        s.beta2 = hp.adam_beta2;
        s.epsilon = hp.adam_epsilon;
        return s;
    }
};

namespace detail {

template <typename T>
void require_finite(const nn::ParameterSet<T>& grads) {
    grads.for_each_tensor([](const nn::TensorRef<const T>& t) {
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            if (!std::isfinite(t.values[i])) {
                throw Error("non-finite gradient in tensor '" + t.name + "' at index " + std::to_string(i));
            }
        }
    });
}

template <typename T>
std::vector<std::span<T>> spans_of(nn::ParameterSet<T>& p) {
    std::vector<std::span<T>> out;
    p.for_each_tensor([&](nn::TensorRef<T> t) { out.push_back(t.values); });
    return out;
}

}  // namespace detail

/// Bias-corrected adaptive-moment update. The padding embedding row is
/// re-zeroed afterwards.
template <typename T>
void adam_step(nn::ParameterSet<T>& params, const nn::ParameterSet<T>& grads, OptimizerState<T>& state) {
    if (!params.shapes_match(grads) || !params.shapes_match(state.first_moment)) {
        throw InvalidArgument("adam_step: parameter, gradient and moment shapes differ");
    }
    detail::require_finite(grads);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
    const T corr2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
    const T lr = static_cast<T>(state.learning_rate);
    const T eps = static_cast<T>(state.epsilon);

    auto p = detail::spans_of(params);
    auto g = detail::spans_of(const_cast<nn::ParameterSet<T>&>(grads));
    auto m = detail::spans_of(state.first_moment);
    auto v = detail::spans_of(state.second_moment);
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            const T gi = g[k][i];
            m[k][i] = b1 * m[k][i] + (T{1} - b1) * gi;
            v[k][i] = b2 * v[k][i] + (T{1} - b2) * gi * gi;
            const T mhat = m[k][i] / corr1;
            const T vhat = v[k][i] / corr2;
            p[k][i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    params.zero_padding_row();
}

/// Plain gradient descent, w -= lr * g.
template <typename T>
void sgd_step(nn::ParameterSet<T>& params, const nn::ParameterSet<T>& grads, double learning_rate) {
    if (!params.shapes_match(grads)) {
        throw InvalidArgument("sgd_step: parameter and gradient shapes differ");
    }
    detail::require_finite(grads);
    auto p = detail::spans_of(params);
    auto g = detail::spans_of(const_cast<nn::ParameterSet<T>&>(grads));
    const T lr = static_cast<T>(learning_rate);
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            p[k][i] -= lr * g[k][i];
        }
    }
    params.zero_padding_row();
}

}  // namespace textcnn::train
