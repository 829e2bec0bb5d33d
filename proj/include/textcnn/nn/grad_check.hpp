#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "textcnn/nn/network.hpp"

namespace textcnn::nn {

struct GradCheckResult {
    double max_relative_error = 0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
    std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

/// Compares backward() with central differences (loss(θ+ε) − loss(θ−ε)) / 2ε
/// for every trainable scalar. Dropout is forced off. Embedding row 0 is
/// skipped: it is the pinned padding vector, not a parameter.
inline GradCheckResult grad_check(const ModelParams<double>& params, std::span<const TokenId> token_ids,
                                  std::size_t label, HyperParams hp, double epsilon = 1e-5) {
    hp.dropout = 0.0;
    Rng rng(0);
    const auto trace = forward<double>(token_ids, label, params, hp, Mode::Train, &rng);
    const auto analytic = backward(trace, params, hp);

    ModelParams<double> probe = params;
    auto loss_at = [&]() {
        return forward<double>(token_ids, label, probe, hp, Mode::Eval).loss.total;
    };

    std::vector<std::span<const double>> grads;
    analytic.for_each_tensor([&](const TensorRef<const double>& t) { grads.push_back(t.values); });

    GradCheckResult result;
    std::size_t tensor = 0;
    probe.for_each_tensor([&](TensorRef<double> t) {
        const std::size_t start = t.kind == TensorKind::Embedding ? t.cols : 0;
        for (std::size_t i = start; i < t.values.size(); ++i) {
            const double saved = t.values[i];
            t.values[i] = saved + epsilon;
            const double up = loss_at();
            t.values[i] = saved - epsilon;
            const double down = loss_at();
            t.values[i] = saved;
            const double numeric = (up - down) / (2 * epsilon);
            const double a = grads[tensor][i];
            const double err = relative_error(a, numeric);
            ++result.checked;
            if (result.checked == 1 || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_tensor = t.name;
                result.worst_index = i;
                result.worst_analytic = a;
                result.worst_numeric = numeric;
            }
        }
        ++tensor;
    });
    return result;
}

}  // namespace textcnn::nn
