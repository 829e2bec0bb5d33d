#pragma once

#include <utility>
#include <vector>

#include "textcnn/metrics/metrics.hpp"
#include "textcnn/nn/network.hpp"
#include "textcnn/text/dataset.hpp"

namespace textcnn::metrics {

/// Eval-mode forward on every example; the argmax class is the prediction.
template <typename T>
EvalReport evaluate_model(const nn::ParameterSet<T>& params,
                          const std::vector<text::EncodedExample>& dataset,
                          std::vector<std::string> labels = {}) {
    if (dataset.empty()) {
        throw InvalidArgument("evaluate_model: empty dataset");
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(dataset.size());
    for (const auto& ex : dataset) {
        const auto probs = nn::predict_probs<T>(ex.token_ids, params);
        pairs.emplace_back(ex.label_id, nn::argmax_of<T>(probs));
    }
    return metrics_from_confusion(confusion_from_predictions(pairs, params.num_classes(), std::move(labels)));
}

}  // namespace textcnn::metrics
