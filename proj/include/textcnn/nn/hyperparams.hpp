#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "textcnn/common.hpp"

namespace textcnn::nn {

enum class Optimizer { Adam, Sgd };

inline std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

inline Optimizer optimizer_from_string(const std::string& s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "sgd") return Optimizer::Sgd;
    throw InvalidArgument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

/// Training and architecture knobs. Defaults are the baseline parameter table
/// (1 epoch, batch 37, 32 filters per width over widths 3/4/5, 50-dim
/// embeddings, L2 0.1, evaluation every 200 steps, dropout 0.5).
struct HyperParams {
    std::size_t epochs = 1;
    std::size_t batch_size = 37;
    std::size_t filters_per_width = 32;
    std::vector<std::size_t> widths{3, 4, 5};
    std::size_t embedding_dim = 50;
    double l2_lambda = 0.1;
    std::size_t eval_every = 200;
    double dropout = 0.5;  // probability of dropping a pooled feature
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;

    Optimizer optimizer = Optimizer::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    bool strict = true;       // fixed reduction order, bit-reproducible
    std::size_t threads = 1;  // per-example gradient workers

    std::size_t max_width() const {
        return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end());
    }

    std::size_t pooled_size() const { return filters_per_width * widths.size(); }

    /// Throws InvalidArgument when the settings cannot describe a model for
    /// sentences padded to `padded_length` (pass 0 to skip the width check).
    void validate(std::size_t padded_length = 0) const {
        if (widths.empty()) throw InvalidArgument("at least one filter width is required");
        for (auto w : widths) {
            if (w == 0) throw InvalidArgument("filter widths must be positive");
            if (padded_length && w > padded_length) {
                throw InvalidArgument("filter width " + std::to_string(w) +
                                      " exceeds padded sentence length " +
                                      std::to_string(padded_length));
            }
        }
        if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
        if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
        if (filters_per_width < 1) throw InvalidArgument("filters_per_width must be >= 1");
        if (embedding_dim < 1) throw InvalidArgument("embedding_dim must be >= 1");
        if (!(l2_lambda >= 0)) throw InvalidArgument("l2_lambda must be nonnegative");
        if (!(dropout >= 0 && dropout < 1)) throw InvalidArgument("dropout must be in [0, 1)");
        if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
        if (threads < 1) throw InvalidArgument("threads must be >= 1");
    }

    bool operator==(const HyperParams&) const = default;
};

inline void to_json(nlohmann::json& j, const HyperParams& hp) {
    j = nlohmann::json{{"epochs", hp.epochs},
                       {"batch_size", hp.batch_size},
                       {"filters_per_width", hp.filters_per_width},
                       {"widths", hp.widths},
                       {"embedding_dim", hp.embedding_dim},
                       {"l2_lambda", hp.l2_lambda},
                       {"eval_every", hp.eval_every},
                       {"dropout", hp.dropout},
                       {"learning_rate", hp.learning_rate},
                       {"seed", hp.seed},
                       {"optimizer", to_string(hp.optimizer)},
                       {"adam_beta1", hp.adam_beta1},
                       {"adam_beta2", hp.adam_beta2},
                       {"adam_epsilon", hp.adam_epsilon},
                       {"strict", hp.strict},
                       {"threads", hp.threads}};
}

/// Missing keys keep their current value, so a partial object overrides defaults.
inline void from_json(const nlohmann::json& j, HyperParams& hp) {
    if (!j.is_object()) {
        throw InvalidArgument("hyperparameters must be a JSON object");
    }
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            j.at(key).get_to(field);
        }
    };
    take("epochs", hp.epochs);
    take("batch_size", hp.batch_size);
    take("filters_per_width", hp.filters_per_width);
    take("widths", hp.widths);
    take("embedding_dim", hp.embedding_dim);
    take("l2_lambda", hp.l2_lambda);
    take("eval_every", hp.eval_every);
    take("dropout", hp.dropout);
    take("learning_rate", hp.learning_rate);
    take("seed", hp.seed);
    if (j.contains("optimizer")) {
        hp.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    }
    take("adam_beta1", hp.adam_beta1);
    take("adam_beta2", hp.adam_beta2);
    take("adam_epsilon", hp.adam_epsilon);
    take("strict", hp.strict);
    take("threads", hp.threads);
}

}  // namespace textcnn::nn
