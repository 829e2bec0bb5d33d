// Trains the classifier on a generated three-topic corpus and prints the
// validation history and the test report.

#include <iostream>

#include "textcnn/train/experiment.hpp"

using namespace textcnn;

namespace {

std::vector<text::LabeledText> generated_corpus(std::size_t per_class, std::uint64_t seed) {
    const std::vector<std::pair<std::string, std::vector<std::string>>> topics{
        {"billing", {"invoice", "charge", "refund", "fee", "statement", "overdraft"}},
        {"mortgage", {"escrow", "lender", "foreclosure", "appraisal", "refinance", "closing"}},
        {"reporting", {"bureau", "dispute", "inaccurate", "score", "inquiry", "tradeline"}},
    };
    const std::vector<std::string> filler{"the", "my", "account", "was", "they", "said", "and", "not",
                                          "for", "months", "called", "again", "company", "still", "i"};
    Rng rng(seed);
    std::vector<text::LabeledText> rows;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (const auto& [label, markers] : topics) {
            std::string sentence;
            const std::size_t n = 8 + rng.below(10);
            for (std::size_t k = 0; k < n; ++k) {
                const bool marker = rng.uniform() < 0.2;
                const auto& w = marker ? markers[rng.below(markers.size())] : filler[rng.below(filler.size())];
                sentence += (k ? " " : "") + w;
            }
            rows.push_back({sentence, label});
        }
    }
    return rows;
}

}  // namespace

int main() {
    const auto rows = generated_corpus(200, 7);
    auto cfg = train::load_config(TEXTCNN_DEMO_DATA "/small_model.cfg");
    const auto r = train::run_experiment(rows, cfg, 7);
    std::cout << train::history_csv(r.run.history) << "\n";
    std::cout << "test split (" << r.corpus.split.test.size() << " examples), majority baseline "
              << metrics::format_percent(r.majority_baseline) << "%\n"
              << metrics::format_report(r.test);
    return 0;
}
