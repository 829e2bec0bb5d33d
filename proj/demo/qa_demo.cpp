// Builds one in-memory domain from demo/data/toy_documents.csv, trains it,
// answers a few questions and learns from one accepted answer.

#include <cstdio>
#include <iostream>

#include "textcnn/qa/registry.hpp"

using namespace textcnn;

namespace {

void show(const std::string& q, const qa::Answer& a) {
    std::printf("Q: %s\n   -> %s\n      [%s, confidence %.3f, similarity %.3f%s]\n", q.c_str(), a.text.c_str(),
                a.category.c_str(), a.confidence, a.similarity, a.fallback ? ", fallback" : "");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string csv = argc > 1 ? argv[1] : TEXTCNN_DEMO_DATA "/toy_documents.csv";
    const auto docs = text::load_labeled_csv(csv, "text", "category");

    qa::DomainRegistry registry;
    auto domain = registry.create("toy");
    domain->ingest(docs.rows);
    const auto run = domain->train(qa::default_domain_hyperparams());
    const auto s = domain->snapshot();
    std::printf("trained on %zu sentences in %zu steps (%.2f s), %zu categories\n\n", s->kb.size(), run.steps,
                run.wall_time_seconds, s->labels.size());

    for (const std::string q : {"Which fruit is yellow?", "What lives aboard the space station?",
                                "Who saved the penalty?", "Mars has two small moons."}) {
        show(q, registry.answer_general(q));
    }

    const std::string q = "Which planet is the biggest?";
    const auto a = registry.answer_general(q);
    show(q, a);
    domain->kb_learn(q, a, true);
    std::printf("\naccepted; knowledge base now holds %zu entries\n", domain->snapshot()->kb.size());
    show(q, registry.answer_general(q));
    return 0;
}
