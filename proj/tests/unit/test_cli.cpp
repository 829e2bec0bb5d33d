#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/oracles.hpp"
#include "textcnn/service/cli.hpp"

using namespace textcnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::cli_main(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::size_t line_count(const fs::path& p) {
    const auto s = read_file(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::vector<text::LabeledText> small_corpus() {
    test_support::SyntheticCorpusSpec spec;
    spec.classes = 3;
    spec.per_class = 60;
    spec.seed = 11;
    return test_support::make_synthetic_corpus(spec);
}

const char* kSmallConfig =
    "# small model for tests\n"
    "epochs = 3\n"
    "batch_size = 16\n"
    "filters_per_width = 8\n"
    "widths = 2, 3\n"
    "embedding_dim = 16\n"
    "l2_lambda = 0\n"
    "eval_every = 10\n"
    "text_column = body\n"
    "label_column = topic\n";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    auto none = run({});
    EXPECT_EQ(none.code, 2);
    EXPECT_NE(none.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"train", "--bogus"}).code, 2);
    EXPECT_EQ(run({"train", "--data", "x.csv"}).code, 2);  // --out missing
    EXPECT_EQ(run({"replicate", "--experiment", "4", "--data", "x.csv"}).code, 2);
    EXPECT_EQ(run({"evaluate", "--model", "/no/such/model.ckpt", "--data", "x.csv"}).code, 2);
    EXPECT_EQ(run({"domain"}).code, 2);
}

TEST(Cli, HelpOnEverySubcommand) {
    for (const std::vector<std::string>& args :
         {std::vector<std::string>{"--help"}, {"prepare", "--help"}, {"train", "--help"}, {"evaluate", "--help"},
          {"replicate", "--help"}, {"domain", "--help"}, {"domain", "create", "--help"},
          {"domain", "ingest", "--help"}, {"domain", "train", "--help"}, {"domain", "ask", "--help"},
          {"serve", "--help"}}) {
        auto r = run(args);
        EXPECT_EQ(r.code, 0) << args[0];
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << args[0];
    }
}

TEST(Cli, RuntimeFailuresExitOne) {
    auto r = run({"replicate", "--experiment", "1", "--data", "/no/such/file.csv"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("not found"), std::string::npos);
    const auto dir = fresh_dir("textcnn_cli_fail");
    write_file(dir / "bad.cfg", "epochs = lots\n");
    write_file(dir / "d.csv", test_support::to_csv(small_corpus(), "body", "topic"));
    EXPECT_EQ(run({"train", "--data", (dir / "d.csv").string(), "--config", (dir / "bad.cfg").string(), "--out",
                   (dir / "o").string()})
                  .code,
              1);
    EXPECT_EQ(run({"serve", "--port", "70000", "--data-dir", (dir / "srv").string()}).code, 1);
}

TEST(Cli, PrepareWritesEncodedSplits) {
    const auto dir = fresh_dir("textcnn_cli_prepare");
    write_file(dir / "d.csv", test_support::to_csv(small_corpus(), "body", "topic"));
    write_file(dir / "small.cfg", kSmallConfig);
    auto r = run({"prepare", "--data", (dir / "d.csv").string(), "--config", (dir / "small.cfg").string(), "--seed",
                  "5", "--out", (dir / "prep").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = read_json(dir / "prep" / "prepare.json");
    EXPECT_EQ(summary["rows"], 180);
    EXPECT_EQ(line_count(dir / "prep" / "train.tsv"), summary["train"].get<std::size_t>());
    EXPECT_EQ(line_count(dir / "prep" / "validation.tsv"), summary["validation"].get<std::size_t>());
    EXPECT_EQ(line_count(dir / "prep" / "test.tsv"), summary["test"].get<std::size_t>());
    EXPECT_EQ(summary["train"].get<std::size_t>() + summary["validation"].get<std::size_t>() +
                  summary["test"].get<std::size_t>(),
              180u);
    const auto vocab = text::Vocabulary::load((dir / "prep" / "vocab.tsv").string());
    EXPECT_EQ(vocab.fingerprint(), summary["vocab_hash"].get<std::uint64_t>());
    std::istringstream first(read_file(dir / "prep" / "train.tsv"));
    std::string line;
    std::getline(first, line);
    const auto ids = line.substr(line.find('\t') + 1);
    EXPECT_EQ(static_cast<std::size_t>(std::count(ids.begin(), ids.end(), ' ')) + 1,
              summary["padded_length"].get<std::size_t>());
}

TEST(Cli, EvaluateMatchesTheTrainingReport) {
    const auto dir = fresh_dir("textcnn_cli_eval");
    write_file(dir / "d.csv", test_support::to_csv(small_corpus(), "body", "topic"));
    write_file(dir / "small.cfg", kSmallConfig);
    const auto data = (dir / "d.csv").string();
    const auto cfg = (dir / "small.cfg").string();
    auto t = run({"train", "--data", data, "--config", cfg, "--seed", "9", "--out", (dir / "run").string()});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_NE(t.out.find("test accuracy"), std::string::npos);
    for (const char* f : {"report.json", "report.txt", "history.csv", "vocab.tsv", "labels.txt", "model.ckpt",
                          "model_best.ckpt"}) {
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    }
    const auto report = read_json(dir / "run" / "report.json");

    auto e = run({"evaluate", "--model", (dir / "run" / "model.ckpt").string(), "--data", data, "--config", cfg,
                  "--seed", "9", "--json", (dir / "eval.json").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto eval = read_json(dir / "eval.json");
    EXPECT_EQ(eval, report["test"]);

    // A missing vocabulary file is a runtime failure.
    auto wrong = run({"evaluate", "--model", (dir / "run" / "model.ckpt").string(), "--data", data, "--config", cfg,
                      "--vocab", (dir / "missing.tsv").string()});
    EXPECT_EQ(wrong.code, 1);
}

TEST(Cli, ReplicateIsReproducible) {
    const auto dir = fresh_dir("textcnn_cli_replicate");
    test_support::SyntheticCorpusSpec spec;
    spec.classes = 4;
    spec.per_class = 100;
    spec.seed = 3;
    write_file(dir / "complaints.csv", test_support::to_csv(test_support::make_synthetic_corpus(spec),
                                                            std::string(text::kDefaultTextColumn),
                                                            std::string(text::kDefaultLabelColumn)));
    std::vector<json> reports;
    for (const char* name : {"a", "b"}) {
        auto r = run({"replicate", "--experiment", "1", "--data", (dir / "complaints.csv").string(), "--seed", "4",
                      "--subsample", "300", "--out", (dir / name).string()});
        ASSERT_EQ(r.code, 0) << r.err;
        auto j = read_json(dir / name / "report.json");
        EXPECT_EQ(j["experiment"], 1);
        EXPECT_EQ(j["data"]["rows_used"], 300);
        EXPECT_EQ(j["hyperparams"]["l2_lambda"], 0.1);
        EXPECT_TRUE(j.contains("run_info"));
        j.erase("run_info");
        reports.push_back(j);
    }
    EXPECT_EQ(reports[0].dump(), reports[1].dump());
    EXPECT_EQ(read_file(dir / "a" / "history.csv"), read_file(dir / "b" / "history.csv"));
    EXPECT_EQ(read_file(dir / "a" / "model.ckpt"), read_file(dir / "b" / "model.ckpt"));
}

TEST(Cli, DomainLifecycle) {
    const auto dir = fresh_dir("textcnn_cli_domain");
    const auto store = (dir / "store").string();
    write_file(dir / "docs.csv", test_support::to_csv(test_support::toy_qa_corpus(), "text", "category"));

    EXPECT_EQ(run({"domain", "--data-dir", store, "ask", "Mars has two small moons."}).code, 1);
    auto c = run({"domain", "--data-dir", store, "create", "toy"});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(json::parse(c.out)["status"], "created");
    auto dup = run({"domain", "--data-dir", store, "create", "toy"});
    EXPECT_EQ(dup.code, 1);
    EXPECT_NE(dup.err.find("DOMAIN_EXISTS"), std::string::npos);

    auto i = run({"domain", "--data-dir", store, "ingest", "toy", "--data", (dir / "docs.csv").string()});
    ASSERT_EQ(i.code, 0) << i.err;
    EXPECT_EQ(json::parse(i.out)["kb_size"], 18);
    auto t = run({"domain", "--data-dir", store, "train", "toy", "--seed", "3"});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(json::parse(t.out)["status"], "trained");

    for (const std::vector<std::string>& extra : {std::vector<std::string>{"--id", "toy"}, {}}) {
        std::vector<std::string> args{"domain", "--data-dir", store, "ask", "Comets have bright icy tails."};
        args.insert(args.end(), extra.begin(), extra.end());
        auto a = run(args);
        ASSERT_EQ(a.code, 0) << a.err;
        const auto j = json::parse(a.out);
        EXPECT_EQ(j["answer"], "Comets have bright icy tails.");
        EXPECT_NEAR(j["similarity"].get<double>(), 1.0, 1e-6);
        EXPECT_EQ(j["category"], "space");
    }
}

TEST(Cli, ServeStartsAndStops) {
    const auto dir = fresh_dir("textcnn_cli_serve");
    auto r = run({"serve", "--port", "0", "--data-dir", (dir / "store").string(), "--max-seconds", "0.2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("listening on http://127.0.0.1:"), std::string::npos);
    EXPECT_NE(r.out.find("stopped"), std::string::npos);
}
