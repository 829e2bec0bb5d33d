#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support/oracles.hpp"
#include "textcnn/text/csv.hpp"
#include "textcnn/text/dataset.hpp"
#include "textcnn/text/tokenizer.hpp"
#include "textcnn/text/vocabulary.hpp"

using namespace textcnn;
using namespace textcnn::text;

namespace {

CsvLoadResult load_string(const std::string& csv, const std::string& text_col = "text",
                          const std::string& label_col = "label") {
    std::istringstream in(csv);
    return load_labeled_csv(in, text_col, label_col);
}

}  // namespace

TEST(Csv, DropsEmptyTextRows) {
    auto r = load_string("label,text\na,hello there\nb,   \nc,\"quoted, text\"\n");
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.dropped_empty, 1u);
    EXPECT_EQ(r.raw_rows, 3u);
    EXPECT_EQ(r.rows[0].text, "hello there");
    EXPECT_EQ(r.rows[1].text, "quoted, text");
    EXPECT_EQ(r.rows[1].label, "c");
}

TEST(Csv, HeaderOnly) {
    auto r = load_string("label,text\n");
    EXPECT_TRUE(r.rows.empty());
    EXPECT_EQ(r.dropped_empty, 0u);
}

TEST(Csv, QuotedFieldsSpanLinesAndEscapeQuotes) {
    auto r = load_string("label,text\r\nx,\"line one\nline \"\"two\"\"\"\r\n");
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].text, "line one\nline \"two\"");
}

TEST(Csv, MalformedRowsAreSkippedAndReported) {
    auto r = load_string("label,text\na,ok\nb,too,many\nc,bad\"quote\nd,fine\n");
    ASSERT_EQ(r.rows.size(), 2u);
    ASSERT_EQ(r.issues.size(), 2u);
    EXPECT_EQ(r.issues[0].row, 2u);
    EXPECT_EQ(r.issues[1].row, 3u);
    EXPECT_EQ(r.raw_rows, 4u);
}

TEST(Csv, UnterminatedQuoteAtEof) {
    auto r = load_string("label,text\na,\"never closed\n");
    EXPECT_TRUE(r.rows.empty());
    EXPECT_EQ(r.issues.size(), 1u);
}

TEST(Csv, MissingColumnAndMissingFile) {
    EXPECT_THROW(load_string("label,body\na,b\n"), InvalidArgument);
    EXPECT_THROW(load_labeled_csv("/nonexistent/file.csv", "text", "label"), IoError);
}

TEST(Csv, DefaultComplaintColumns) {
    auto r = load_string("Product,Consumer complaint narrative\nMortgage,I was charged twice\n",
                         "Consumer complaint narrative", "Product");
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].label, "Mortgage");
}

TEST(Csv, EscapeRoundTrip) {
    const std::vector<LabeledText> rows = {{"a, \"b\"\nc", "l1"}, {"plain", "l2"}};
    auto r = load_string(test_support::to_csv(rows, "text", "label"));
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows, rows);
}

TEST(Tokenizer, Examples) {
    using V = std::vector<std::string>;
    EXPECT_EQ(normalize_tokenize("The CAT sat."), (V{"the", "cat", "sat"}));
    EXPECT_EQ(normalize_tokenize(""), V{});
    // Golden output of the trimming rule: '$' and '.' inside a token survive.
    EXPECT_EQ(normalize_tokenize("I was charged $25.00 twice!"),
              (V{"i", "was", "charged", "$25.00", "twice"}));
    EXPECT_EQ(normalize_tokenize("  ... -- (50%)  "), (V{"50%"}));
    EXPECT_EQ(normalize_tokenize("don't\tstop\nXX/YY"), (V{"don't", "stop", "xx/yy"}));
}

TEST(Tokenizer, IdempotentOnRejoinedOutput) {
    Rng rng(3);
    const std::string alphabet = "abcXYZ019$%.,!?'\"()- \t";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const auto n = rng.below(40);
        for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
        const auto once = normalize_tokenize(s);
        EXPECT_EQ(normalize_tokenize(join_tokens(once)), once) << s;
    }
}

TEST(Vocabulary, RankingRule) {
    auto v = Vocabulary::build({{"the", "cat"}, {"the", "dog"}}, 1);
    ASSERT_EQ(v.size(), 5u);
    EXPECT_EQ(v.id_of("<pad>"), 0u);
    EXPECT_EQ(v.id_of("<unk>"), 1u);
    EXPECT_EQ(v.id_of("the"), 2u);
    EXPECT_EQ(v.id_of("cat"), 3u);
    EXPECT_EQ(v.id_of("dog"), 4u);
}

TEST(Vocabulary, EmptyCorpusAndThreshold) {
    EXPECT_EQ(Vocabulary::build({}, 1).size(), 2u);
    auto v = Vocabulary::build({{"a", "a", "x"}, {"a"}}, 2);
    EXPECT_FALSE(v.find("x").has_value());
    EXPECT_EQ(encode_and_pad({"x"}, v, 1), (std::vector<TokenId>{Vocabulary::kUnkId}));
    EXPECT_THROW(Vocabulary::build({}, 0), InvalidArgument);
}

TEST(Vocabulary, MaxSizeTruncates) {
    auto v = Vocabulary::build({{"a", "b", "b", "c", "c", "c"}}, 1, 2);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_EQ(v.token(2), "c");
    EXPECT_EQ(v.token(3), "b");
}

TEST(Vocabulary, RoundTripAndPersistence) {
    auto v = Vocabulary::build({{"alpha", "beta", "gamma", "beta"}, {"$5", "50%"}}, 1);
    for (TokenId i = 0; i < v.size(); ++i) {
        EXPECT_EQ(v.id_of(v.token(i)), i);
    }
    std::stringstream ss;
    v.save(ss);
    EXPECT_EQ(ss.str().substr(0, 15), "0\t<pad>\n1\t<unk>");
    auto back = Vocabulary::load(ss);
    EXPECT_EQ(back, v);
    EXPECT_EQ(back.fingerprint(), v.fingerprint());

    std::stringstream bad("0\t<pad>\n2\tx\n");
    EXPECT_THROW(Vocabulary::load(bad), IoError);
}

TEST(Vocabulary, OrderStableUnderFrequencyPreservingPermutation) {
    // Swapping documents 1 and 2 keeps every count and every first occurrence
    // order (their tokens are first seen in document 0).
    std::vector<std::vector<std::string>> docs = {
        {"a", "b", "c", "d"}, {"b", "c", "c"}, {"d", "a", "b"}};
    auto permuted = docs;
    std::swap(permuted[1], permuted[2]);
    EXPECT_EQ(Vocabulary::build(docs, 1), Vocabulary::build(permuted, 1));
}

TEST(Encode, PadTruncateOov) {
    auto v = Vocabulary::build({{"the", "cat"}, {"the", "dog"}}, 1);
    EXPECT_EQ(encode_and_pad({"the", "cat"}, v, 4), (std::vector<TokenId>{2, 3, 0, 0}));
    EXPECT_EQ(encode_and_pad({"zebra"}, v, 2), (std::vector<TokenId>{1, 0}));
    EXPECT_EQ(encode_and_pad({"the", "cat", "dog", "the", "cat", "dog"}, v, 4),
              (std::vector<TokenId>{2, 3, 4, 2}));
    EXPECT_THROW(encode_and_pad({"the"}, v, 0), InvalidArgument);
}

TEST(Encode, LengthAlwaysExactlyL) {
    auto v = Vocabulary::build({{"a", "b", "c"}}, 1);
    Rng rng(11);
    const std::vector<std::string> pool = {"a", "b", "c", "zz", "qq"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> toks(rng.below(30));
        for (auto& t : toks) t = pool[rng.below(pool.size())];
        const std::size_t L = 1 + rng.below(20);
        const auto ids = encode_and_pad(toks, v, L);
        ASSERT_EQ(ids.size(), L);
        for (std::size_t i = 0; i < L; ++i) {
            ASSERT_LT(ids[i], v.size());
            if (i >= toks.size()) ASSERT_EQ(ids[i], 0u);
        }
    }
}

TEST(Split, FloorSizes) {
    std::vector<int> items(10);
    std::iota(items.begin(), items.end(), 0);
    auto s = split_dataset(items, {0.8, 0.1, 0.1}, 5);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.validation.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, Deterministic) {
    std::vector<int> items(50);
    std::iota(items.begin(), items.end(), 0);
    auto a = split_dataset(items, {0.8, 0.1, 0.1}, 99);
    auto b = split_dataset(items, {0.8, 0.1, 0.1}, 99);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_EQ(a.test, b.test);
    auto c = split_dataset(items, {0.8, 0.1, 0.1}, 100);
    EXPECT_NE(a.train, c.train);
}

TEST(Split, SeventyFifteenFifteenPartitionsSource) {
    std::vector<int> items(100);
    std::iota(items.begin(), items.end(), 0);
    auto s = split_dataset(items, {0.7, 0.15, 0.15}, 42);
    EXPECT_EQ(s.train.size(), 70u);
    EXPECT_EQ(s.validation.size(), 15u);
    EXPECT_EQ(s.test.size(), 15u);
    // Brute-force comparison: every source item appears in exactly one partition.
    for (int x : items) {
        const int hits = static_cast<int>(std::count(s.train.begin(), s.train.end(), x) +
                                          std::count(s.validation.begin(), s.validation.end(), x) +
                                          std::count(s.test.begin(), s.test.end(), x));
        EXPECT_EQ(hits, 1) << x;
    }
}

TEST(Split, PartitionPropertyRandomSizes) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 10 + rng.below(300);
        std::vector<std::size_t> items(n);
        std::iota(items.begin(), items.end(), std::size_t{0});
        auto s = split_dataset(items, SplitRatios{0.6, 0.2, 0.2}, rng.next());
        std::multiset<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.validation.begin(), s.validation.end());
        all.insert(s.test.begin(), s.test.end());
        ASSERT_EQ(all, std::multiset<std::size_t>(items.begin(), items.end()));
    }
}

TEST(Split, Errors) {
    std::vector<int> items(4);
    EXPECT_THROW(split_dataset(items, {0.8, 0.1, 0.1}, 1), InvalidArgument);
    EXPECT_THROW(split_dataset(items, {0.5, 0.5, 0.1}, 1), InvalidArgument);
    EXPECT_THROW(split_dataset(items, {1.0, 0.0, 0.0}, 1), InvalidArgument);
}

TEST(LabelSet, DenseSortedIds) {
    auto l = LabelSet::from_names(std::vector<std::string>{"b", "a", "b", "c"});
    EXPECT_EQ(l.size(), 3u);
    EXPECT_EQ(l.id_of("a"), 0u);
    EXPECT_EQ(l.id_of("c"), 2u);
    EXPECT_THROW(l.id_of("zzz"), InvalidArgument);
    EXPECT_THROW(LabelSet::from_names(std::vector<std::string>{"only"}), InvalidArgument);
}

TEST(PrepareCorpus, SharedMapsAndPaddingRule) {
    auto rows = test_support::make_synthetic_corpus({.classes = 3, .per_class = 20});
    CorpusOptions opt;
    opt.seed = 4;
    opt.max_sentence_length = 8;
    auto corpus = prepare_corpus(rows, opt);
    EXPECT_EQ(corpus.labels.size(), 3u);
    EXPECT_EQ(corpus.split.train.size() + corpus.split.validation.size() + corpus.split.test.size(), rows.size());
    EXPECT_EQ(corpus.padded_length, 8u);  // capped: synthetic sentences run to 12 tokens
    for (const auto* part : {&corpus.split.train, &corpus.split.validation, &corpus.split.test}) {
        for (const auto& ex : *part) {
            ASSERT_EQ(ex.token_ids.size(), corpus.padded_length);
            ASSERT_LT(ex.label_id, 3u);
        }
    }
    // Short corpora are padded up to the widest filter.
    auto tiny = prepare_corpus({{"a b", "x"}, {"c", "y"}, {"d", "x"}, {"e f", "y"}, {"g", "x"}},
                               {.ratios = {0.6, 0.2, 0.2}, .seed = 1});
    EXPECT_EQ(tiny.padded_length, 5u);
}
