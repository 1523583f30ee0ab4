#include "glossdom/dataset.hpp"

#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "glossdom/error.hpp"
#include "glossdom/labelspace.hpp"
#include "test_support.hpp"

namespace glossdom {
namespace {

using testing::TempDir;
using testing::write_text;

TEST(LoadCorpus, ParsesTsvRow) {
  TempDir dir;
  write_text(dir / "gold.tsv",
             "id\tgloss\tlabel\nbn:hospital\ta health facility where patients receive treatment\tMedicine\n");
  const auto corpus = load_corpus(dir / "gold.tsv", CorpusFormat::kTsv);
  ASSERT_EQ(corpus.size(), 1u);
  EXPECT_EQ(corpus[0].id, "bn:hospital");
  EXPECT_EQ(corpus[0].gloss, "a health facility where patients receive treatment");
  EXPECT_EQ(corpus[0].gold_label, "Medicine");
}

TEST(LoadCorpus, EmptyFileGivesEmptyCorpus) {
  TempDir dir;
  write_text(dir / "empty.tsv", "");
  write_text(dir / "empty.jsonl", "");
  EXPECT_TRUE(load_corpus(dir / "empty.tsv").empty());
  EXPECT_TRUE(load_corpus(dir / "empty.jsonl").empty());
}

TEST(LoadCorpus, UnlabelledRowsHaveNoGold) {
  TempDir dir;
  const std::string content =
      "id\tgloss\tlabel\n"
      "a\tfirst gloss\tMusic\n"
      "b\tsecond gloss\t\n"
      "c\tthird gloss\tBiology\n";
  write_text(dir / "three.tsv", content);
  const auto corpus = load_corpus(dir / "three.tsv");

  // independent count: data lines after the header
  std::istringstream lines(content);
  std::string line;
  std::size_t data_lines = 0;
  std::getline(lines, line);
  while (std::getline(lines, line)) data_lines += line.empty() ? 0 : 1;

  ASSERT_EQ(corpus.size(), data_lines);
  std::size_t unlabelled = 0;
  for (const auto& r : corpus) unlabelled += r.gold_label ? 0 : 1;
  EXPECT_EQ(unlabelled, 1u);
  EXPECT_FALSE(corpus[1].gold_label.has_value());
}

TEST(LoadCorpus, TwoColumnRowIsUnlabelled) {
  std::istringstream in("id\tgloss\tlabel\nx\tsome gloss\n");
  const auto corpus = read_tsv(in, "t");
  ASSERT_EQ(corpus.size(), 1u);
  EXPECT_FALSE(corpus[0].gold_label);
}

TEST(LoadCorpus, MalformedRowNamesLineAndField) {
  std::istringstream in("id\tgloss\tlabel\nok\tfine\tA\nbad\tone\ttwo\tthree\n");
  try {
    read_tsv(in, "t", "fixture.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "columns");
    EXPECT_NE(std::string(e.what()).find("fixture.tsv:3"), std::string::npos);
  }
}

TEST(LoadCorpus, EmptyGlossIsRejected) {
  std::istringstream in("id\tgloss\tlabel\nx\t   \tA\n");
  try {
    read_tsv(in, "t");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "gloss");
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadCorpus, MissingHeaderIsRejected) {
  std::istringstream in("x\tgloss\tA\n");
  EXPECT_THROW(read_tsv(in, "t"), ParseError);
}

TEST(LoadCorpus, DuplicateIdNamesTheId) {
  std::istringstream in("id\tgloss\tlabel\ndup\tone\t\ndup\ttwo\t\n");
  try {
    read_tsv(in, "t");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("'dup'"), std::string::npos);
  }
}

TEST(LoadCorpus, JsonlAcceptsNullAndMissingLabel) {
  std::istringstream in(
      R"({"id": "a", "gloss": "alpha", "label": "Music"}
{"id": "b", "gloss": "beta", "label": null}
{"id": "c", "gloss": "gamma", "lemmas": ["g1", "g2"]}
)");
  const auto corpus = read_jsonl(in, "j");
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0].gold_label, "Music");
  EXPECT_FALSE(corpus[1].gold_label);
  EXPECT_FALSE(corpus[2].gold_label);
  EXPECT_EQ(corpus[2].lemmas, (std::vector<std::string>{"g1", "g2"}));
}

TEST(LoadCorpus, JsonlErrorsNameLine) {
  std::istringstream bad_json("{\"id\": \"a\", \"gloss\": \"x\"}\n{not json\n");
  try {
    read_jsonl(bad_json, "j");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream no_gloss("{\"id\": \"a\"}\n");
  try {
    read_jsonl(no_gloss, "j");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "gloss");
  }
}

TEST(LoadCorpus, RoundTripAndPurity) {
  std::mt19937 rng(5);
  std::vector<GlossRecord> records;
  for (int i = 0; i < 40; ++i) {
    GlossRecord r{"id" + std::to_string(i), "gloss number " + std::to_string(rng() % 1000), std::nullopt, {}};
    if (rng() % 3 != 0) r.gold_label = "L" + std::to_string(rng() % 4);
    records.push_back(r);
  }
  const Corpus corpus("rt", records);
  TempDir dir;
  for (const auto format : {CorpusFormat::kTsv, CorpusFormat::kJsonl}) {
    const auto path = dir / (format == CorpusFormat::kTsv ? "c.tsv" : "c.jsonl");
    write_corpus(corpus, path, format);
    const auto once = load_corpus(path, format);
    EXPECT_EQ(once, corpus);
    EXPECT_EQ(load_corpus(path, format), once);
  }
}

TEST(WriteCorpus, TsvRejectsTabsInGloss) {
  const Corpus corpus("c", {GlossRecord{"a", "has\ttab", std::nullopt, {}}});
  std::ostringstream out;
  EXPECT_THROW(write_tsv(corpus, out), InputError);
  std::ostringstream jsonl;
  EXPECT_NO_THROW(write_jsonl(corpus, jsonl));
}

LabelSpace abc() { return LabelSpace::from_names("abc", {"A", "B", "C"}); }

TEST(LabelDistribution, CountsGoldLabels) {
  const Corpus corpus("c", {{"1", "g", "A", {}}, {"2", "g", "A", {}}, {"3", "g", "B", {}}});
  const auto dist = label_distribution(corpus, abc());
  EXPECT_EQ(dist.counts.at("A"), 2u);
  EXPECT_EQ(dist.counts.at("B"), 1u);
  EXPECT_EQ(dist.counts.at("C"), 0u);
  EXPECT_EQ(dist.total, 3u);
}

TEST(LabelDistribution, NoGoldsGivesZeros) {
  const Corpus corpus("c", {{"1", "g", std::nullopt, {}}, {"2", "g", std::nullopt, {}}});
  const auto dist = label_distribution(corpus, abc());
  EXPECT_EQ(dist.total, 0u);
  for (const auto& [_, n] : dist.counts) EXPECT_EQ(n, 0u);
}

TEST(LabelDistribution, UnknownLabelNamesLabelAndRecord) {
  const Corpus corpus("c", {{"rec7", "g", "Z", {}}});
  try {
    label_distribution(corpus, abc());
    FAIL();
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'Z'"), std::string::npos);
    EXPECT_NE(what.find("rec7"), std::string::npos);
  }
}

TEST(LabelDistribution, MatchesBruteForceTally) {
  std::mt19937 rng(17);
  const std::vector<std::string> names = {"A", "B", "C"};
  std::vector<GlossRecord> records;
  for (int i = 0; i < 50; ++i) {
    GlossRecord r{std::to_string(i), "gloss", std::nullopt, {}};
    if (rng() % 5 != 0) r.gold_label = names[rng() % names.size()];
    records.push_back(r);
  }
  const Corpus corpus("c", records);
  std::map<std::string, std::size_t> tally;
  std::size_t total = 0;
  for (const auto& r : records) {
    if (r.gold_label) {
      ++tally[*r.gold_label];
      ++total;
    }
  }
  const auto dist = label_distribution(corpus, abc());
  EXPECT_EQ(dist.total, total);
  EXPECT_LE(dist.total, corpus.size());
  for (const auto& n : names) EXPECT_EQ(dist.counts.at(n), tally[n]) << n;
}

}  // namespace
}  // namespace glossdom
