#include "glossdom/cli.hpp"

#include <cstdlib>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "glossdom/dataset.hpp"
#include "glossdom/engine.hpp"
#include "glossdom/eval.hpp"
#include "glossdom/labelspace.hpp"
#include "test_support.hpp"

namespace glossdom {
namespace {

using testing::read_text;
using testing::TempDir;
using testing::write_text;

const std::string kData = std::string(GLOSSDOM_TEST_DIR) + "/data/";
const std::string kLabels = kData + "labels5.json";
const std::string kGold = kData + "gold.tsv";
const std::string kPool = kData + "pool.tsv";

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

TEST(Cli, LabelMatchesGolden) {
  const auto r = run({"--backend", "mock", "label", "--text", "a health facility where patients receive treatment",
                      "--labels", kLabels, "--descriptors"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, read_text(std::string(GLOSSDOM_TEST_DIR) + "/golden/label_mock.txt"));
}

TEST(Cli, GlobalFlagsMayFollowTheSubcommand) {
  const auto a = run({"--backend", "mock", "label", "--text", "music", "--labels", kLabels});
  const auto b = run({"label", "--text", "music", "--labels", kLabels, "--backend", "mock"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, EmptyGlossExitsTwo) {
  const auto r = run({"--backend", "mock", "label", "--text", "", "--labels", kLabels});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("empty gloss"), std::string::npos);
}

TEST(Cli, UnknownPatternListsRegistry) {
  const auto r = run({"--backend", "mock", "evaluate", "--corpus", kGold, "--labels", kLabels, "--pattern", "nope"});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("domain-of-sentence"), std::string::npos);
  EXPECT_NE(r.err.find("topic-or-domain"), std::string::npos);
}

TEST(Cli, UnreachableBackendExitsThree) {
  const auto r = run({"--backend-url", "http://127.0.0.1:1", "--timeout-ms", "200", "label", "--text", "music",
                      "--labels", kLabels});
  EXPECT_EQ(r.code, cli::kExitBackend) << r.err;
}

TEST(Cli, BadFlagExitsTwo) {
  EXPECT_EQ(run({"--backend", "gpu", "label", "--text", "x"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"label", "--no-such-flag"}).code, cli::kExitConfig);
  EXPECT_EQ(run({}).code, cli::kExitConfig);
}

TEST(Cli, EvaluateTopkMatchesLibrary) {
  TempDir dir;
  const auto r = run({"--backend", "mock", "evaluate", "--corpus", kGold, "--labels", kLabels, "--descriptors",
                      "--topk", "1,3,5", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;

  MockScorer mock;
  const auto corpus = load_corpus(kGold);
  const auto labels = load_labelspace(kLabels);
  EngineConfig cfg;
  cfg.use_descriptors = true;
  const auto preds = classify_batch(corpus, labels, cfg, mock);
  const std::vector<int> ks = {1, 3, 5};
  const auto acc = topk_accuracy(preds, corpus, labels, ks);

  std::size_t lines = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("top-", 0) != 0) continue;
    ++lines;
    const int k = line[4] - '0';
    EXPECT_NE(line.find(fmt::format("{:.4f}", acc.at(k))), std::string::npos) << line;
  }
  EXPECT_EQ(lines, 3u);

  const auto report = nlohmann::json::parse(read_text(dir / "report.json"));
  EXPECT_DOUBLE_EQ(report["report"]["top_k"]["1"].get<double>(), acc.at(1));
  EXPECT_EQ(report["config"]["descriptors"], "true");
  for (const auto* f : {"report.txt", "topk_curve.csv", "confusion.csv", "predictions.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}

TEST(Cli, EvaluateScoresAnExternalDump) {
  TempDir dir;
  const auto first = run({"--backend", "mock", "evaluate", "--corpus", kGold, "--labels", kLabels, "--out-dir",
                          (dir / "a").string()});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto second = run({"evaluate", "--corpus", kGold, "--labels", kLabels, "--predictions",
                           (dir / "a" / "predictions.jsonl").string()});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(first.out, second.out);
}

TEST(Cli, SweepHasNineRowsAndMonotoneRecall) {
  TempDir dir;
  const auto r = run({"--backend", "mock", "sweep", "--corpus", kGold, "--labels", kLabels, "--out-dir",
                      dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto comparison = nlohmann::json::parse(read_text(dir / "comparison.json"));
  ASSERT_EQ(comparison["rows"].size(), 9u);
  EXPECT_EQ(comparison["rows"][0]["name"], "topic");
  for (const auto& row : comparison["rows"]) {
    std::istringstream csv(read_text(dir / ("sweep_" + row["name"].get<std::string>() + ".csv")));
    std::string line;
    std::getline(csv, line);
    double previous = 2.0;
    std::size_t points = 0;
    while (std::getline(csv, line)) {
      const auto fields = [&] {
        std::vector<double> v;
        std::istringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) v.push_back(std::stod(f));
        return v;
      }();
      EXPECT_LE(fields[2], previous);
      previous = fields[2];
      ++points;
    }
    EXPECT_EQ(points, 20u);
  }
}

TEST(Cli, AnnotateAndExport) {
  TempDir dir;
  const auto silver = (dir / "silver.jsonl").string();
  const auto a = run({"--backend", "mock", "annotate", "--pool", kPool, "--labels", kLabels, "--out", silver});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("written 10"), std::string::npos) << a.out;

  const auto e1 = run({"--seed", "7", "export", "--silver", silver, "--labels", kLabels, "--out-dir",
                       (dir / "e1").string()});
  const auto e2 = run({"--seed", "7", "export", "--silver", silver, "--labels", kLabels, "--out-dir",
                       (dir / "e2").string()});
  ASSERT_EQ(e1.code, 0) << e1.err;
  EXPECT_EQ(read_text(dir / "e1" / "train.jsonl"), read_text(dir / "e2" / "train.jsonl"));
  EXPECT_EQ(read_text(dir / "e1" / "dev.jsonl"), read_text(dir / "e2" / "dev.jsonl"));
  EXPECT_EQ(read_text(dir / "e1" / "labels.txt"), read_text(dir / "e2" / "labels.txt"));
}

TEST(Cli, SettingsPrecedence) {
  TempDir dir;
  write_text(dir / "glossdom.conf", "# settings\nbackend = mock\ntimeout_ms = 111\ntemperature = 2\n");
  const auto config = (dir / "glossdom.conf").string();
  const auto echoed = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"--config", config, "label", "--text", "music", "--labels", kLabels, "--jsonl"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return nlohmann::json::parse(r.out)["config"];
  };
  ::unsetenv("GLOSSDOM_BACKEND_TIMEOUT_MS");
  auto c = echoed({});
  EXPECT_EQ(c["timeout-ms"], "111");
  EXPECT_EQ(c["backend"], "mock");
  EXPECT_EQ(c["temperature"], "2");
  EXPECT_EQ(c["pattern"], "");

  ::setenv("GLOSSDOM_BACKEND_TIMEOUT_MS", "222", 1);
  EXPECT_EQ(echoed({})["timeout-ms"], "222");
  EXPECT_EQ(echoed({"--timeout-ms", "333"})["timeout-ms"], "333");
  ::unsetenv("GLOSSDOM_BACKEND_TIMEOUT_MS");
  EXPECT_EQ(echoed({"--temperature", "0.5"})["temperature"], "0.5");

  write_text(dir / "bad.conf", "colour = blue\n");
  EXPECT_EQ(run({"--config", (dir / "bad.conf").string(), "label", "--text", "x"}).code, cli::kExitConfig);
}

TEST(Cli, RepeatedRunsAreIdentical) {
  TempDir dir;
  const auto out_dir = dir / "run";
  const auto once = [&] {
    std::filesystem::remove_all(out_dir);
    std::string all;
    all += run({"--backend", "mock", "--seed", "13", "evaluate", "--corpus", kGold, "--labels", kLabels,
                "--thresholds", "0,0.2,0.4", "--out-dir", (out_dir / "eval").string()})
               .out;
    all += run({"--backend", "mock", "--seed", "13", "sweep", "--corpus", kGold, "--labels", kLabels, "--out-dir",
                (out_dir / "sweep").string()})
               .out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) all += f.filename().string() + read_text(f);
    return all;
  };
  EXPECT_EQ(once(), once());
}

}  // namespace
}  // namespace glossdom
