#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glossdom/dataset.hpp"
#include "glossdom/engine.hpp"
#include "glossdom/labelspace.hpp"
#include "glossdom/scorer.hpp"

namespace glossdom {

// All metrics below are computed over the gold-labelled records of `golds`.
// A gold record without a prediction counts as a miss. Predictions for
// unlabelled records are ignored; an id missing from the corpus, or a gold
// label outside the label space, is an InputError.

std::map<int, double> topk_accuracy(std::span<const ScoredLabels> predictions, const Corpus& golds,
                                    const LabelSpace& labels, std::span<const int> ks);

// accuracy for k = 1..|labels|
std::vector<double> topk_curve(std::span<const ScoredLabels> predictions, const Corpus& golds,
                               const LabelSpace& labels);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t hits = 0;
  std::size_t n_predicted = 0;  // non-abstained
  std::size_t n_gold = 0;
  // False when nothing was predicted; precision is then reported as 0.
  bool precision_defined = true;
};

/// Micro-averaged scores under abstention: abstained records hurt recall only.
PrfResult micro_prf(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels);

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;  // row-major, gold x predicted
  std::vector<double> rates;        // rows divided by support
  std::vector<std::size_t> support;

  std::size_t size() const { return labels.size(); }
  std::size_t count(std::size_t gold, std::size_t predicted) const {
    return counts[gold * size() + predicted];
  }
  double rate(std::size_t gold, std::size_t predicted) const {
    return rates[gold * size() + predicted];
  }
  std::size_t trace() const;
};

ConfusionMatrix confusion_matrix(std::span<const ScoredLabels> predictions, const Corpus& golds,
                                 const LabelSpace& labels);

struct SweepPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_abstained = 0;
};

/// Re-gates the stored distributions at each threshold (sorted, deduplicated).
std::vector<SweepPoint> threshold_sweep(std::span<const ScoredLabels> predictions,
                                        const Corpus& golds, const LabelSpace& labels,
                                        std::vector<double> thresholds);

struct LabelStats {
  std::size_t support = 0;
  double hit_rate = 0.0;
};

struct EvalReport {
  std::map<int, double> top_k;
  std::vector<double> topk_curve;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  std::size_t n_evaluated = 0;
  std::size_t n_abstained = 0;
  ConfusionMatrix confusion;
  std::map<std::string, LabelStats> per_label;
};

EvalReport evaluate(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels, std::span<const int> ks);
EvalReport evaluate(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels);

nlohmann::json to_json(const EvalReport& report);
std::string to_text(const EvalReport& report);

std::string sweep_csv(std::span<const SweepPoint> points);
std::string topk_curve_csv(const EvalReport& report);
std::string confusion_csv(const ConfusionMatrix& matrix);

struct ComparisonEntry {
  std::string name;
  EngineConfig config;
  Scorer* backend = nullptr;
};

struct ComparisonRow {
  std::string name;
  EngineConfig config;
  BackendDescriptor backend;
  std::optional<EvalReport> report;
  std::vector<ScoredLabels> predictions;
  std::string error;
};

/// One evaluated row per entry, in entry order. A failing entry records its
/// error and the remaining rows still run.
std::vector<ComparisonRow> run_comparison(const Corpus& corpus, const LabelSpace& labels,
                                          std::span<const ComparisonEntry> entries,
                                          std::span<const PatternTemplate> registry = builtin_registry(),
                                          std::size_t parallelism = 1);

nlohmann::json comparison_to_json(std::span<const ComparisonRow> rows);
std::string comparison_to_text(std::span<const ComparisonRow> rows);

}  // namespace glossdom
