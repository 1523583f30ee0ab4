#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glossdom/dataset.hpp"
#include "glossdom/labelspace.hpp"
#include "glossdom/patterns.hpp"
#include "glossdom/scorer.hpp"

namespace glossdom {

enum class EngineFormulation { kNli, kNsp, kMlmConstrained };

std::string_view to_string(EngineFormulation f);
std::optional<EngineFormulation> parse_engine_formulation(std::string_view name);
Formulation pattern_formulation(EngineFormulation f);

struct EngineConfig {
  EngineFormulation formulation = EngineFormulation::kNli;
  std::string pattern_id = "domain-of-sentence";
  bool use_descriptors = false;
  std::optional<double> threshold;
  double temperature = 1.0;
  // Candidates requested from fill_mask in the mlm-constrained formulation.
  int mlm_top_k = 100;

  bool operator==(const EngineConfig&) const = default;
};

nlohmann::json to_json(const EngineConfig& cfg);
void validate(const EngineConfig& cfg);

struct LabelProbability {
  std::string label;
  double probability = 0.0;

  bool operator==(const LabelProbability&) const = default;
};

/// Ranked distribution over the active labels for one gloss.
struct ScoredLabels {
  std::string gloss_id;
  // Descending probability; ties keep label declaration order.
  std::vector<LabelProbability> entries;
  bool abstained = false;
  // Per-label score before softmax and whether it was a probability (true)
  // or a logit (false). Empty for predictions read back from a dump.
  std::map<std::string, double> raw;
  bool raw_normalized = true;

  double top_probability() const { return entries.empty() ? 0.0 : entries.front().probability; }
  const std::string& top_label() const { return entries.front().label; }

  bool operator==(const ScoredLabels&) const = default;
};

std::vector<double> softmax(std::span<const double> scores, double temperature = 1.0);

/// Indices sorted by descending value; equal values keep index order.
std::vector<std::size_t> rank_descending(std::span<const double> values);

/// Scores every label (or every descriptor, max-mapped back to its label),
/// softmax-normalises the label scores and applies the abstention threshold.
ScoredLabels classify(const GlossRecord& gloss, const LabelSpace& labels, const EngineConfig& cfg,
                      Scorer& backend,
                      std::span<const PatternTemplate> registry = builtin_registry());

struct BatchOptions {
  // When false, records whose classification throws are skipped and reported
  // through on_skip instead of aborting the batch.
  bool fail_fast = true;
  std::size_t parallelism = 1;
  std::function<void(const GlossRecord&, const std::exception&)> on_skip;
};

std::vector<ScoredLabels> classify_batch(const Corpus& corpus, const LabelSpace& labels,
                                         const EngineConfig& cfg, Scorer& backend,
                                         const BatchOptions& options = {},
                                         std::span<const PatternTemplate> registry = builtin_registry());

struct OpenTopicOptions {
  // Drop sub-word markers and end-of-sequence artifacts, merge case variants.
  bool cleanup = false;
  std::string pattern_id{kDefaultMlmPattern};
};

/// Free-form mode: what the masked model puts in the topic slot.
std::vector<MaskPrediction> predict_open_topics(
    const GlossRecord& gloss, int k, Scorer& backend, const OpenTopicOptions& options = {},
    std::span<const PatternTemplate> registry = builtin_registry());

std::vector<MaskPrediction> cleanup_predictions(std::span<const MaskPrediction> raw, int k);

// Prediction dump: one JSON object per line,
// {"id", "top": [{"label", "p"}...], "abstained", "config"}.
nlohmann::ordered_json to_json(const ScoredLabels& scored, const nlohmann::json& config);
void write_predictions(std::ostream& out, std::span<const ScoredLabels> predictions,
                       const nlohmann::json& config);
std::vector<ScoredLabels> read_predictions(std::istream& in, const std::string& source = "<predictions>");
std::vector<ScoredLabels> load_predictions(const std::filesystem::path& path);

}  // namespace glossdom
