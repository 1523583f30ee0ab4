#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glossdom/dataset.hpp"
#include "glossdom/engine.hpp"
#include "glossdom/labelspace.hpp"
#include "glossdom/scorer.hpp"

namespace glossdom {

/// Teacher-labelled gloss for student training.
struct SilverRecord {
  std::string id;
  std::string gloss;
  std::string silver_label;
  double confidence = 0.0;
  std::string teacher_config;

  bool operator==(const SilverRecord&) const = default;
};

nlohmann::json to_json(const SilverRecord& record);
SilverRecord silver_from_json(const nlohmann::json& j);

std::vector<SilverRecord> load_silver(const std::filesystem::path& path);

/// Stable 16-hex-digit identity of (config, label space, backend model).
std::string teacher_fingerprint(const EngineConfig& cfg, const LabelSpace& labels,
                                const BackendDescriptor& backend);

/// Completed-id ledger written next to the silver output.
std::filesystem::path checkpoint_path(const std::filesystem::path& output);

struct AnnotateOptions {
  std::filesystem::path output;
  bool resume = false;
  // Glosses per commit; an interruption loses at most one batch.
  std::size_t batch_size = 16;
  std::size_t parallelism = 1;
  std::function<void(const SilverRecord&)> sink;
};

struct AnnotateSummary {
  std::size_t processed = 0;  // classified in this run
  std::size_t written = 0;
  std::size_t abstained = 0;
  std::size_t skipped = 0;  // already completed by an earlier run
  std::size_t queries = 0;  // backend inputs scored in this run
};

/// Labels every pool gloss with the teacher and appends one SilverRecord per
/// non-abstained gloss to options.output. With resume, ids already recorded in
/// the checkpoint are never re-queried; otherwise existing output is replaced.
AnnotateSummary annotate_pool(const Corpus& pool, const LabelSpace& labels, const EngineConfig& cfg,
                              Scorer& backend, const AnnotateOptions& options,
                              std::span<const PatternTemplate> registry = builtin_registry());

struct SplitFractions {
  double train = 0.9;
  double dev = 0.1;
};

struct ExportResult {
  std::filesystem::path train_path;
  std::filesystem::path dev_path;
  std::filesystem::path labels_path;
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
};

/// Seeded Fisher-Yates permutation of 0..n-1, identical on every platform.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Writes train.jsonl / dev.jsonl ({"text", "label"} per line) and labels.txt
/// (labels present in the silver data, declaration order) into out_dir.
ExportResult export_training_set(std::span<const SilverRecord> silver, const LabelSpace& labels,
                                 SplitFractions split, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

}  // namespace glossdom
