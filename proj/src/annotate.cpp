#include "glossdom/annotate.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : data) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Lines terminated by '\n'; an unterminated tail is a torn write and is dropped.
std::vector<std::string> complete_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) return lines;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto content = buffer.str();
  std::size_t start = 0;
  for (auto pos = content.find('\n'); pos != std::string::npos; pos = content.find('\n', start)) {
    lines.push_back(content.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

void rewrite(const fs::path& path, const std::vector<std::string>& lines) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    for (const auto& l : lines) out << l << '\n';
  }
  fs::rename(tmp, path);
}

std::ofstream open_append(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

// Restores the invariant "output holds exactly the checkpointed, non-abstained
// records" after an interruption and returns the completed ids.
std::unordered_set<std::string> reconcile(const Corpus& pool, const fs::path& output,
                                          const fs::path& checkpoint, const std::string& fingerprint) {
  const auto ids = complete_lines(checkpoint);
  std::unordered_set<std::string> completed;
  for (const auto& id : ids) {
    if (pool.find(id) == nullptr) {
      throw InputError("checkpoint " + checkpoint.string() + " lists id '" + id +
                       "' which is not in the pool");
    }
    completed.insert(id);
  }

  std::vector<std::string> kept;
  std::unordered_set<std::string> written;
  for (const auto& line : complete_lines(output)) {
    if (text::trim(line).empty()) continue;
    SilverRecord record;
    try {
      record = silver_from_json(nlohmann::json::parse(line));
    } catch (const std::exception&) {
      continue;
    }
    if (!completed.contains(record.id) || !written.insert(record.id).second) continue;
    if (record.teacher_config != fingerprint) {
      throw InputError("cannot resume " + output.string() + ": it was produced by teacher " +
                       record.teacher_config + ", current teacher is " + fingerprint);
    }
    kept.push_back(line);
  }
  rewrite(output, kept);
  rewrite(checkpoint, ids);
  return completed;
}

}  // namespace

nlohmann::json to_json(const SilverRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["gloss"] = record.gloss;
  j["silver_label"] = record.silver_label;
  j["confidence"] = record.confidence;
  j["teacher_config"] = record.teacher_config;
  return j;
}

SilverRecord silver_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("silver record is not an object");
  SilverRecord r;
  for (const char* key : {"id", "gloss", "silver_label", "teacher_config"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw InputError(std::string("silver record lacks string '") + key + "'");
    }
  }
  if (!j.contains("confidence") || !j["confidence"].is_number()) {
    throw InputError("silver record lacks numeric 'confidence'");
  }
  r.id = j["id"].get<std::string>();
  r.gloss = j["gloss"].get<std::string>();
  r.silver_label = j["silver_label"].get<std::string>();
  r.confidence = j["confidence"].get<double>();
  r.teacher_config = j["teacher_config"].get<std::string>();
  return r;
}

std::vector<SilverRecord> load_silver(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<SilverRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(silver_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, "json", e.what());
    }
  }
  return records;
}

std::string teacher_fingerprint(const EngineConfig& cfg, const LabelSpace& labels,
                                const BackendDescriptor& backend) {
  nlohmann::json canonical;
  canonical["config"] = to_json(cfg);
  canonical["backend"] = {{"kind", std::string(to_string(backend.kind))}, {"model", backend.model_name}};
  nlohmann::json label_list = nlohmann::json::array();
  for (const auto& l : labels) label_list.push_back({{"name", l.name}, {"descriptors", l.descriptors}});
  canonical["labels"] = label_list;
  return fmt::format("{:016x}", fnv1a(canonical.dump()));
}

fs::path checkpoint_path(const fs::path& output) {
  auto p = output;
  p += ".done";
  return p;
}

AnnotateSummary annotate_pool(const Corpus& pool, const LabelSpace& labels, const EngineConfig& cfg,
                              Scorer& backend, const AnnotateOptions& options,
                              std::span<const PatternTemplate> registry) {
  if (options.output.empty()) throw InputError("annotation needs an output path");
  if (options.batch_size == 0) throw InputError("batch size must be positive");
  validate(cfg);

  const auto checkpoint = checkpoint_path(options.output);
  const auto fingerprint = teacher_fingerprint(cfg, labels, backend.descriptor());

  std::unordered_set<std::string> completed;
  if (options.resume && fs::exists(checkpoint)) {
    completed = reconcile(pool, options.output, checkpoint, fingerprint);
  } else {
    rewrite(options.output, {});
    rewrite(checkpoint, {});
  }

  AnnotateSummary summary;
  std::vector<GlossRecord> pending;
  for (const auto& r : pool) {
    if (completed.contains(r.id)) {
      ++summary.skipped;
    } else {
      pending.push_back(r);
    }
  }

  CountingScorer counter(backend);
  auto out = open_append(options.output);
  auto done = open_append(checkpoint);
  BatchOptions batch_options;
  batch_options.parallelism = options.parallelism;

  for (std::size_t start = 0; start < pending.size(); start += options.batch_size) {
    const auto end = std::min(pending.size(), start + options.batch_size);
    const Corpus chunk(pool.name(), {pending.begin() + static_cast<std::ptrdiff_t>(start),
                                     pending.begin() + static_cast<std::ptrdiff_t>(end)});
    const auto results = classify_batch(chunk, labels, cfg, counter, batch_options, registry);

    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& scored = results[i];
      if (scored.abstained) {
        ++summary.abstained;
        continue;
      }
      const SilverRecord record{chunk[i].id, chunk[i].gloss, scored.top_label(), scored.top_probability(),
                                fingerprint};
      out << to_json(record).dump() << '\n';
      ++summary.written;
      if (options.sink) options.sink(record);
    }
    out.flush();
    // ids are committed only after their records are on disk
    for (const auto& r : chunk) done << r.id << '\n';
    done.flush();
    if (!out || !done) throw InputError("write failed for " + options.output.string());
    summary.processed += chunk.size();
  }
  summary.queries = counter.queries();
  return summary;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

ExportResult export_training_set(std::span<const SilverRecord> silver, const LabelSpace& labels,
                                 SplitFractions split, std::uint64_t seed, const fs::path& out_dir) {
  if (silver.empty()) throw InputError("no silver records to export");
  if (!(split.train > 0.0) || !(split.dev > 0.0) || split.train + split.dev > 1.0 + 1e-12) {
    throw InputError("split fractions must be positive and sum to at most 1");
  }
  std::vector<bool> present(labels.size(), false);
  for (const auto& r : silver) {
    const auto index = labels.index_of(r.silver_label);
    if (!index) {
      throw InputError("silver record '" + r.id + "' has label '" + r.silver_label +
                       "' outside label space '" + labels.name() + "'");
    }
    present[*index] = true;
  }

  const auto n = silver.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::floor(split.train * n + 1e-9)));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::floor(split.dev * n + 1e-9)));
  const auto perm = seeded_permutation(n, seed);

  fs::create_directories(out_dir);
  ExportResult result{out_dir / "train.jsonl", out_dir / "dev.jsonl", out_dir / "labels.txt", n_train, n_dev};
  const auto write_split = [&](const fs::path& path, std::size_t from, std::size_t to) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    for (std::size_t i = from; i < to; ++i) {
      const auto& r = silver[perm[i]];
      nlohmann::ordered_json j;
      j["text"] = r.gloss;
      j["label"] = r.silver_label;
      out << j.dump() << '\n';
    }
  };
  write_split(result.train_path, 0, n_train);
  write_split(result.dev_path, n_train, n_train + n_dev);

  std::ofstream vocab(result.labels_path, std::ios::binary | std::ios::trunc);
  if (!vocab) throw InputError("cannot write " + result.labels_path.string());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (present[i]) vocab << labels[i].name << '\n';
  }
  return result;
}

}  // namespace glossdom
