#include "glossdom/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

std::string_view to_string(EngineFormulation f) {
  switch (f) {
    case EngineFormulation::kNli:
      return "nli";
    case EngineFormulation::kNsp:
      return "nsp";
    case EngineFormulation::kMlmConstrained:
      return "mlm-constrained";
  }
  return "?";
}

std::optional<EngineFormulation> parse_engine_formulation(std::string_view name) {
  if (name == "nli") return EngineFormulation::kNli;
  if (name == "nsp") return EngineFormulation::kNsp;
  if (name == "mlm-constrained") return EngineFormulation::kMlmConstrained;
  return std::nullopt;
}

Formulation pattern_formulation(EngineFormulation f) {
  switch (f) {
    case EngineFormulation::kNli:
      return Formulation::kNli;
    case EngineFormulation::kNsp:
      return Formulation::kNsp;
    case EngineFormulation::kMlmConstrained:
      return Formulation::kMlm;
  }
  return Formulation::kNli;
}

nlohmann::json to_json(const EngineConfig& cfg) {
  nlohmann::json j;
  j["formulation"] = std::string(to_string(cfg.formulation));
  j["pattern"] = cfg.pattern_id;
  j["descriptors"] = cfg.use_descriptors;
  j["threshold"] = cfg.threshold ? nlohmann::json(*cfg.threshold) : nlohmann::json();
  j["temperature"] = cfg.temperature;
  if (cfg.formulation == EngineFormulation::kMlmConstrained) j["mlm_top_k"] = cfg.mlm_top_k;
  return j;
}

void validate(const EngineConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw InputError("temperature must be positive");
  }
  if (cfg.threshold && !(*cfg.threshold >= 0.0 && *cfg.threshold <= 1.0)) {
    throw InputError("threshold must lie in [0, 1]");
  }
  if (cfg.mlm_top_k < 1) throw InputError("mlm top-k must be positive");
}

std::vector<double> softmax(std::span<const double> scores, double temperature) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  double max_scaled = -INFINITY;
  for (const double s : scores) max_scaled = std::max(max_scaled, s / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] / temperature - max_scaled);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

std::vector<std::size_t> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

namespace {

const PatternTemplate& resolve_pattern(std::span<const PatternTemplate> registry, std::string_view id,
                                       Formulation expected) {
  const auto* pattern = find_pattern(registry, id);
  if (pattern == nullptr) {
    std::string known;
    for (const auto& p : registry) known += (known.empty() ? "" : ", ") + p.id;
    throw InputError("unknown pattern '" + std::string(id) + "' (known: " + known + ")");
  }
  if (pattern->formulation != expected) {
    throw InputError("pattern '" + pattern->id + "' is " + std::string(to_string(pattern->formulation)) +
                     ", configuration needs " + std::string(to_string(expected)));
  }
  return *pattern;
}

// Rethrows the active backend exception with the gloss id prepended, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& gloss_id) {
  const std::string prefix = "gloss '" + gloss_id + "': ";
  try {
    throw;
  } catch (const TransportError& e) {
    throw TransportError(prefix + e.what(), e.attempts());
  } catch (const ProtocolError& e) {
    throw ProtocolError(prefix + e.what());
  } catch (const BackendError& e) {
    throw BackendError(prefix + e.what());
  }
}

std::string strip_subword_marker(std::string_view token) {
  for (const std::string_view marker : {"\xC4\xA0", "\xE2\x96\x81", "##"}) {
    if (token.starts_with(marker)) token.remove_prefix(marker.size());
  }
  return std::string(text::trim(token));
}

bool is_sequence_artifact(std::string_view token) {
  static const std::set<std::string, std::less<>> artifacts = {
      "eos", "</s>", "<s>", "<eos>", "[sep]", "[cls]", "<pad>", "[pad]", "<|endoftext|>", "<unk>", "[unk]"};
  if (artifacts.contains(text::to_lower(token))) return true;
  return std::none_of(token.begin(), token.end(),
                      [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

struct ProbeScores {
  std::vector<double> scores;
  bool normalized = true;
};

ProbeScores score_pairs(const PatternTemplate& pattern, const GlossRecord& gloss,
                        const std::vector<std::string>& probes, EngineFormulation formulation,
                        Scorer& backend) {
  std::vector<TextPair> pairs;
  pairs.reserve(probes.size());
  for (const auto& probe : probes) {
    auto query = render(pattern, gloss.gloss, probe);
    pairs.push_back({std::move(query.first), std::move(*query.second)});
  }
  ProbeScores out;
  if (formulation == EngineFormulation::kNli) {
    auto batch = backend.score_nli(pairs);
    out.normalized = batch.normalized;
    for (const auto& r : batch.results) out.scores.push_back(r.entailment);
  } else {
    auto batch = backend.score_nsp(pairs);
    out.normalized = batch.normalized;
    for (const auto& r : batch.results) out.scores.push_back(r.is_next);
  }
  if (out.scores.size() != probes.size()) {
    throw ProtocolError("backend returned " + std::to_string(out.scores.size()) + " scores for " +
                        std::to_string(probes.size()) + " queries");
  }
  return out;
}

ProbeScores score_mask_slot(const PatternTemplate& pattern, const GlossRecord& gloss,
                            const std::vector<std::string>& probes, int top_k, Scorer& backend) {
  for (const auto& probe : probes) {
    if (probe.find_first_of(" \t") != std::string::npos) {
      throw InputError("mlm-constrained scoring needs single-token labels; '" + probe + "' is not");
    }
  }
  const std::vector<std::string> sequences = {render(pattern, gloss.gloss).first};
  auto batch = backend.fill_mask(sequences, top_k);
  if (batch.results.size() != 1) throw ProtocolError("backend returned no mask predictions");
  const auto& predictions = batch.results.front();

  double floor = 0.0;
  if (!batch.normalized && !predictions.empty()) {
    floor = predictions.front().score;
    for (const auto& p : predictions) floor = std::min(floor, p.score);
  }
  ProbeScores out{std::vector<double>(probes.size(), floor), batch.normalized};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto wanted = text::to_lower(probes[i]);
    bool found = false;
    for (const auto& p : predictions) {
      if (text::to_lower(strip_subword_marker(p.token)) != wanted) continue;
      out.scores[i] = found ? std::max(out.scores[i], p.score) : p.score;
      found = true;
    }
  }
  return out;
}

}  // namespace

ScoredLabels classify(const GlossRecord& gloss, const LabelSpace& labels, const EngineConfig& cfg,
                      Scorer& backend, std::span<const PatternTemplate> registry) {
  validate(cfg);
  if (labels.empty()) throw InputError("label space is empty");
  const auto formulation = pattern_formulation(cfg.formulation);
  const auto& pattern = resolve_pattern(registry, cfg.pattern_id, formulation);
  if (!backend.supports(formulation)) {
    throw InputError("backend '" + backend.descriptor().model_name + "' does not support " +
                     std::string(to_string(formulation)));
  }

  std::vector<std::string> probes;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (cfg.use_descriptors) {
      for (const auto& d : labels[i].descriptors) {
        probes.push_back(d);
        owner.push_back(i);
      }
    } else {
      probes.push_back(labels[i].name);
      owner.push_back(i);
    }
  }

  ProbeScores scored;
  try {
    scored = cfg.formulation == EngineFormulation::kMlmConstrained
                 ? score_mask_slot(pattern, gloss, probes, cfg.mlm_top_k, backend)
                 : score_pairs(pattern, gloss, probes, cfg.formulation, backend);
  } catch (const BackendError&) {
    rethrow_with_context(gloss.id);
  }

  // max over each label's descriptors
  std::vector<double> label_scores(labels.size(), 0.0);
  std::vector<bool> seen(labels.size(), false);
  for (std::size_t q = 0; q < probes.size(); ++q) {
    const auto i = owner[q];
    label_scores[i] = seen[i] ? std::max(label_scores[i], scored.scores[q]) : scored.scores[q];
    seen[i] = true;
  }

  const auto probabilities = softmax(label_scores, cfg.temperature);
  ScoredLabels result;
  result.gloss_id = gloss.id;
  result.raw_normalized = scored.normalized;
  for (const auto i : rank_descending(probabilities)) {
    result.entries.push_back({labels[i].name, probabilities[i]});
  }
  for (std::size_t i = 0; i < labels.size(); ++i) result.raw.emplace(labels[i].name, label_scores[i]);
  result.abstained = cfg.threshold.has_value() && result.top_probability() < *cfg.threshold;
  return result;
}

std::vector<ScoredLabels> classify_batch(const Corpus& corpus, const LabelSpace& labels,
                                         const EngineConfig& cfg, Scorer& backend,
                                         const BatchOptions& options,
                                         std::span<const PatternTemplate> registry) {
  std::vector<std::optional<ScoredLabels>> slots(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());

  const auto work = [&](std::size_t i) {
    try {
      slots[i] = classify(corpus[i], labels, cfg, backend, registry);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const auto workers = std::min(std::max<std::size_t>(1, options.parallelism), corpus.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      work(i);
      if (errors[i] && options.fail_fast) std::rethrow_exception(errors[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (auto i = next++; i < corpus.size() && !stop; i = next++) {
            work(i);
            if (errors[i] && options.fail_fast) stop = true;
          }
        });
      }
    }
  }

  std::vector<ScoredLabels> results;
  results.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (errors[i]) {
      if (options.fail_fast) std::rethrow_exception(errors[i]);
      if (options.on_skip) {
        try {
          std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
          options.on_skip(corpus[i], e);
        }
      }
      continue;
    }
    if (slots[i]) results.push_back(std::move(*slots[i]));
  }
  return results;
}

std::vector<MaskPrediction> cleanup_predictions(std::span<const MaskPrediction> raw, int k) {
  std::vector<MaskPrediction> out;
  std::set<std::string> seen;
  for (const auto& p : raw) {
    if (static_cast<int>(out.size()) >= k) break;
    auto token = strip_subword_marker(p.token);
    if (token.empty() || is_sequence_artifact(token)) continue;
    if (!seen.insert(text::to_lower(token)).second) continue;
    out.push_back({std::move(token), p.score, static_cast<int>(out.size() + 1)});
  }
  return out;
}

std::vector<MaskPrediction> predict_open_topics(const GlossRecord& gloss, int k, Scorer& backend,
                                                const OpenTopicOptions& options,
                                                std::span<const PatternTemplate> registry) {
  if (k < 1) throw InputError("k must be a positive integer");
  const auto& pattern = resolve_pattern(registry, options.pattern_id, Formulation::kMlm);
  if (!backend.supports(Formulation::kMlm)) throw InputError("backend does not support mlm");

  const std::vector<std::string> sequences = {render(pattern, gloss.gloss).first};
  // cleanup discards entries, so ask for a few more
  const int requested = options.cleanup ? 2 * k + 4 : k;
  ScoreBatch<std::vector<MaskPrediction>> batch;
  try {
    batch = backend.fill_mask(sequences, requested);
  } catch (const BackendError&) {
    rethrow_with_context(gloss.id);
  }
  if (batch.results.size() != 1) throw ProtocolError("backend returned no mask predictions");
  auto predictions = std::move(batch.results.front());
  if (options.cleanup) return cleanup_predictions(predictions, k);
  if (predictions.size() > static_cast<std::size_t>(k)) predictions.resize(static_cast<std::size_t>(k));
  return predictions;
}

nlohmann::ordered_json to_json(const ScoredLabels& scored, const nlohmann::json& config) {
  nlohmann::ordered_json j;
  j["id"] = scored.gloss_id;
  j["top"] = nlohmann::ordered_json::array();
  for (const auto& e : scored.entries) {
    nlohmann::ordered_json entry;
    entry["label"] = e.label;
    entry["p"] = e.probability;
    j["top"].push_back(std::move(entry));
  }
  j["abstained"] = scored.abstained;
  j["config"] = config;
  return j;
}

void write_predictions(std::ostream& out, std::span<const ScoredLabels> predictions,
                       const nlohmann::json& config) {
  for (const auto& p : predictions) out << to_json(p, config).dump() << '\n';
}

std::vector<ScoredLabels> read_predictions(std::istream& in, const std::string& source) {
  std::vector<ScoredLabels> predictions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, "json", e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(source, line_no, "id", "missing or non-string 'id'");
    }
    if (!j.contains("top") || !j["top"].is_array() || j["top"].empty()) {
      throw ParseError(source, line_no, "top", "missing or empty 'top' list");
    }
    ScoredLabels scored;
    scored.gloss_id = j["id"].get<std::string>();
    for (const auto& entry : j["top"]) {
      if (!entry.is_object() || !entry.contains("label") || !entry["label"].is_string() ||
          !entry.contains("p") || !entry["p"].is_number()) {
        throw ParseError(source, line_no, "top", "entries need string 'label' and numeric 'p'");
      }
      scored.entries.push_back({entry["label"].get<std::string>(), entry["p"].get<double>()});
    }
    std::stable_sort(scored.entries.begin(), scored.entries.end(),
                     [](const auto& a, const auto& b) { return a.probability > b.probability; });
    if (const auto a = j.find("abstained"); a != j.end()) {
      if (!a->is_boolean()) throw ParseError(source, line_no, "abstained", "must be a boolean");
      scored.abstained = a->get<bool>();
    }
    predictions.push_back(std::move(scored));
  }
  return predictions;
}

std::vector<ScoredLabels> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read_predictions(in, path.string());
}

}  // namespace glossdom
