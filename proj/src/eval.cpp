#include "glossdom/eval.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "glossdom/error.hpp"

namespace glossdom {

namespace {

// A gold-labelled record paired with its prediction, if any.
struct Case {
  std::size_t gold = 0;
  const ScoredLabels* prediction = nullptr;
};

std::vector<Case> align(std::span<const ScoredLabels> predictions, const Corpus& golds,
                        const LabelSpace& labels) {
  std::unordered_map<std::string_view, const ScoredLabels*> by_id;
  for (const auto& p : predictions) {
    if (golds.find(p.gloss_id) == nullptr) {
      throw InputError("prediction for unknown record '" + p.gloss_id + "'");
    }
    if (!by_id.emplace(p.gloss_id, &p).second) {
      throw InputError("duplicate prediction for record '" + p.gloss_id + "'");
    }
  }
  std::vector<Case> cases;
  for (const auto& r : golds) {
    if (!r.gold_label) continue;
    const auto index = labels.index_of(*r.gold_label);
    if (!index) {
      throw InputError("record '" + r.id + "': gold label '" + *r.gold_label +
                       "' is not in label space '" + labels.name() + "'");
    }
    const auto it = by_id.find(r.id);
    cases.push_back({*index, it == by_id.end() ? nullptr : it->second});
  }
  return cases;
}

// 0-based position of the gold label in the ranking, or npos.
std::size_t gold_rank(const Case& c, const LabelSpace& labels) {
  if (c.prediction == nullptr) return std::string::npos;
  const auto& name = labels[c.gold].name;
  const auto& entries = c.prediction->entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].label == name) return i;
  }
  return std::string::npos;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

template <typename Abstains>
PrfResult prf(const std::vector<Case>& cases, const LabelSpace& labels, Abstains abstains) {
  PrfResult r;
  r.n_gold = cases.size();
  for (const auto& c : cases) {
    if (c.prediction == nullptr || c.prediction->entries.empty() || abstains(*c.prediction)) continue;
    ++r.n_predicted;
    if (c.prediction->top_label() == labels[c.gold].name) ++r.hits;
  }
  r.precision_defined = r.n_predicted > 0;
  r.precision = ratio(r.hits, r.n_predicted);
  r.recall = ratio(r.hits, r.n_gold);
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::map<int, double> topk_accuracy(std::span<const ScoredLabels> predictions, const Corpus& golds,
                                    const LabelSpace& labels, std::span<const int> ks) {
  for (const int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > labels.size()) {
      throw InputError("k=" + std::to_string(k) + " outside 1.." + std::to_string(labels.size()));
    }
  }
  const auto cases = align(predictions, golds, labels);
  std::map<int, double> out;
  for (const int k : ks) {
    std::size_t hits = 0;
    for (const auto& c : cases) {
      const auto rank = gold_rank(c, labels);
      if (rank != std::string::npos && rank < static_cast<std::size_t>(k)) ++hits;
    }
    out[k] = ratio(hits, cases.size());
  }
  return out;
}

std::vector<double> topk_curve(std::span<const ScoredLabels> predictions, const Corpus& golds,
                               const LabelSpace& labels) {
  const auto cases = align(predictions, golds, labels);
  std::vector<std::size_t> at_rank(labels.size(), 0);
  for (const auto& c : cases) {
    const auto rank = gold_rank(c, labels);
    if (rank < labels.size()) ++at_rank[rank];
  }
  std::vector<double> curve;
  std::size_t cumulative = 0;
  for (const auto n : at_rank) {
    cumulative += n;
    curve.push_back(ratio(cumulative, cases.size()));
  }
  return curve;
}

PrfResult micro_prf(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels) {
  return prf(align(predictions, golds, labels), labels,
             [](const ScoredLabels& p) { return p.abstained; });
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < size(); ++i) t += count(i, i);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const ScoredLabels> predictions, const Corpus& golds,
                                 const LabelSpace& labels) {
  const auto cases = align(predictions, golds, labels);
  const auto n = labels.size();
  ConfusionMatrix m;
  for (const auto& l : labels) m.labels.push_back(l.name);
  m.counts.assign(n * n, 0);
  m.rates.assign(n * n, 0.0);
  m.support.assign(n, 0);
  for (const auto& c : cases) {
    if (c.prediction == nullptr || c.prediction->entries.empty() || c.prediction->abstained) continue;
    const auto predicted = labels.index_of(c.prediction->top_label());
    if (!predicted) {
      throw InputError("record '" + c.prediction->gloss_id + "': predicted label '" +
                       c.prediction->top_label() + "' is not in the label space");
    }
    ++m.counts[c.gold * n + *predicted];
    ++m.support[c.gold];
  }
  for (std::size_t g = 0; g < n; ++g) {
    if (m.support[g] == 0) continue;
    for (std::size_t p = 0; p < n; ++p) m.rates[g * n + p] = ratio(m.counts[g * n + p], m.support[g]);
  }
  return m;
}

std::vector<SweepPoint> threshold_sweep(std::span<const ScoredLabels> predictions,
                                        const Corpus& golds, const LabelSpace& labels,
                                        std::vector<double> thresholds) {
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const auto cases = align(predictions, golds, labels);
  std::vector<SweepPoint> points;
  for (const double t : thresholds) {
    const auto r = prf(cases, labels, [t](const ScoredLabels& p) { return p.top_probability() < t; });
    std::size_t abstained = 0;
    for (const auto& c : cases) {
      if (c.prediction != nullptr && c.prediction->top_probability() < t) ++abstained;
    }
    points.push_back({t, r.precision, r.recall, r.f1, abstained});
  }
  return points;
}

EvalReport evaluate(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels, std::span<const int> ks) {
  EvalReport report;
  report.top_k = topk_accuracy(predictions, golds, labels, ks);
  report.topk_curve = topk_curve(predictions, golds, labels);
  const auto r = micro_prf(predictions, golds, labels);
  report.precision = r.precision;
  report.recall = r.recall;
  report.f1 = r.f1;
  report.precision_defined = r.precision_defined;
  report.n_evaluated = r.n_gold;
  report.confusion = confusion_matrix(predictions, golds, labels);

  const auto cases = align(predictions, golds, labels);
  std::vector<std::size_t> support(labels.size(), 0);
  std::vector<std::size_t> hits(labels.size(), 0);
  for (const auto& c : cases) {
    ++support[c.gold];
    if (c.prediction == nullptr || c.prediction->entries.empty()) continue;
    if (c.prediction->abstained) {
      ++report.n_abstained;
    } else if (c.prediction->top_label() == labels[c.gold].name) {
      ++hits[c.gold];
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    report.per_label[labels[i].name] = {support[i], ratio(hits[i], support[i])};
  }
  return report;
}

EvalReport evaluate(std::span<const ScoredLabels> predictions, const Corpus& golds,
                    const LabelSpace& labels) {
  std::vector<int> ks;
  for (const int k : {1, 3, 5}) {
    if (static_cast<std::size_t>(k) <= labels.size()) ks.push_back(k);
  }
  return evaluate(predictions, golds, labels, ks);
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["top_k"] = nlohmann::json::object();
  for (const auto& [k, acc] : report.top_k) j["top_k"][std::to_string(k)] = acc;
  j["topk_curve"] = report.topk_curve;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["precision_defined"] = report.precision_defined;
  j["n_evaluated"] = report.n_evaluated;
  j["n_abstained"] = report.n_abstained;

  const auto& m = report.confusion;
  nlohmann::json counts = nlohmann::json::array();
  nlohmann::json rates = nlohmann::json::array();
  for (std::size_t g = 0; g < m.size(); ++g) {
    nlohmann::json count_row = nlohmann::json::array();
    nlohmann::json rate_row = nlohmann::json::array();
    for (std::size_t p = 0; p < m.size(); ++p) {
      count_row.push_back(m.count(g, p));
      rate_row.push_back(m.rate(g, p));
    }
    counts.push_back(std::move(count_row));
    rates.push_back(std::move(rate_row));
  }
  j["confusion"] = {{"labels", m.labels}, {"counts", counts}, {"rates", rates}, {"support", m.support}};

  j["per_label"] = nlohmann::json::object();
  for (const auto& [label, stats] : report.per_label) {
    j["per_label"][label] = {{"support", stats.support}, {"hit_rate", stats.hit_rate}};
  }
  return j;
}

std::string to_text(const EvalReport& report) {
  std::string out;
  out += fmt::format("{:<20}{}\n", "records evaluated", report.n_evaluated);
  out += fmt::format("{:<20}{}\n", "abstained", report.n_abstained);
  for (const auto& [k, acc] : report.top_k) {
    out += fmt::format("{:<20}{:.4f}\n", fmt::format("top-{} accuracy", k), acc);
  }
  out += fmt::format("{:<20}{:.4f}{}\n", "micro precision", report.precision,
                     report.precision_defined ? "" : " (undefined: no predictions)");
  out += fmt::format("{:<20}{:.4f}\n", "micro recall", report.recall);
  out += fmt::format("{:<20}{:.4f}\n", "micro f1", report.f1);

  std::size_t width = 5;
  for (const auto& [label, stats] : report.per_label) width = std::max(width, label.size());
  out += fmt::format("\n{:<{}}  {:>7}  {:>8}\n", "label", width, "support", "hit-rate");
  for (const auto& label : report.confusion.labels) {
    const auto& stats = report.per_label.at(label);
    out += fmt::format("{:<{}}  {:>7}  {:>8.4f}\n", label, width, stats.support, stats.hit_rate);
  }
  return out;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "threshold,precision,recall,f1\n";
  for (const auto& p : points) out += fmt::format("{},{},{},{}\n", p.threshold, p.precision, p.recall, p.f1);
  return out;
}

std::string topk_curve_csv(const EvalReport& report) {
  std::string out = "k,accuracy\n";
  for (std::size_t i = 0; i < report.topk_curve.size(); ++i) {
    out += fmt::format("{},{}\n", i + 1, report.topk_curve[i]);
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& matrix) {
  std::string out = "gold";
  for (const auto& l : matrix.labels) out += "," + csv_field(l);
  out += '\n';
  for (std::size_t g = 0; g < matrix.size(); ++g) {
    out += csv_field(matrix.labels[g]);
    for (std::size_t p = 0; p < matrix.size(); ++p) out += fmt::format(",{}", matrix.rate(g, p));
    out += '\n';
  }
  return out;
}

std::vector<ComparisonRow> run_comparison(const Corpus& corpus, const LabelSpace& labels,
                                          std::span<const ComparisonEntry> entries,
                                          std::span<const PatternTemplate> registry,
                                          std::size_t parallelism) {
  std::vector<ComparisonRow> rows(entries.size());
  const auto run_one = [&](std::size_t i) {
    const auto& entry = entries[i];
    auto& row = rows[i];
    row.name = entry.name;
    row.config = entry.config;
    try {
      if (entry.backend == nullptr) throw InputError("no backend for configuration '" + entry.name + "'");
      row.backend = entry.backend->descriptor();
      row.predictions = classify_batch(corpus, labels, entry.config, *entry.backend, {}, registry);
      row.report = evaluate(row.predictions, corpus, labels);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.report.reset();
      row.predictions.clear();
    }
  };

  const auto workers = std::min(std::max<std::size_t>(1, parallelism), entries.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto i = next++; i < entries.size(); i = next++) run_one(i);
      });
    }
  }
  return rows;
}

nlohmann::json comparison_to_json(std::span<const ComparisonRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json j;
    j["name"] = row.name;
    j["config"] = to_json(row.config);
    j["backend"] = {{"kind", std::string(to_string(row.backend.kind))}, {"model", row.backend.model_name}};
    j["report"] = row.report ? to_json(*row.report) : nlohmann::json();
    j["error"] = row.error.empty() ? nlohmann::json() : nlohmann::json(row.error);
    out.push_back(std::move(j));
  }
  return out;
}

std::string comparison_to_text(std::span<const ComparisonRow> rows) {
  std::size_t width = 4;
  for (const auto& row : rows) width = std::max(width, row.name.size());
  std::string out = fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n", "name", width, "top-1",
                                "top-3", "top-5", "P", "R", "F1");
  const auto cell = [](const EvalReport& r, int k) {
    const auto it = r.top_k.find(k);
    return it == r.top_k.end() ? std::string("-") : fmt::format("{:.4f}", it->second);
  };
  for (const auto& row : rows) {
    if (!row.report) {
      out += fmt::format("{:<{}}  error: {}\n", row.name, width, row.error);
      continue;
    }
    const auto& r = *row.report;
    out += fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}  {:>7.4f}  {:>7.4f}  {:>7.4f}\n", row.name, width,
                       cell(r, 1), cell(r, 3), cell(r, 5), r.precision, r.recall, r.f1);
  }
  return out;
}

}  // namespace glossdom
