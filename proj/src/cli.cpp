#include "glossdom/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "glossdom/annotate.hpp"
#include "glossdom/dataset.hpp"
#include "glossdom/engine.hpp"
#include "glossdom/error.hpp"
#include "glossdom/eval.hpp"
#include "glossdom/labelspace.hpp"
#include "glossdom/patterns.hpp"
#include "glossdom/remote_scorer.hpp"
#include "glossdom/scorer.hpp"
#include "glossdom/text.hpp"

namespace glossdom::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalSettings {
  std::string backend = "remote";
  std::string backend_url;
  std::string model;
  int timeout_ms = 30000;
  int max_in_flight = 4;
  std::string config_file;
  std::uint64_t seed = 13;
};

struct EngineSettings {
  std::string labels;
  std::string formulation = "nli";
  std::string pattern;
  std::string patterns_file;
  bool descriptors = false;
  double threshold = -1.0;  // negative = no threshold
  double temperature = 1.0;
  int mlm_top_k = 100;
  std::size_t parallel = 1;
};

struct LabelSettings {
  std::string text;
  std::string file;
  std::string format;
  int top = 0;
  bool jsonl = false;
  int open_topics = 0;
  bool cleanup = false;
};

struct EvaluateSettings {
  std::string corpus;
  std::string format;
  std::string topk = "1,3,5";
  std::string thresholds;
  std::string out_dir;
  std::string predictions;
  bool skip_errors = false;
};

struct SweepSettings {
  std::string corpus;
  std::string format;
  std::string patterns = "all";
  std::string thresholds = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95";
  std::string out_dir;
};

struct AnnotateSettings {
  std::string pool;
  std::string format;
  std::string out;
  bool resume = false;
  std::size_t batch_size = 16;
};

struct ExportSettings {
  std::string silver;
  std::string split = "0.9,0.1";
  std::string out_dir;
};

// ---- settings layering ------------------------------------------------------

const std::map<std::string, std::string>& env_names() {
  static const std::map<std::string, std::string> names = {
      {"backend-url", "GLOSSDOM_BACKEND_URL"},
      {"timeout-ms", "GLOSSDOM_BACKEND_TIMEOUT_MS"},
  };
  return names;
}

std::string normalize_key(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// key=value lines; '#' starts a comment; optional quotes around the value.
std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '[') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), line_no, "", "expected key=value");
    auto key = normalize_key(std::string(text::trim(body.substr(0, eq))));
    auto value = std::string(text::trim(body.substr(eq + 1)));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    values[key] = value;
  }
  return values;
}

std::vector<CLI::Option*> options_of(CLI::App& app) {
  std::vector<CLI::Option*> out;
  for (auto* opt : app.get_options([](const CLI::Option* o) { return !o->get_lnames().empty(); })) {
    if (opt->get_lnames().front() != "help" && opt->get_lnames().front() != "config") out.push_back(opt);
  }
  return out;
}

// Fills options not given on the command line from env, then from the config file.
void apply_layers(CLI::App& app, CLI::App& sub, const std::map<std::string, std::string>& file) {
  std::set<std::string> known;
  for (CLI::App* scope : {&app, &sub}) {
    for (auto* opt : options_of(*scope)) {
      const auto& name = opt->get_lnames().front();
      known.insert(name);
      if (opt->count() > 0) continue;
      std::optional<std::string> value;
      if (const auto env = env_names().find(name); env != env_names().end()) {
        if (const char* v = std::getenv(env->second.c_str()); v != nullptr) value = v;
      }
      if (!value) {
        if (const auto it = file.find(name); it != file.end()) value = it->second;
      }
      if (value) {
        opt->add_result(*value);
        opt->run_callback();
      }
    }
  }
  for (const auto& [key, _] : file) {
    bool anywhere = known.contains(key);
    for (const auto* other : app.get_subcommands({})) {
      for (const auto* opt : other->get_options()) {
        if (!opt->get_lnames().empty() && opt->get_lnames().front() == key) anywhere = true;
      }
    }
    if (!anywhere) throw InputError("unknown key '" + key + "' in config file");
  }
}

json resolved_config(CLI::App& app, CLI::App& sub) {
  json j;
  j["command"] = sub.get_name();
  for (CLI::App* scope : {&app, &sub}) {
    for (auto* opt : options_of(*scope)) {
      const auto& name = opt->get_lnames().front();
      const auto& results = opt->results();
      if (!results.empty()) {
        j[name] = results.back();
      } else {
        j[name] = opt->get_default_str();
      }
    }
  }
  return j;
}

// ---- wiring -----------------------------------------------------------------

std::unique_ptr<Scorer> make_backend(const GlobalSettings& g) {
  if (g.backend == "mock") return std::make_unique<MockScorer>(g.model.empty() ? "mock-overlap" : g.model);
  RemoteOptions options;
  options.url = g.backend_url;
  options.model = g.model;
  options.timeout = std::chrono::milliseconds(g.timeout_ms);
  options.max_in_flight = g.max_in_flight;
  return std::make_unique<RemoteScorer>(std::move(options));
}

std::string default_pattern(EngineFormulation f) {
  switch (f) {
    case EngineFormulation::kNli:
      return "domain-of-sentence";
    case EngineFormulation::kNsp:
      return "nsp-domain-or-topic";
    case EngineFormulation::kMlmConstrained:
      return std::string(kDefaultMlmPattern);
  }
  return {};
}

struct EngineSetup {
  LabelSpace labels;
  EngineConfig config;
  std::vector<PatternTemplate> registry;
};

EngineSetup setup_engine(const EngineSettings& s, bool need_pattern = true) {
  if (s.labels.empty()) throw InputError("--labels is required");
  EngineSetup setup;
  setup.labels = load_labelspace(s.labels);
  const auto f = parse_engine_formulation(s.formulation);
  if (!f) throw InputError("unknown formulation '" + s.formulation + "' (nli, nsp, mlm-constrained)");
  setup.config.formulation = *f;
  setup.config.pattern_id = s.pattern.empty() ? default_pattern(*f) : s.pattern;
  setup.config.use_descriptors = s.descriptors;
  if (s.threshold >= 0.0) setup.config.threshold = s.threshold;
  setup.config.temperature = s.temperature;
  setup.config.mlm_top_k = s.mlm_top_k;
  validate(setup.config);

  setup.registry = builtin_registry();
  if (!s.patterns_file.empty()) {
    for (auto& p : load_patterns(s.patterns_file)) {
      if (find_pattern(setup.registry, p.id) != nullptr) {
        throw InputError("custom pattern id '" + p.id + "' collides with a built-in pattern");
      }
      setup.registry.push_back(std::move(p));
    }
  }
  if (need_pattern) {
    const auto* pattern = find_pattern(setup.registry, setup.config.pattern_id);
    if (pattern == nullptr) {
      std::string known;
      for (const auto& p : setup.registry) known += (known.empty() ? "" : ", ") + p.id;
      throw InputError("unknown pattern '" + setup.config.pattern_id + "' (known: " + known + ")");
    }
  }
  return setup;
}

Corpus read_corpus(const std::string& path, const std::string& format) {
  if (path.empty()) throw InputError("a corpus file is required");
  if (format.empty()) return load_corpus(path);
  const auto f = parse_corpus_format(format);
  if (!f) throw InputError("unknown corpus format '" + format + "' (tsv, jsonl)");
  return load_corpus(path, *f);
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

void add_engine_options(CLI::App& sub, EngineSettings& s, bool with_pattern, bool with_threshold) {
  sub.add_option("--labels", s.labels, "Label file (JSON)");
  sub.add_option("--formulation", s.formulation, "nli, nsp or mlm-constrained");
  if (with_pattern) sub.add_option("--pattern", s.pattern, "Pattern id");
  sub.add_option("--patterns-file", s.patterns_file, "Extra patterns (JSON list)");
  sub.add_flag("--descriptors", s.descriptors, "Score label descriptors and max-map them");
  if (with_threshold) sub.add_option("--threshold", s.threshold, "Abstain below this top probability");
  sub.add_option("--temperature", s.temperature, "Softmax temperature");
  sub.add_option("--mlm-top-k", s.mlm_top_k, "Mask candidates for mlm-constrained");
  sub.add_option("--parallel", s.parallel, "Glosses classified concurrently");
}

// ---- commands ---------------------------------------------------------------

int cmd_label(const GlobalSettings& g, const EngineSettings& es, const LabelSettings& s, const json& config,
              std::ostream& out) {
  Corpus corpus;
  if (!s.file.empty()) {
    corpus = read_corpus(s.file, s.format);
  } else {
    if (text::trim(s.text).empty()) throw InputError("empty gloss");
    corpus = Corpus("text", {GlossRecord{"text", s.text, std::nullopt, {}}});
  }
  auto backend = make_backend(g);

  if (s.open_topics != 0) {
    OpenTopicOptions options;
    options.cleanup = s.cleanup;
    for (const auto& record : corpus) {
      if (corpus.size() > 1) out << "# " << record.id << '\n';
      for (const auto& p : predict_open_topics(record, s.open_topics, *backend, options)) {
        out << fmt::format("{:>3}  {:<24} {:.4f}\n", p.rank, p.token, p.score);
      }
    }
    return kExitOk;
  }

  const auto setup = setup_engine(es);
  BatchOptions batch;
  batch.parallelism = es.parallel;
  const auto results = classify_batch(corpus, setup.labels, setup.config, *backend, batch, setup.registry);
  if (s.jsonl) {
    write_predictions(out, results, config);
    return kExitOk;
  }
  std::size_t width = 0;
  for (const auto& l : setup.labels) width = std::max(width, l.name.size());
  for (const auto& scored : results) {
    if (results.size() > 1) out << "# " << scored.gloss_id << '\n';
    std::size_t shown = 0;
    for (const auto& e : scored.entries) {
      if (s.top > 0 && shown++ >= static_cast<std::size_t>(s.top)) break;
      out << fmt::format("{:<{}}  {:.4f}\n", e.label, width, e.probability);
    }
    if (scored.abstained) out << "(abstained: top probability below threshold)\n";
  }
  return kExitOk;
}

int cmd_evaluate(const GlobalSettings& g, const EngineSettings& es, const EvaluateSettings& s,
                 const json& config, std::ostream& out, std::ostream& err) {
  const auto corpus = read_corpus(s.corpus, s.format);
  const bool from_dump = !s.predictions.empty();
  const auto setup = setup_engine(es, !from_dump);
  const auto ks = text::parse_int_list(s.topk);

  std::vector<ScoredLabels> predictions;
  if (from_dump) {
    predictions = load_predictions(s.predictions);
  } else {
    auto backend = make_backend(g);
    BatchOptions batch;
    batch.parallelism = es.parallel;
    batch.fail_fast = !s.skip_errors;
    batch.on_skip = [&err](const GlossRecord& r, const std::exception& e) {
      err << "skipped " << r.id << ": " << e.what() << '\n';
    };
    predictions = classify_batch(corpus, setup.labels, setup.config, *backend, batch, setup.registry);
  }

  const auto report = evaluate(predictions, corpus, setup.labels, ks);
  const auto text_report = to_text(report);
  out << text_report;

  if (!s.out_dir.empty()) {
    fs::create_directories(s.out_dir);
    const fs::path dir = s.out_dir;
    write_file(dir / "report.json", json{{"config", config}, {"report", to_json(report)}}.dump(2) + "\n");
    write_file(dir / "report.txt", text_report);
    write_file(dir / "topk_curve.csv", topk_curve_csv(report));
    write_file(dir / "confusion.csv", confusion_csv(report.confusion));
    if (!s.thresholds.empty()) {
      const auto points = threshold_sweep(predictions, corpus, setup.labels, text::parse_double_list(s.thresholds));
      write_file(dir / "sweep.csv", sweep_csv(points));
    }
    if (!from_dump) {
      std::ostringstream dump;
      write_predictions(dump, predictions, config);
      write_file(dir / "predictions.jsonl", dump.str());
    }
  }
  return kExitOk;
}

int cmd_sweep(const GlobalSettings& g, const EngineSettings& es, const SweepSettings& s, const json& config,
              std::ostream& out) {
  const auto corpus = read_corpus(s.corpus, s.format);
  const auto setup = setup_engine(es, false);
  const auto wanted = pattern_formulation(setup.config.formulation);

  std::vector<std::string> ids;
  if (text::trim(s.patterns) == "all") {
    for (const auto& p : setup.registry) {
      if (p.formulation == wanted) ids.push_back(p.id);
    }
  } else {
    for (const auto& raw : text::split(s.patterns, ',')) {
      const auto id = std::string(text::trim(raw));
      if (find_pattern(setup.registry, id) == nullptr) {
        std::string known;
        for (const auto& p : setup.registry) known += (known.empty() ? "" : ", ") + p.id;
        throw InputError("unknown pattern '" + id + "' (known: " + known + ")");
      }
      ids.push_back(id);
    }
  }
  if (ids.empty()) throw InputError("no patterns to sweep");
  const auto thresholds = text::parse_double_list(s.thresholds);

  auto backend = make_backend(g);
  std::vector<ComparisonEntry> entries;
  for (const auto& id : ids) {
    auto cfg = setup.config;
    cfg.pattern_id = id;
    entries.push_back({id, cfg, backend.get()});
  }
  const auto rows = run_comparison(corpus, setup.labels, entries, setup.registry, es.parallel);
  const auto table = comparison_to_text(rows);
  out << table;

  if (!s.out_dir.empty()) {
    fs::create_directories(s.out_dir);
    const fs::path dir = s.out_dir;
    write_file(dir / "comparison.json", json{{"config", config}, {"rows", comparison_to_json(rows)}}.dump(2) + "\n");
    write_file(dir / "comparison.txt", table);
    for (const auto& row : rows) {
      if (!row.report) continue;
      const auto points = threshold_sweep(row.predictions, corpus, setup.labels, thresholds);
      write_file(dir / ("sweep_" + row.name + ".csv"), sweep_csv(points));
    }
  }
  const bool all_failed = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return !r.report; });
  return all_failed ? kExitBackend : kExitOk;
}

int cmd_annotate(const GlobalSettings& g, const EngineSettings& es, const AnnotateSettings& s,
                 std::ostream& out) {
  const auto pool = read_corpus(s.pool, s.format);
  const auto setup = setup_engine(es);
  if (s.out.empty()) throw InputError("--out is required");
  auto backend = make_backend(g);
  AnnotateOptions options;
  options.output = s.out;
  options.resume = s.resume;
  options.batch_size = s.batch_size;
  options.parallelism = es.parallel;
  const auto summary = annotate_pool(pool, setup.labels, setup.config, *backend, options, setup.registry);
  out << fmt::format("processed {}  written {}  abstained {}  skipped {}  queries {}\n", summary.processed,
                     summary.written, summary.abstained, summary.skipped, summary.queries);
  return kExitOk;
}

int cmd_export(const GlobalSettings& g, const EngineSettings& es, const ExportSettings& s, std::ostream& out) {
  if (es.labels.empty()) throw InputError("--labels is required");
  if (s.silver.empty()) throw InputError("--silver is required");
  if (s.out_dir.empty()) throw InputError("--out-dir is required");
  const auto labels = load_labelspace(es.labels);
  const auto fractions = text::parse_double_list(s.split);
  if (fractions.size() != 2) throw InputError("--split takes two fractions: train,dev");
  const auto silver = load_silver(s.silver);
  const auto result = export_training_set(silver, labels, {fractions[0], fractions[1]}, g.seed, s.out_dir);
  out << fmt::format("train {}  dev {}  labels {}\n", result.n_train, result.n_dev, result.labels_path.string());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot domain labelling of glosses"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();

  GlobalSettings g;
  app.add_option("--backend", g.backend, "Scoring backend")->check(CLI::IsMember({"remote", "mock"}));
  app.add_option("--backend-url", g.backend_url, "Inference server base URL");
  app.add_option("--model", g.model, "Model name sent to the backend");
  app.add_option("--timeout-ms", g.timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
  app.add_option("--max-in-flight", g.max_in_flight, "Concurrent backend requests")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_file, "key=value settings file");
  app.add_option("--seed", g.seed, "Seed for data splits");

  EngineSettings es;
  LabelSettings ls;
  EvaluateSettings evs;
  SweepSettings ss;
  AnnotateSettings as;
  ExportSettings xs;

  auto* label = app.add_subcommand("label", "Rank labels for a gloss or a corpus");
  label->add_option("--text", ls.text, "Gloss text");
  label->add_option("--file", ls.file, "Corpus file (tsv or jsonl)");
  label->add_option("--format", ls.format, "tsv or jsonl (default: by extension)");
  label->add_option("--top", ls.top, "Show only the N best labels");
  label->add_flag("--jsonl", ls.jsonl, "Print prediction dump lines");
  label->add_option("--open-topics", ls.open_topics, "Free mask filling: show K topics");
  label->add_flag("--cleanup", ls.cleanup, "Clean open-topic tokens");
  add_engine_options(*label, es, true, true);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Classify a gold corpus and report metrics");
  evaluate_cmd->add_option("--corpus", evs.corpus, "Gold corpus");
  evaluate_cmd->add_option("--format", evs.format, "tsv or jsonl");
  evaluate_cmd->add_option("--topk", evs.topk, "Comma-separated k values");
  evaluate_cmd->add_option("--thresholds", evs.thresholds, "Also write sweep.csv for these thresholds");
  evaluate_cmd->add_option("--out-dir", evs.out_dir, "Report directory");
  evaluate_cmd->add_option("--predictions", evs.predictions, "Score an existing prediction dump");
  evaluate_cmd->add_flag("--skip-errors", evs.skip_errors, "Skip glosses whose scoring fails");
  add_engine_options(*evaluate_cmd, es, true, true);

  auto* sweep = app.add_subcommand("sweep", "Compare patterns and sweep thresholds");
  sweep->add_option("--corpus", ss.corpus, "Gold corpus");
  sweep->add_option("--format", ss.format, "tsv or jsonl");
  sweep->add_option("--patterns", ss.patterns, "'all' or comma-separated pattern ids");
  sweep->add_option("--thresholds", ss.thresholds, "Comma-separated thresholds");
  sweep->add_option("--out-dir", ss.out_dir, "Output directory");
  add_engine_options(*sweep, es, false, false);

  auto* annotate = app.add_subcommand("annotate", "Silver-label an unlabelled pool");
  annotate->add_option("--pool", as.pool, "Pool corpus");
  annotate->add_option("--format", as.format, "tsv or jsonl");
  annotate->add_option("--out", as.out, "Silver JSONL output");
  annotate->add_flag("--resume", as.resume, "Continue an interrupted run");
  annotate->add_option("--batch-size", as.batch_size, "Glosses per commit")->check(CLI::PositiveNumber);
  add_engine_options(*annotate, es, true, true);

  auto* export_cmd = app.add_subcommand("export", "Split silver data into training files");
  export_cmd->add_option("--silver", xs.silver, "Silver JSONL");
  export_cmd->add_option("--labels", es.labels, "Label file (JSON)");
  export_cmd->add_option("--split", xs.split, "train,dev fractions");
  export_cmd->add_option("--out-dir", xs.out_dir, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    std::map<std::string, std::string> file;
    if (!g.config_file.empty()) file = read_config_file(g.config_file);
    apply_layers(app, *sub, file);
    const auto config = resolved_config(app, *sub);

    if (sub == label) return cmd_label(g, es, ls, config, out);
    if (sub == evaluate_cmd) return cmd_evaluate(g, es, evs, config, out, err);
    if (sub == sweep) return cmd_sweep(g, es, ss, config, out);
    if (sub == annotate) return cmd_annotate(g, es, as, out);
    return cmd_export(g, es, xs, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace glossdom::cli
