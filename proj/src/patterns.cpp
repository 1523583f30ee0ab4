#include "glossdom/patterns.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::kMlm:
      return "mlm";
    case Formulation::kNsp:
      return "nsp";
    case Formulation::kNli:
      return "nli";
  }
  return "?";
}

std::optional<Formulation> parse_formulation(std::string_view name) {
  if (name == "mlm") return Formulation::kMlm;
  if (name == "nsp") return Formulation::kNsp;
  if (name == "nli") return Formulation::kNli;
  return std::nullopt;
}

void validate(const PatternTemplate& pattern) {
  const auto fail = [&](const std::string& why) {
    throw InputError("pattern '" + pattern.id + "': " + why);
  };
  if (pattern.id.empty()) throw InputError("pattern with empty id");
  const auto n_context = text::count_occurrences(pattern.text, kContextSlot);
  const auto n_label = text::count_occurrences(pattern.text, kLabelSlot);
  const auto n_mask = text::count_occurrences(pattern.text, kMaskSlot);
  if (pattern.formulation == Formulation::kMlm) {
    if (n_context != 1) fail("mlm template needs exactly one [context]");
    if (n_mask != 1) fail("mlm template needs exactly one [MASK]");
    if (n_label != 0) fail("mlm template must not contain [label]");
  } else {
    if (n_label != 1) fail("template needs exactly one [label]");
    if (n_mask != 0) fail("only mlm templates may contain [MASK]");
    if (n_context != 0) fail("the gloss is always the first sentence; [context] is not allowed here");
  }
}

RenderedQuery render(const PatternTemplate& pattern, std::string_view gloss,
                     std::optional<std::string_view> label) {
  validate(pattern);
  if (text::trim(gloss).empty()) throw InputError("empty gloss");

  RenderedQuery query;
  query.formulation = pattern.formulation;
  if (pattern.formulation == Formulation::kMlm) {
    if (label) throw InputError("pattern '" + pattern.id + "': mlm patterns take no label");
    query.first = pattern.text;
    text::replace_first(query.first, kContextSlot, gloss);
    return query;
  }

  if (!label || text::trim(*label).empty()) {
    throw InputError("pattern '" + pattern.id + "': a label is required");
  }
  std::string hypothesis = pattern.text;
  text::replace_first(hypothesis, kLabelSlot,
                      pattern.lowercase_label ? text::to_lower(*label) : std::string(*label));
  query.first = std::string(gloss);
  query.second = std::move(hypothesis);
  query.label = std::string(*label);
  return query;
}

const std::vector<PatternTemplate>& builtin_registry() {
  static const std::vector<PatternTemplate> registry = [] {
    std::vector<PatternTemplate> r = {
        {"topic", Formulation::kNli, "Topic: [label]"},
        {"domain", Formulation::kNli, "Domain: [label]"},
        {"theme", Formulation::kNli, "Theme: [label]"},
        {"subject", Formulation::kNli, "Subject: [label]"},
        {"is-about", Formulation::kNli, "Is about [label]"},
        {"topic-or-domain", Formulation::kNli, "Topic or domain about [label]"},
        {"topic-of-sentence", Formulation::kNli, "The topic of the sentence is about [label]"},
        {"domain-of-sentence", Formulation::kNli, "The domain of the sentence is about [label]"},
        {"topic-or-domain-of-sentence", Formulation::kNli,
         "The topic or domain of the sentence is about [label]"},
        {"nsp-domain-or-topic", Formulation::kNsp, "Domain or topic about [label]"},
        {"nsp-topic-or-domain", Formulation::kNsp, "Topic or domain about [label]"},
        {std::string(kDefaultMlmPattern), Formulation::kMlm, "Context: [context] Topic: [MASK]"},
    };
    for (const auto& p : r) validate(p);
    return r;
  }();
  return registry;
}

const PatternTemplate* find_pattern(std::span<const PatternTemplate> registry, std::string_view id) {
  for (const auto& p : registry) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::vector<PatternTemplate> parse_patterns(std::string_view json_text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 0, "json", e.what());
  }
  if (!doc.is_array()) throw ParseError(source, 0, "json", "expected a list of patterns");

  std::vector<PatternTemplate> patterns;
  std::unordered_set<std::string> ids;
  for (const auto& item : doc) {
    if (!item.is_object()) throw ParseError(source, 0, "json", "each pattern must be an object");
    for (const char* key : {"id", "formulation", "template"}) {
      if (!item.contains(key) || !item[key].is_string()) {
        throw ParseError(source, 0, key, std::string("missing or non-string '") + key + "'");
      }
    }
    PatternTemplate p;
    p.id = item["id"].get<std::string>();
    const auto f = parse_formulation(item["formulation"].get<std::string>());
    if (!f) throw ParseError(source, 0, "formulation", "must be one of mlm, nsp, nli");
    p.formulation = *f;
    p.text = item["template"].get<std::string>();
    p.lowercase_label = item.value("lowercase_label", true);
    validate(p);
    if (!ids.insert(p.id).second) throw InputError(source + ": duplicate pattern id '" + p.id + "'");
    patterns.push_back(std::move(p));
  }
  return patterns;
}

std::vector<PatternTemplate> load_patterns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_patterns(buffer.str(), path.string());
}

}  // namespace glossdom
