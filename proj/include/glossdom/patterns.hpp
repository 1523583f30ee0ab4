#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glossdom {

enum class Formulation { kMlm, kNsp, kNli };

std::string_view to_string(Formulation f);
std::optional<Formulation> parse_formulation(std::string_view name);

inline constexpr std::string_view kContextSlot = "[context]";
inline constexpr std::string_view kLabelSlot = "[label]";
inline constexpr std::string_view kMaskSlot = "[MASK]";

struct PatternTemplate {
  std::string id;
  Formulation formulation = Formulation::kNli;
  std::string text;
  // Labels are lower-cased before substitution unless this is false.
  bool lowercase_label = true;

  bool operator==(const PatternTemplate&) const = default;
};

// Throws InputError if the template's placeholders do not fit its formulation.
void validate(const PatternTemplate& pattern);

/// Scorer input. For mlm, `first` is the whole masked sequence and the other
/// fields are empty; for nsp/nli, `first` is the raw gloss and `second` the
/// rendered hypothesis.
struct RenderedQuery {
  Formulation formulation = Formulation::kNli;
  std::string first;
  std::optional<std::string> second;
  std::optional<std::string> label;

  bool operator==(const RenderedQuery&) const = default;
};

RenderedQuery render(const PatternTemplate& pattern, std::string_view gloss,
                     std::optional<std::string_view> label = std::nullopt);

/// Built-in patterns: the nine explored entailment hypotheses, two NSP
/// continuations and the masked "Context: ... Topic: [MASK]" prompt.
const std::vector<PatternTemplate>& builtin_registry();

inline constexpr std::string_view kDefaultMlmPattern = "mlm-context-topic";

const PatternTemplate* find_pattern(std::span<const PatternTemplate> registry, std::string_view id);

/// Reads a JSON list of `{"id", "formulation", "template", "lowercase_label"?}`.
std::vector<PatternTemplate> load_patterns(const std::filesystem::path& path);
std::vector<PatternTemplate> parse_patterns(std::string_view json_text,
                                            const std::string& source = "<patterns>");

}  // namespace glossdom
