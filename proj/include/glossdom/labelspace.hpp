#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glossdom {

struct DomainLabel {
  std::string name;
  std::vector<std::string> descriptors;

  bool operator==(const DomainLabel&) const = default;
};

/// Splits a composed label into its single-domain components.
///
/// Components are separated by ',' and by the standalone word "and"; each
/// component is trimmed and gets its first letter capitalised. A label with no
/// separator is returned unchanged as its own sole descriptor:
///
///   "Art, architecture and archaeology" -> {"Art", "Architecture", "Archaeology"}
///   "Music"                             -> {"Music"}
std::vector<std::string> decompose_label(std::string_view name);

/// Label score as the maximum of its descriptor scores.
double map_descriptor_scores(const std::map<std::string, double, std::less<>>& per_descriptor,
                             const DomainLabel& label);

/// Ordered set of candidate labels. Order is declaration order and is used
/// for tie-breaking everywhere downstream.
class LabelSpace {
 public:
  LabelSpace() = default;
  LabelSpace(std::string name, std::vector<DomainLabel> labels,
             bool allow_shared_descriptors = false);

  /// Builds a space from bare names with auto-decomposed descriptors.
  static LabelSpace from_names(std::string name, const std::vector<std::string>& names);

  const std::string& name() const { return name_; }
  const std::vector<DomainLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  bool allow_shared_descriptors() const { return allow_shared_descriptors_; }

  const DomainLabel& operator[](std::size_t i) const { return labels_[i]; }
  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  std::optional<std::size_t> index_of(std::string_view label) const;
  bool contains(std::string_view label) const { return index_of(label).has_value(); }

  std::size_t descriptor_count() const;

 private:
  std::string name_;
  std::vector<DomainLabel> labels_;
  bool allow_shared_descriptors_ = false;
};

/// Reads `{"name": ..., "labels": [{"name": ..., "descriptors": [...]?}, ...]}`.
LabelSpace load_labelspace(const std::filesystem::path& path);
LabelSpace parse_labelspace(std::string_view json_text, const std::string& source = "<labels>");

}  // namespace glossdom
