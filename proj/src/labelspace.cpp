#include "glossdom/labelspace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

namespace {

std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> words;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

std::vector<std::string> decompose_label(std::string_view name) {
  const auto trimmed = text::trim(name);
  if (trimmed.empty()) throw InputError("empty label name");

  std::vector<std::string> components;
  bool separated = trimmed.find(',') != std::string_view::npos;
  for (const auto& chunk : text::split(trimmed, ',')) {
    std::vector<std::string> current;
    for (auto& word : words_of(chunk)) {
      if (text::to_lower(word) == "and") {
        separated = true;
        components.push_back(join(current));
        current.clear();
      } else {
        current.push_back(std::move(word));
      }
    }
    components.push_back(join(current));
  }
  if (!separated) return {std::string(trimmed)};

  std::vector<std::string> descriptors;
  for (auto& c : components) {
    if (c.empty()) continue;
    auto d = capitalize(std::move(c));
    if (std::find(descriptors.begin(), descriptors.end(), d) == descriptors.end()) {
      descriptors.push_back(std::move(d));
    }
  }
  if (descriptors.empty()) {
    throw InputError("label '" + std::string(trimmed) + "' has no descriptor components");
  }
  return descriptors;
}

double map_descriptor_scores(const std::map<std::string, double, std::less<>>& per_descriptor,
                             const DomainLabel& label) {
  if (label.descriptors.empty()) throw InputError("label '" + label.name + "' has no descriptors");
  double best = 0.0;
  bool first = true;
  for (const auto& d : label.descriptors) {
    const auto it = per_descriptor.find(d);
    if (it == per_descriptor.end()) {
      throw InputError("no score for descriptor '" + d + "' of label '" + label.name + "'");
    }
    best = first ? it->second : std::max(best, it->second);
    first = false;
  }
  return best;
}

LabelSpace::LabelSpace(std::string name, std::vector<DomainLabel> labels,
                       bool allow_shared_descriptors)
    : name_(std::move(name)),
      labels_(std::move(labels)),
      allow_shared_descriptors_(allow_shared_descriptors) {
  std::unordered_set<std::string> names;
  std::unordered_map<std::string, std::string> descriptor_owner;
  for (const auto& label : labels_) {
    if (text::trim(label.name).empty()) throw InputError("label with empty name");
    if (!names.insert(label.name).second) throw InputError("duplicate label '" + label.name + "'");
    if (label.descriptors.empty()) throw InputError("label '" + label.name + "' has no descriptors");

    std::unordered_set<std::string> own;
    for (const auto& d : label.descriptors) {
      if (text::trim(d).empty()) throw InputError("label '" + label.name + "' has an empty descriptor");
      if (!own.insert(d).second) {
        throw InputError("label '" + label.name + "' repeats descriptor '" + d + "'");
      }
      const auto key = text::to_lower(d);
      const auto [it, inserted] = descriptor_owner.emplace(key, label.name);
      if (!inserted && !allow_shared_descriptors_) {
        throw InputError("descriptor '" + d + "' is shared by labels '" + it->second + "' and '" +
                         label.name + "'");
      }
    }

    const bool single_word = decompose_label(label.name) == std::vector<std::string>{label.name};
    if (single_word && label.descriptors.size() == 1 && label.descriptors.front() != label.name) {
      throw InputError("single-domain label '" + label.name + "' must be its own sole descriptor");
    }
  }
}

LabelSpace LabelSpace::from_names(std::string name, const std::vector<std::string>& names) {
  std::vector<DomainLabel> labels;
  labels.reserve(names.size());
  for (const auto& n : names) labels.push_back({n, decompose_label(n)});
  return LabelSpace(std::move(name), std::move(labels));
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].name == label) return i;
  }
  return std::nullopt;
}

std::size_t LabelSpace::descriptor_count() const {
  std::size_t n = 0;
  for (const auto& l : labels_) n += l.descriptors.size();
  return n;
}

LabelSpace parse_labelspace(std::string_view json_text, const std::string& source) {
  if (text::trim(json_text).empty()) throw InputError(source + ": empty label file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 0, "json", e.what());
  }
  if (!doc.is_object()) throw ParseError(source, 0, "json", "expected an object");
  const auto items = doc.find("labels");
  if (items == doc.end() || !items->is_array()) {
    throw ParseError(source, 0, "labels", "missing 'labels' list");
  }
  if (items->empty()) throw InputError(source + ": label file declares no labels");

  std::vector<DomainLabel> labels;
  for (const auto& item : *items) {
    DomainLabel label;
    if (item.is_string()) {
      label.name = item.get<std::string>();
    } else if (item.is_object() && item.contains("name") && item["name"].is_string()) {
      label.name = item["name"].get<std::string>();
      if (const auto d = item.find("descriptors"); d != item.end() && !d->is_null()) {
        if (!d->is_array()) throw ParseError(source, 0, "descriptors", "must be a list of strings");
        for (const auto& s : *d) {
          if (!s.is_string()) throw ParseError(source, 0, "descriptors", "must be a list of strings");
          label.descriptors.push_back(s.get<std::string>());
        }
        if (label.descriptors.empty()) {
          throw InputError(source + ": label '" + label.name + "' overrides descriptors with an empty list");
        }
      }
    } else {
      throw ParseError(source, 0, "labels", "each label must be a string or an object with 'name'");
    }
    if (label.descriptors.empty()) label.descriptors = decompose_label(label.name);
    labels.push_back(std::move(label));
  }

  std::string name = doc.value("name", std::string());
  const bool shared = doc.value("allow_shared_descriptors", false);
  return LabelSpace(std::move(name), std::move(labels), shared);
}

LabelSpace load_labelspace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  auto space = parse_labelspace(buffer.str(), path.string());
  if (space.name().empty()) {
    return LabelSpace(path.stem().string(), space.labels(), space.allow_shared_descriptors());
  }
  return space;
}

}  // namespace glossdom
