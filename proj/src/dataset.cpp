#include "glossdom/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "glossdom/error.hpp"
#include "glossdom/labelspace.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

namespace {

constexpr std::string_view kTsvHeader = "id\tgloss\tlabel";

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::optional<std::string> optional_label(std::string_view raw) {
  const auto label = text::trim(raw);
  if (label.empty()) return std::nullopt;
  return std::string(label);
}

class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::string source) : source_(std::move(source)) {}

  void add(GlossRecord record, std::size_t line) {
    if (record.id.empty()) throw ParseError(source_, line, "id", "empty id");
    if (record.gloss.empty()) throw ParseError(source_, line, "gloss", "empty gloss");
    if (!seen_.insert(record.id).second) {
      throw ParseError(source_, line, "id", "duplicate id '" + record.id + "'");
    }
    records_.push_back(std::move(record));
  }

  Corpus finish(std::string name) { return Corpus(std::move(name), std::move(records_)); }

 private:
  std::string source_;
  std::vector<GlossRecord> records_;
  std::unordered_set<std::string> seen_;
};

}  // namespace

Corpus::Corpus(std::string name, std::vector<GlossRecord> records)
    : name_(std::move(name)), records_(std::move(records)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (text::trim(r.gloss).empty()) throw InputError("record '" + r.id + "' has an empty gloss");
    if (!index_.emplace(r.id, i).second) throw InputError("duplicate id '" + r.id + "'");
  }
}

const GlossRecord* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = text::to_lower(path.extension().string());
  return (ext == ".jsonl" || ext == ".json") ? CorpusFormat::kJsonl : CorpusFormat::kTsv;
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  return std::nullopt;
}

Corpus read_tsv(std::istream& in, std::string name, const std::string& source) {
  CorpusBuilder builder(source);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (!header_seen) {
      if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
      if (line != kTsvHeader) {
        throw ParseError(source, line_no, "header", "expected header 'id<TAB>gloss<TAB>label'");
      }
      header_seen = true;
      continue;
    }
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 2 && fields.size() != 3) {
      throw ParseError(source, line_no, "columns",
                       "expected 3 tab-separated columns, found " + std::to_string(fields.size()));
    }
    GlossRecord record;
    record.id = std::string(text::trim(fields[0]));
    record.gloss = std::string(text::trim(fields[1]));
    if (fields.size() == 3) record.gold_label = optional_label(fields[2]);
    builder.add(std::move(record), line_no);
  }
  return builder.finish(std::move(name));
}

Corpus read_jsonl(std::istream& in, std::string name, const std::string& source) {
  CorpusBuilder builder(source);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, "json", e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "json", "expected an object");

    GlossRecord record;
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string()) {
      throw ParseError(source, line_no, "id", "missing or non-string 'id'");
    }
    record.id = id->get<std::string>();
    const auto gloss = j.find("gloss");
    if (gloss == j.end() || !gloss->is_string()) {
      throw ParseError(source, line_no, "gloss", "missing or non-string 'gloss'");
    }
    record.gloss = std::string(text::trim(gloss->get_ref<const std::string&>()));
    if (const auto label = j.find("label"); label != j.end() && !label->is_null()) {
      if (!label->is_string()) throw ParseError(source, line_no, "label", "'label' must be a string or null");
      record.gold_label = optional_label(label->get_ref<const std::string&>());
    }
    if (const auto lemmas = j.find("lemmas"); lemmas != j.end() && !lemmas->is_null()) {
      if (!lemmas->is_array()) throw ParseError(source, line_no, "lemmas", "'lemmas' must be a list");
      for (const auto& lemma : *lemmas) {
        if (!lemma.is_string()) throw ParseError(source, line_no, "lemmas", "lemmas must be strings");
        record.lemmas.push_back(lemma.get<std::string>());
      }
    }
    builder.add(std::move(record), line_no);
  }
  return builder.finish(std::move(name));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  auto in = open_input(path);
  auto name = path.stem().string();
  return format == CorpusFormat::kTsv ? read_tsv(in, std::move(name), path.string())
                                      : read_jsonl(in, std::move(name), path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, format_from_path(path));
}

void write_tsv(const Corpus& corpus, std::ostream& out) {
  const auto check = [](const GlossRecord& r, std::string_view field, std::string_view value) {
    if (value.find_first_of("\t\n\r") != std::string_view::npos) {
      throw InputError("record '" + r.id + "': " + std::string(field) +
                       " contains a tab or newline; use JSONL");
    }
  };
  out << kTsvHeader << '\n';
  for (const auto& r : corpus) {
    check(r, "id", r.id);
    check(r, "gloss", r.gloss);
    if (r.gold_label) check(r, "label", *r.gold_label);
    out << r.id << '\t' << r.gloss << '\t' << r.gold_label.value_or("") << '\n';
  }
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& r : corpus) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["gloss"] = r.gloss;
    j["label"] = r.gold_label ? nlohmann::ordered_json(*r.gold_label) : nlohmann::ordered_json();
    if (!r.lemmas.empty()) j["lemmas"] = r.lemmas;
    out << j.dump() << '\n';
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  if (format == CorpusFormat::kTsv) {
    write_tsv(corpus, out);
  } else {
    write_jsonl(corpus, out);
  }
}

LabelDistribution label_distribution(const Corpus& corpus, const LabelSpace& labels) {
  LabelDistribution dist;
  for (const auto& label : labels) dist.counts.emplace(label.name, 0);
  for (const auto& r : corpus) {
    if (!r.gold_label) continue;
    const auto it = dist.counts.find(*r.gold_label);
    if (it == dist.counts.end()) {
      throw InputError("record '" + r.id + "': gold label '" + *r.gold_label +
                       "' is not in label space '" + labels.name() + "'");
    }
    ++it->second;
    ++dist.total;
  }
  return dist;
}

}  // namespace glossdom
