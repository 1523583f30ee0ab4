#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace glossdom {

class LabelSpace;

/// One sense definition. gold_label is absent for unlabelled pool records.
struct GlossRecord {
  std::string id;
  std::string gloss;
  std::optional<std::string> gold_label;
  std::vector<std::string> lemmas;

  bool operator==(const GlossRecord&) const = default;
};

enum class CorpusFormat { kTsv, kJsonl };

/// Picks the format from the file extension (.jsonl / .json -> jsonl, else tsv).
CorpusFormat format_from_path(const std::filesystem::path& path);
std::optional<CorpusFormat> parse_corpus_format(std::string_view name);

/// Ordered, id-unique collection of gloss records.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::string name, std::vector<GlossRecord> records);

  const std::string& name() const { return name_; }
  const std::vector<GlossRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }
  const GlossRecord& operator[](std::size_t i) const { return records_[i]; }

  const GlossRecord* find(std::string_view id) const;

  bool operator==(const Corpus& other) const { return records_ == other.records_; }

 private:
  std::string name_;
  std::vector<GlossRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus load_corpus(const std::filesystem::path& path);

// Stream variants; `source` is used in error messages only.
Corpus read_tsv(std::istream& in, std::string name, const std::string& source = "<tsv>");
Corpus read_jsonl(std::istream& in, std::string name, const std::string& source = "<jsonl>");

void write_tsv(const Corpus& corpus, std::ostream& out);
void write_jsonl(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

struct LabelDistribution {
  // Every label of the space appears, zero counts included.
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
};

/// Tallies gold labels; unlabelled records are not counted.
LabelDistribution label_distribution(const Corpus& corpus, const LabelSpace& labels);

}  // namespace glossdom
