#include "glossdom/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kRemote ? "remote" : "mock";
}

bool Scorer::supports(Formulation f) const {
  return descriptor().supported_formulations.contains(f);
}

namespace mock {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current += static_cast<char>(std::tolower(u));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      // function words
      "a", "about", "an", "and", "are", "as", "at", "be", "been", "being", "but", "by", "for",
      "from", "he", "her", "his", "how", "i", "in", "into", "is", "it", "its", "me", "my", "no",
      "not", "of", "on", "onto", "or", "our", "over", "she", "than", "that", "the", "their",
      "them", "then", "there", "these", "they", "this", "those", "to", "under", "was", "we",
      "were", "what", "when", "where", "which", "who", "whom", "whose", "with", "without", "you",
      "your",
      // pattern scaffolding
      "context", "domain", "sentence", "subject", "theme", "topic"};
  return words;
}

std::vector<std::string> content_tokens(std::string_view text) {
  auto tokens = tokenize(text);
  std::erase_if(tokens, [](const std::string& t) { return stopwords().contains(t); });
  return tokens;
}

double overlap(std::string_view first, std::string_view second) {
  const auto a = content_tokens(first);
  const auto b = content_tokens(second);
  const std::set<std::string> premise(a.begin(), a.end());
  const std::set<std::string> hypothesis(b.begin(), b.end());
  std::size_t shared = 0;
  for (const auto& w : hypothesis) shared += premise.count(w);
  return static_cast<double>(shared) / static_cast<double>(std::max<std::size_t>(1, hypothesis.size()));
}

}  // namespace mock

namespace {

void require_nonempty(std::size_t n) {
  if (n == 0) throw InputError("empty scoring batch");
}

}  // namespace

MockScorer::MockScorer(std::string model_name) : model_name_(std::move(model_name)) {}

BackendDescriptor MockScorer::descriptor() const {
  return {BackendKind::kMock, {Formulation::kMlm, Formulation::kNsp, Formulation::kNli}, model_name_};
}

ScoreBatch<NliScores> MockScorer::score_nli(std::span<const TextPair> batch) {
  require_nonempty(batch.size());
  ScoreBatch<NliScores> out;
  out.results.reserve(batch.size());
  for (const auto& pair : batch) {
    const double entailment = mock::kFloor + mock::kEntailmentSpan * mock::overlap(pair.first, pair.second);
    const double rest = 1.0 - entailment;
    out.results.push_back({entailment, rest * 2.0 / 3.0, rest / 3.0});
  }
  return out;
}

ScoreBatch<NspScore> MockScorer::score_nsp(std::span<const TextPair> batch) {
  require_nonempty(batch.size());
  ScoreBatch<NspScore> out;
  out.results.reserve(batch.size());
  for (const auto& pair : batch) {
    out.results.push_back({mock::kFloor + mock::kNextSpan * mock::overlap(pair.first, pair.second)});
  }
  return out;
}

ScoreBatch<std::vector<MaskPrediction>> MockScorer::fill_mask(std::span<const std::string> sequences,
                                                              int k) {
  require_nonempty(sequences.size());
  if (k < 1) throw InputError("k must be positive");
  if (k > mock::kVocabularyBudget) {
    throw BackendError("top_k " + std::to_string(k) + " exceeds the mock vocabulary budget of " +
                       std::to_string(mock::kVocabularyBudget));
  }
  ScoreBatch<std::vector<MaskPrediction>> out;
  for (const auto& sequence : sequences) {
    if (text::count_occurrences(sequence, kMaskSlot) != 1) {
      throw InputError("sequence must contain exactly one [MASK]");
    }
    std::string context = sequence;
    text::replace_first(context, kMaskSlot, " ");
    const auto tokens = mock::content_tokens(context);

    std::map<std::string, std::size_t> freq;
    for (const auto& t : tokens) ++freq[t];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    // map order is alphabetical, so a stable sort by frequency breaks ties alphabetically
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<MaskPrediction> predictions;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
      predictions.push_back({ranked[i].first,
                             static_cast<double>(ranked[i].second) / static_cast<double>(tokens.size()),
                             static_cast<int>(i + 1)});
    }
    out.results.push_back(std::move(predictions));
  }
  return out;
}

ScoreBatch<NliScores> CountingScorer::score_nli(std::span<const TextPair> batch) {
  ++calls_;
  queries_ += batch.size();
  return inner_.score_nli(batch);
}

ScoreBatch<NspScore> CountingScorer::score_nsp(std::span<const TextPair> batch) {
  ++calls_;
  queries_ += batch.size();
  return inner_.score_nsp(batch);
}

ScoreBatch<std::vector<MaskPrediction>> CountingScorer::fill_mask(std::span<const std::string> sequences,
                                                                  int k) {
  ++calls_;
  queries_ += sequences.size();
  return inner_.fill_mask(sequences, k);
}

}  // namespace glossdom
