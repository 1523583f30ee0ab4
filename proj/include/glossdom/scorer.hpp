#pragma once

#include <atomic>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glossdom/patterns.hpp"

namespace glossdom {

struct TextPair {
  std::string first;
  std::string second;
};

struct NliScores {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
};

struct NspScore {
  double is_next = 0.0;
};

struct MaskPrediction {
  std::string token;
  double score = 0.0;
  int rank = 0;

  bool operator==(const MaskPrediction&) const = default;
};

enum class BackendKind { kRemote, kMock };

std::string_view to_string(BackendKind kind);

struct BackendDescriptor {
  BackendKind kind = BackendKind::kMock;
  std::set<Formulation> supported_formulations;
  std::string model_name;
};

/// Results of one scoring call. When `normalized` is false the numbers are
/// raw logits rather than probabilities.
template <typename T>
struct ScoreBatch {
  std::vector<T> results;
  bool normalized = true;
};

/// Language-model scoring backend. Results are order-preserving: result i
/// answers input i. Implementations must tolerate concurrent calls.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual BackendDescriptor descriptor() const = 0;

  virtual ScoreBatch<NliScores> score_nli(std::span<const TextPair> batch) = 0;
  virtual ScoreBatch<NspScore> score_nsp(std::span<const TextPair> batch) = 0;
  // Each sequence carries exactly one "[MASK]".
  virtual ScoreBatch<std::vector<MaskPrediction>> fill_mask(std::span<const std::string> sequences,
                                                            int k) = 0;

  bool supports(Formulation f) const;
};

namespace mock {

inline constexpr double kFloor = 0.05;
inline constexpr double kEntailmentSpan = 0.9;
inline constexpr double kNextSpan = 0.95;
inline constexpr int kVocabularyBudget = 1000;

// Lower-cased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);
const std::set<std::string, std::less<>>& stopwords();
// Tokens minus stopwords, in text order (duplicates kept).
std::vector<std::string> content_tokens(std::string_view text);

// |content(first) ∩ content(second)| / max(1, |content(second)|), over distinct words.
double overlap(std::string_view first, std::string_view second);

}  // namespace mock

/// Deterministic closed-form backend whose preferences follow word overlap.
///
///   entailment    = 0.05 + 0.9 * overlap
///   neutral       = 2/3 of the remainder, contradiction = 1/3
///   is_next       = 0.05 + 0.95 * overlap
///   fill_mask     = content words of the sequence by frequency, then
///                   alphabetically; score = frequency / content-token count
class MockScorer final : public Scorer {
 public:
  explicit MockScorer(std::string model_name = "mock-overlap");

  BackendDescriptor descriptor() const override;
  ScoreBatch<NliScores> score_nli(std::span<const TextPair> batch) override;
  ScoreBatch<NspScore> score_nsp(std::span<const TextPair> batch) override;
  ScoreBatch<std::vector<MaskPrediction>> fill_mask(std::span<const std::string> sequences,
                                                    int k) override;

 private:
  std::string model_name_;
};

/// Forwards to another scorer and counts scored inputs (pairs or sequences).
class CountingScorer final : public Scorer {
 public:
  explicit CountingScorer(Scorer& inner) : inner_(inner) {}

  BackendDescriptor descriptor() const override { return inner_.descriptor(); }
  ScoreBatch<NliScores> score_nli(std::span<const TextPair> batch) override;
  ScoreBatch<NspScore> score_nsp(std::span<const TextPair> batch) override;
  ScoreBatch<std::vector<MaskPrediction>> fill_mask(std::span<const std::string> sequences,
                                                    int k) override;

  std::size_t queries() const { return queries_.load(); }
  std::size_t calls() const { return calls_.load(); }
  void reset() {
    queries_ = 0;
    calls_ = 0;
  }

 private:
  Scorer& inner_;
  std::atomic<std::size_t> queries_{0};
  std::atomic<std::size_t> calls_{0};
};

}  // namespace glossdom
