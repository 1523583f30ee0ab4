#pragma once

#include <chrono>
#include <memory>
#include <set>
#include <string>

#include "glossdom/scorer.hpp"

namespace glossdom {

struct RemoteOptions {
  // Base URL, e.g. "http://localhost:8080". The client POSTs to <url>/v1/score.
  std::string url;
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  int max_in_flight = 4;
  // Inputs per HTTP request; larger batches are split and sent concurrently.
  std::size_t max_batch = 32;
  std::set<Formulation> supported{Formulation::kMlm, Formulation::kNsp, Formulation::kNli};

  /// Defaults overridden by GLOSSDOM_BACKEND_URL and GLOSSDOM_BACKEND_TIMEOUT_MS.
  static RemoteOptions from_env();
};

/// HTTP/1.1 JSON client for an external inference server.
///
/// Request:  POST /v1/score {"task", "model", "inputs": [...], "top_k"?}
/// Response: {"normalized": bool, "results": [...]}
///
/// Connection failures and 5xx responses are retried with exponential
/// backoff; after the last attempt a TransportError reports the attempt
/// count. Unparseable or mis-shaped responses raise ProtocolError.
class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteOptions options);
  ~RemoteScorer() override;

  RemoteScorer(const RemoteScorer&) = delete;
  RemoteScorer& operator=(const RemoteScorer&) = delete;

  BackendDescriptor descriptor() const override;
  ScoreBatch<NliScores> score_nli(std::span<const TextPair> batch) override;
  ScoreBatch<NspScore> score_nsp(std::span<const TextPair> batch) override;
  ScoreBatch<std::vector<MaskPrediction>> fill_mask(std::span<const std::string> sequences,
                                                    int k) override;

  const RemoteOptions& options() const { return options_; }

 private:
  struct Impl;
  RemoteOptions options_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace glossdom
