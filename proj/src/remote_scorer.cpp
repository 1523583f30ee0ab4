#include "glossdom/remote_scorer.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "glossdom/error.hpp"
#include "glossdom/text.hpp"

namespace glossdom {

namespace {

using nlohmann::json;

constexpr std::size_t kExcerptLength = 200;
constexpr const char* kScorePath = "/v1/score";

std::string excerpt(std::string_view payload) {
  if (payload.size() <= kExcerptLength) return std::string(payload);
  return std::string(payload.substr(0, kExcerptLength)) + "...";
}

double number_field(const json& obj, const char* key, const std::string& body) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw ProtocolError(std::string("response result lacks numeric '") + key + "': " + excerpt(body));
  }
  return it->get<double>();
}

struct Reply {
  bool normalized = true;
  json results;
  std::string body;
};

}  // namespace

RemoteOptions RemoteOptions::from_env() {
  RemoteOptions options;
  if (const char* url = std::getenv("GLOSSDOM_BACKEND_URL"); url != nullptr) options.url = url;
  if (const char* ms = std::getenv("GLOSSDOM_BACKEND_TIMEOUT_MS"); ms != nullptr) {
    const auto values = text::parse_int_list(ms);
    if (values.size() != 1 || values.front() <= 0) {
      throw InputError("GLOSSDOM_BACKEND_TIMEOUT_MS must be a positive integer");
    }
    options.timeout = std::chrono::milliseconds(values.front());
  }
  return options;
}

struct RemoteScorer::Impl {
  explicit Impl(const RemoteOptions& options)
      : options(options), slots(std::max(1, options.max_in_flight)) {}

  const RemoteOptions& options;
  std::counting_semaphore<1024> slots;

  Reply post_once(const json& request, int& attempts) {
    const auto payload = request.dump();
    const auto timeout = options.timeout;
    std::string last_error;
    const int max_attempts = 1 + std::max(0, options.max_retries);
    auto backoff = options.initial_backoff;
    for (attempts = 1; attempts <= max_attempts; ++attempts) {
      httplib::Client client(options.url);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      slots.acquire();
      auto res = client.Post(kScorePath, payload, "application/json");
      slots.release();

      if (!res) {
        last_error = httplib::to_string(res.error());
      } else if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + excerpt(res->body);
      } else if (res->status != 200) {
        throw BackendError("backend rejected request with HTTP " + std::to_string(res->status) + ": " +
                           excerpt(res->body));
      } else {
        return parse(res->body, request["inputs"].size());
      }
      if (attempts < max_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    attempts = max_attempts;
    throw TransportError("backend " + options.url + " unreachable after " +
                             std::to_string(max_attempts) + " attempts: " + last_error,
                         max_attempts);
  }

  static Reply parse(const std::string& body, std::size_t expected) {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::parse_error&) {
      throw ProtocolError("response is not JSON: " + excerpt(body));
    }
    if (!doc.is_object()) throw ProtocolError("response is not an object: " + excerpt(body));
    const auto normalized = doc.find("normalized");
    if (normalized == doc.end() || !normalized->is_boolean()) {
      throw ProtocolError("response lacks boolean 'normalized': " + excerpt(body));
    }
    const auto results = doc.find("results");
    if (results == doc.end() || !results->is_array()) {
      throw ProtocolError("response lacks 'results' list: " + excerpt(body));
    }
    if (results->size() != expected) {
      throw ProtocolError("expected " + std::to_string(expected) + " results, got " +
                          std::to_string(results->size()) + ": " + excerpt(body));
    }
    return {normalized->get<bool>(), std::move(*results), body};
  }

  // Splits inputs into requests of at most max_batch, sends them concurrently
  // and concatenates the results in input order.
  Reply post(const std::string& task, const json& inputs, std::optional<int> top_k) {
    const auto batch = std::max<std::size_t>(1, options.max_batch);
    std::vector<json> requests;
    for (std::size_t start = 0; start < inputs.size(); start += batch) {
      json request = {{"task", task}, {"model", options.model}};
      request["inputs"] = json::array();
      for (std::size_t i = start; i < std::min(inputs.size(), start + batch); ++i) {
        request["inputs"].push_back(inputs[i]);
      }
      if (top_k) request["top_k"] = *top_k;
      requests.push_back(std::move(request));
    }

    std::vector<Reply> replies(requests.size());
    if (requests.size() == 1) {
      int attempts = 0;
      replies[0] = post_once(requests[0], attempts);
    } else {
      std::vector<std::future<Reply>> pending;
      pending.reserve(requests.size());
      for (const auto& request : requests) {
        pending.push_back(std::async(std::launch::async, [this, &request] {
          int attempts = 0;
          return post_once(request, attempts);
        }));
      }
      for (std::size_t i = 0; i < pending.size(); ++i) replies[i] = pending[i].get();
    }

    Reply merged;
    merged.results = json::array();
    for (std::size_t i = 0; i < replies.size(); ++i) {
      if (i > 0 && replies[i].normalized != merged.normalized) {
        throw ProtocolError("batches disagree on 'normalized': " + excerpt(replies[i].body));
      }
      merged.normalized = replies[i].normalized;
      for (auto& r : replies[i].results) merged.results.push_back(std::move(r));
      merged.body = std::move(replies[i].body);
    }
    return merged;
  }
};

RemoteScorer::RemoteScorer(RemoteOptions options)
    : options_(std::move(options)), impl_(std::make_unique<Impl>(options_)) {
  if (options_.url.empty()) {
    throw InputError("remote backend needs a URL (flag or GLOSSDOM_BACKEND_URL)");
  }
  if (options_.supported.empty()) throw InputError("remote backend supports no formulation");
}

RemoteScorer::~RemoteScorer() = default;

BackendDescriptor RemoteScorer::descriptor() const {
  return {BackendKind::kRemote, options_.supported, options_.model};
}

namespace {

void require(const Scorer& scorer, Formulation f, std::size_t n) {
  if (n == 0) throw InputError("empty scoring batch");
  if (!scorer.supports(f)) {
    throw InputError("backend does not support " + std::string(to_string(f)));
  }
}

json pair_inputs(std::span<const TextPair> batch) {
  json inputs = json::array();
  for (const auto& p : batch) inputs.push_back({{"first", p.first}, {"second", p.second}});
  return inputs;
}

}  // namespace

ScoreBatch<NliScores> RemoteScorer::score_nli(std::span<const TextPair> batch) {
  require(*this, Formulation::kNli, batch.size());
  const auto reply = impl_->post("nli", pair_inputs(batch), std::nullopt);
  ScoreBatch<NliScores> out{{}, reply.normalized};
  for (const auto& r : reply.results) {
    if (!r.is_object()) throw ProtocolError("nli result is not an object: " + excerpt(r.dump()));
    out.results.push_back({number_field(r, "entailment", reply.body), number_field(r, "neutral", reply.body),
                           number_field(r, "contradiction", reply.body)});
  }
  return out;
}

ScoreBatch<NspScore> RemoteScorer::score_nsp(std::span<const TextPair> batch) {
  require(*this, Formulation::kNsp, batch.size());
  const auto reply = impl_->post("nsp", pair_inputs(batch), std::nullopt);
  ScoreBatch<NspScore> out{{}, reply.normalized};
  for (const auto& r : reply.results) {
    if (!r.is_object()) throw ProtocolError("nsp result is not an object: " + excerpt(r.dump()));
    out.results.push_back({number_field(r, "is_next", reply.body)});
  }
  return out;
}

ScoreBatch<std::vector<MaskPrediction>> RemoteScorer::fill_mask(std::span<const std::string> sequences,
                                                                int k) {
  require(*this, Formulation::kMlm, sequences.size());
  if (k < 1) throw InputError("k must be positive");
  json inputs = json::array();
  for (const auto& s : sequences) {
    if (text::count_occurrences(s, kMaskSlot) != 1) {
      throw InputError("sequence must contain exactly one [MASK]");
    }
    inputs.push_back({{"sequence", s}});
  }
  const auto reply = impl_->post("mlm", inputs, k);
  ScoreBatch<std::vector<MaskPrediction>> out{{}, reply.normalized};
  for (const auto& r : reply.results) {
    if (!r.is_array()) throw ProtocolError("mlm result is not a list: " + excerpt(r.dump()));
    std::vector<MaskPrediction> predictions;
    for (const auto& item : r) {
      if (!item.is_object() || !item.contains("token") || !item["token"].is_string()) {
        throw ProtocolError("mlm prediction lacks string 'token': " + excerpt(item.dump()));
      }
      predictions.push_back({item["token"].get<std::string>(), number_field(item, "score", reply.body), 0});
    }
    std::stable_sort(predictions.begin(), predictions.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    if (predictions.size() > static_cast<std::size_t>(k)) predictions.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i].rank = static_cast<int>(i + 1);
    out.results.push_back(std::move(predictions));
  }
  return out;
}

}  // namespace glossdom
