#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vecot/errors.hpp"

namespace vecot {

struct CompletionRequest {
  std::string prompt;
  int n_samples = 1;
  double temperature = 0.0;
  int max_tokens = 256;
  std::vector<std::string> stop_sequences;
  bool want_logprobs = true;
};

struct Completion {
  std::string text;
  std::vector<double> token_logprobs;  // natural-log probs, empty if unavailable
  double total_logprob = 0.0;

  bool has_logprobs() const { return !token_logprobs.empty(); }
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  long total() const { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
};

struct CompletionBatch {
  std::vector<Completion> completions;
  TokenUsage usage;
};

/// Key under which a request is stored in fixtures: hash of prompt, sampling
/// temperature and n_samples. max_tokens and stop sequences are deliberately
/// excluded so recorded fixtures survive harmless config drift.
std::string fixture_key(const CompletionRequest& req);

/// FNV-1a 64-bit, also used for dataset hashing in manifests.
std::uint64_t fnv1a64(std::string_view data);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionBatch complete(const CompletionRequest& req) = 0;
};

struct FixtureEntry {
  std::string key;
  std::vector<Completion> completions;
  TokenUsage usage;  // zero => estimated from text at replay time
};

class ScriptedFixture {
 public:
  enum class Mode { strict, fallback };

  Mode mode = Mode::strict;

  void add(const std::string& key, std::vector<Completion> completions, TokenUsage usage = {});
  const FixtureEntry* find(const std::string& key) const;
  std::size_t size() const { return entries_.size(); }

  void load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_json_string() const;
  void from_json_string(const std::string& body);

 private:
  std::map<std::string, FixtureEntry> entries_;
};

/**
 * Deterministic scripted backend replaying a ScriptedFixture. In strict mode
 * an unseen request raises FixtureMiss; in fallback mode it is forwarded to
 * an optional inner backend (FixtureMiss if none is configured).
 *
 * Keeps cumulative usage/call counters so tests can check per-trace token
 * accounting against the ground truth.
 */
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(ScriptedFixture fixture, Backend* fallback = nullptr);

  CompletionBatch complete(const CompletionRequest& req) override;

  long calls() const;
  TokenUsage served_usage() const;
  ScriptedFixture& fixture() { return fixture_; }

 private:
  ScriptedFixture fixture_;
  Backend* fallback_;
  mutable std::mutex mu_;
  long calls_ = 0;
  TokenUsage served_;
};

/// Wraps a backend, forwarding calls and appending responses to a fixture
/// sink. Identical requests are recorded once and replayed from the sink.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(Backend& inner, ScriptedFixture& sink);
  CompletionBatch complete(const CompletionRequest& req) override;

 private:
  Backend& inner_;
  ScriptedFixture& sink_;
  std::mutex mu_;
};

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string base_path = "/v1";
  std::string model;
  std::string api_key;       // falls back to VECOT_API_KEY
  int max_attempts = 5;      // exponential backoff, jittered
  double backoff_base_s = 0.5;
  int in_flight_cap = 8;
  int timeout_s = 120;
};

/// Completion-endpoint client (POST {base_path}/completions). Retries
/// transport and rate-limit failures with jittered exponential backoff and
/// caps concurrent in-flight requests.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  CompletionBatch complete(const CompletionRequest& req) override;

 private:
  HttpBackendConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

/// Truncate completion text at the first occurrence of any stop sequence.
std::string apply_stop_sequences(std::string text, const std::vector<std::string>& stops);

void validate(const CompletionRequest& req);

}  // namespace vecot
