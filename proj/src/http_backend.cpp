#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vecot/backend.hpp"

namespace vecot {

namespace {

using json = nlohmann::json;

thread_local std::mt19937_64 jitter_rng{std::random_device{}()};

double jittered_backoff_s(double base, int attempt) {
  double cap = base * static_cast<double>(1u << attempt);
  std::uniform_real_distribution<double> dist(0.0, cap);
  return dist(jitter_rng);
}

class InFlightGuard {
 public:
  InFlightGuard(std::mutex& mu, std::condition_variable& cv, int& count, int cap)
      : mu_(mu), cv_(cv), count_(count) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return count_ < cap; });
    ++count_;
  }
  ~InFlightGuard() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      --count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& count_;
};

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.api_key.empty()) {
    const char* env = std::getenv("VECOT_API_KEY");
    if (env != nullptr) cfg_.api_key = env;
  }
  if (cfg_.api_key.empty()) {
    throw ConfigError("no API credential: set VECOT_API_KEY or configure api_key");
  }
}

CompletionBatch HttpBackend::complete(const CompletionRequest& req) {
  validate(req);
  InFlightGuard guard(mu_, cv_, in_flight_, cfg_.in_flight_cap);

  json body;
  body["model"] = cfg_.model;
  body["prompt"] = req.prompt;
  body["n"] = req.n_samples;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
  if (req.want_logprobs) body["logprobs"] = 1;
  const std::string payload = body.dump();

  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          jittered_backoff_s(cfg_.backoff_base_s, attempt - 1)));
    }
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_s);
    client.set_read_timeout(cfg_.timeout_s);
    client.set_bearer_token_auth(cfg_.api_key);

    auto res = client.Post(cfg_.base_path + "/completions", payload, "application/json");
    if (!res) {
      last_error = "connection failure: " + httplib::to_string(res.error());
      rate_limited = false;
      continue;
    }
    if (res->status == 429) {
      last_error = "HTTP 429";
      rate_limited = true;
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      rate_limited = false;
      continue;
    }
    if (res->status != 200) {
      throw TransportError("completion endpoint returned HTTP " +
                           std::to_string(res->status) + ": " + res->body);
    }

    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }

    CompletionBatch batch;
    for (const auto& choice : doc.at("choices")) {
      Completion c;
      c.text = choice.value("text", "");
      if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
          choice["logprobs"].contains("token_logprobs")) {
        for (const auto& lp : choice["logprobs"]["token_logprobs"]) {
          if (lp.is_number()) c.token_logprobs.push_back(lp.get<double>());
        }
      }
      for (double lp : c.token_logprobs) c.total_logprob += lp;
      batch.completions.push_back(std::move(c));
    }
    if (doc.contains("usage")) {
      batch.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
      batch.usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
    }
    if (batch.completions.size() != static_cast<std::size_t>(req.n_samples)) {
      throw TransportError("endpoint returned " + std::to_string(batch.completions.size()) +
                           " completions, expected " + std::to_string(req.n_samples));
    }
    return batch;
  }

  if (rate_limited) throw QuotaError("rate limit persisted after retries: " + last_error);
  throw TransportError("request failed after " + std::to_string(cfg_.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace vecot
