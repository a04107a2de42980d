#include "vecot/backend.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vecot/text.hpp"

namespace vecot {

using ordered_json = nlohmann::ordered_json;

void validate(const CompletionRequest& req) {
  if (req.prompt.empty()) throw ConfigError("prompt must be non-empty");
  if (req.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (req.temperature < 0) throw ConfigError("temperature must be non-negative");
  if (req.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fixture_key(const CompletionRequest& req) {
  char tbuf[32];
  std::snprintf(tbuf, sizeof(tbuf), "%.6g", req.temperature);
  std::string material = req.prompt;
  material += '\x1f';
  material += tbuf;
  material += '\x1f';
  material += std::to_string(req.n_samples);
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(material)));
  return out;
}

std::string apply_stop_sequences(std::string text, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    std::size_t p = text.find(s);
    if (p != std::string::npos && p < cut) cut = p;
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

// ---------------------------------------------------------------------------
// ScriptedFixture

void ScriptedFixture::add(const std::string& key, std::vector<Completion> completions,
                          TokenUsage usage) {
  FixtureEntry e;
  e.key = key;
  e.completions = std::move(completions);
  e.usage = usage;
  entries_[key] = std::move(e);
}

const FixtureEntry* ScriptedFixture::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string ScriptedFixture::to_json_string() const {
  ordered_json doc;
  doc["mode"] = mode == Mode::strict ? "strict" : "fallback";
  doc["entries"] = ordered_json::array();
  for (const auto& [key, e] : entries_) {
    ordered_json je;
    je["key"] = key;
    je["completions"] = ordered_json::array();
    for (const auto& c : e.completions) {
      ordered_json jc;
      jc["text"] = c.text;
      jc["token_logprobs"] = c.token_logprobs;
      je["completions"].push_back(std::move(jc));
    }
    je["prompt_tokens"] = e.usage.prompt_tokens;
    je["completion_tokens"] = e.usage.completion_tokens;
    doc["entries"].push_back(std::move(je));
  }
  return doc.dump(2) + "\n";
}

void ScriptedFixture::from_json_string(const std::string& body) {
  ordered_json doc = ordered_json::parse(body);
  mode = doc.value("mode", "strict") == "fallback" ? Mode::fallback : Mode::strict;
  entries_.clear();
  for (const auto& je : doc.at("entries")) {
    FixtureEntry e;
    e.key = je.at("key").get<std::string>();
    for (const auto& jc : je.at("completions")) {
      Completion c;
      c.text = jc.at("text").get<std::string>();
      if (jc.contains("token_logprobs")) {
        c.token_logprobs = jc.at("token_logprobs").get<std::vector<double>>();
      }
      c.total_logprob = 0.0;
      for (double lp : c.token_logprobs) c.total_logprob += lp;
      e.completions.push_back(std::move(c));
    }
    e.usage.prompt_tokens = je.value("prompt_tokens", 0L);
    e.usage.completion_tokens = je.value("completion_tokens", 0L);
    entries_[e.key] = std::move(e);
  }
}

void ScriptedFixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  from_json_string(ss.str());
}

void ScriptedFixture::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write fixture file: " + path);
  out << to_json_string();
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(ScriptedFixture fixture, Backend* fallback)
    : fixture_(std::move(fixture)), fallback_(fallback) {}

CompletionBatch ScriptedBackend::complete(const CompletionRequest& req) {
  validate(req);
  const std::string key = fixture_key(req);
  const FixtureEntry* entry = fixture_.find(key);
  if (entry == nullptr || entry->completions.size() < static_cast<std::size_t>(req.n_samples)) {
    if (fixture_.mode == ScriptedFixture::Mode::fallback && fallback_ != nullptr) {
      return fallback_->complete(req);
    }
    throw FixtureMiss("no fixture entry for key " + key + " (prompt head: \"" +
                      req.prompt.substr(0, 60) + "...\")");
  }

  CompletionBatch batch;
  for (int i = 0; i < req.n_samples; ++i) {
    Completion c = entry->completions[static_cast<std::size_t>(i)];
    std::string truncated = apply_stop_sequences(c.text, req.stop_sequences);
    if (truncated != c.text) {
      c.text = std::move(truncated);
      c.token_logprobs.clear();
      c.total_logprob = 0.0;
    }
    if (!req.want_logprobs) {
      c.token_logprobs.clear();
      c.total_logprob = 0.0;
    }
    batch.completions.push_back(std::move(c));
  }

  if (entry->usage.total() > 0) {
    batch.usage = entry->usage;
  } else {
    batch.usage.prompt_tokens = text::approx_token_count(req.prompt);
    for (const auto& c : batch.completions) {
      batch.usage.completion_tokens += text::approx_token_count(c.text);
    }
  }

  std::lock_guard<std::mutex> lock(mu_);
  ++calls_;
  served_ += batch.usage;
  return batch;
}

long ScriptedBackend::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

TokenUsage ScriptedBackend::served_usage() const {
  std::lock_guard<std::mutex> lock(mu_);
  return served_;
}

// ---------------------------------------------------------------------------
// RecordingBackend

RecordingBackend::RecordingBackend(Backend& inner, ScriptedFixture& sink)
    : inner_(inner), sink_(sink) {}

CompletionBatch RecordingBackend::complete(const CompletionRequest& req) {
  const std::string key = fixture_key(req);
  {
    std::lock_guard<std::mutex> lock(mu_);
    const FixtureEntry* entry = sink_.find(key);
    if (entry != nullptr &&
        entry->completions.size() >= static_cast<std::size_t>(req.n_samples)) {
      CompletionBatch batch;
      batch.completions.assign(entry->completions.begin(),
                               entry->completions.begin() + req.n_samples);
      batch.usage = entry->usage;
      return batch;
    }
  }
  CompletionBatch batch = inner_.complete(req);
  {
    std::lock_guard<std::mutex> lock(mu_);
    sink_.add(key, batch.completions, batch.usage);
  }
  return batch;
}

}  // namespace vecot
