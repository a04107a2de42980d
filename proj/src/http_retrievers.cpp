#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vecot/retrieval.hpp"
#include "vecot/text.hpp"

namespace vecot {

namespace {

using json = nlohmann::json;

std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else if (c == ' ') {
      out += "%20";
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

// "https://host[:port]/path?query" -> {origin, path_and_query}
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("URL missing scheme: " + url);
  }
  auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

void rate_limit(std::mutex& mu, double& last_s, double min_interval_s) {
  std::lock_guard<std::mutex> lock(mu);
  using clock = std::chrono::steady_clock;
  double now = std::chrono::duration<double>(clock::now().time_since_epoch()).count();
  double wait = last_s + min_interval_s - now;
  if (wait > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    now += wait;
  }
  last_s = now;
}

json http_get_json(const std::string& url, int timeout_s = 30) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_s);
  client.set_read_timeout(timeout_s);
  client.set_follow_location(true);
  auto res = client.Get(path);
  if (!res) {
    throw RetrieverUnavailable("GET " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw RetrieverUnavailable("GET " + url + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw RetrieverUnavailable(std::string("malformed JSON from ") + url + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// WikipediaRetriever

WikipediaRetriever::WikipediaRetriever(WikipediaConfig cfg) : cfg_(std::move(cfg)) {}

std::vector<Passage> WikipediaRetriever::retrieve(const std::string& query) {
  rate_limit(rate_mu_, last_request_s_, cfg_.min_request_interval_s);
  const std::string search_url =
      cfg_.base_url + "/w/api.php?action=query&list=search&format=json&srlimit=" +
      std::to_string(cfg_.pages) + "&srsearch=" + url_encode(query);
  json search = http_get_json(search_url);

  std::vector<std::string> titles;
  if (search.contains("query") && search["query"].contains("search")) {
    for (const auto& hit : search["query"]["search"]) {
      titles.push_back(hit.value("title", ""));
      if (static_cast<int>(titles.size()) >= cfg_.pages) break;
    }
  }

  std::vector<Passage> out;
  for (const auto& title : titles) {
    if (title.empty()) continue;
    rate_limit(rate_mu_, last_request_s_, cfg_.min_request_interval_s);
    const std::string extract_url =
        cfg_.base_url +
        "/w/api.php?action=query&prop=extracts&exintro=1&explaintext=1&format=json&titles=" +
        url_encode(title);
    json extract = http_get_json(extract_url);
    if (!extract.contains("query") || !extract["query"].contains("pages")) continue;
    for (const auto& [page_id, page] : extract["query"]["pages"].items()) {
      const std::string body = page.value("extract", "");
      if (body.empty()) continue;
      Passage p;
      p.source = "wikipedia";
      p.title = title;
      p.text = body;
      p.rank = static_cast<int>(out.size());
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// WebSearchRetriever

WebSearchRetriever::WebSearchRetriever(WebSearchConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url_template.empty()) {
    throw ConfigError("websearch retriever requires url_template");
  }
}

std::vector<Passage> WebSearchRetriever::retrieve(const std::string& query) {
  rate_limit(rate_mu_, last_request_s_, cfg_.min_request_interval_s);
  std::string url = cfg_.url_template;
  replace_all(url, "{query}", url_encode(query));
  if (url.find("{key}") != std::string::npos) {
    const char* key = std::getenv("VECOT_SEARCH_KEY");
    replace_all(url, "{key}", key != nullptr ? key : "");
  }
  json doc = http_get_json(url);

  // Walk the dot path to the result array.
  const json* node = &doc;
  std::stringstream path(cfg_.results_json_path);
  std::string part;
  while (std::getline(path, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      throw RetrieverUnavailable("results path \"" + cfg_.results_json_path +
                                 "\" not found in search response");
    }
    node = &(*node)[part];
  }
  if (!node->is_array()) {
    throw RetrieverUnavailable("results path \"" + cfg_.results_json_path +
                               "\" is not an array");
  }

  std::vector<Passage> out;
  for (const auto& item : *node) {
    if (static_cast<int>(out.size()) >= cfg_.max_results) break;
    Passage p;
    p.source = "websearch";
    p.title = item.value(cfg_.title_field, "");
    p.text = item.value(cfg_.snippet_field, "");
    if (p.text.empty()) continue;
    p.rank = static_cast<int>(out.size());
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding-endpoint ranker

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0 || nb <= 0) return 0.0;
  return num / std::sqrt(na * nb);
}

}  // namespace

std::vector<RankedSentence> rank_embedding_endpoint(const std::string& query,
                                                    const std::vector<std::string>& sentences,
                                                    int k, const std::string& endpoint) {
  if (endpoint.empty()) {
    throw EmbeddingEndpointError("embedding_endpoint ranker configured without endpoint URL");
  }
  json body;
  body["input"] = json::array();
  body["input"].push_back(query);
  for (const auto& s : sentences) body["input"].push_back(s);

  auto [origin, path] = split_url(endpoint);
  httplib::Client client(origin);
  client.set_read_timeout(60);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res || res->status != 200) {
    throw EmbeddingEndpointError("embedding endpoint failed: " +
                                 (res ? "HTTP " + std::to_string(res->status)
                                      : httplib::to_string(res.error())));
  }

  std::vector<std::vector<double>> vectors;
  try {
    json doc = json::parse(res->body);
    if (doc.contains("data")) {
      for (const auto& item : doc["data"]) {
        vectors.push_back(item.at("embedding").get<std::vector<double>>());
      }
    } else if (doc.contains("embeddings")) {
      for (const auto& item : doc["embeddings"]) {
        vectors.push_back(item.get<std::vector<double>>());
      }
    }
  } catch (const json::exception& e) {
    throw EmbeddingEndpointError(std::string("malformed embedding response: ") + e.what());
  }
  if (vectors.size() != sentences.size() + 1) {
    throw EmbeddingEndpointError("embedding endpoint returned " +
                                 std::to_string(vectors.size()) + " vectors, expected " +
                                 std::to_string(sentences.size() + 1));
  }

  std::vector<double> scores(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    scores[i] = cosine(vectors[0], vectors[i + 1]);
  }
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RankedSentence> out;
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), sentences.size());
  for (std::size_t i = 0; i < keep; ++i) out.push_back({sentences[order[i]], scores[order[i]]});
  return out;
}

}  // namespace vecot
