#include "vecot/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vecot/text.hpp"

namespace vecot {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// DatasetRetriever

DatasetRetriever::DatasetRetriever(std::vector<Passage> paragraphs)
    : paragraphs_(std::move(paragraphs)) {
  if (paragraphs_.empty()) {
    throw NoDatasetContext("instance carries no context paragraphs");
  }
}

std::vector<Passage> DatasetRetriever::retrieve(const std::string&) { return paragraphs_; }

// ---------------------------------------------------------------------------
// BM25Retriever

BM25Retriever::BM25Retriever(std::vector<CorpusDoc> docs, int max_results)
    : docs_(std::move(docs)), max_results_(max_results) {
  if (docs_.empty()) throw EmptyCorpus("opencorpus retriever built with no documents");
  long total_len = 0;
  for (const auto& d : docs_) {
    std::map<std::string, int> tf;
    auto tokens = text::word_tokens(d.text);
    for (const auto& t : tokens) ++tf[t];
    doc_lens_.push_back(static_cast<int>(tokens.size()));
    total_len += static_cast<long>(tokens.size());
    for (const auto& [term, _] : tf) ++doc_freqs_[term];
    term_freqs_.push_back(std::move(tf));
  }
  avg_len_ = static_cast<double>(total_len) / static_cast<double>(docs_.size());
}

BM25Retriever BM25Retriever::from_jsonl(const std::string& path, int max_results) {
  std::ifstream in(path);
  if (!in) throw EmptyCorpus("cannot open corpus file: " + path);
  std::vector<CorpusDoc> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line);
    CorpusDoc d;
    d.id = j.value("id", std::to_string(docs.size()));
    d.title = j.value("title", "");
    d.text = j.at("text").get<std::string>();
    docs.push_back(std::move(d));
  }
  return BM25Retriever(std::move(docs), max_results);
}

std::vector<Passage> BM25Retriever::retrieve(const std::string& query) {
  const int n_docs = static_cast<int>(docs_.size());
  std::vector<double> scores(docs_.size(), 0.0);
  for (const auto& term : text::word_tokens(query)) {
    auto dfit = doc_freqs_.find(term);
    if (dfit == doc_freqs_.end()) continue;
    const int df = dfit->second;
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      auto tfit = term_freqs_[i].find(term);
      if (tfit == term_freqs_[i].end()) continue;
      const double tf = tfit->second;
      const double norm = kK1 * (1.0 - kB + kB * doc_lens_[i] / avg_len_);
      scores[i] += idf * tf * (kK1 + 1.0) / (tf + norm);
    }
  }
  std::vector<std::size_t> order(docs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Passage> out;
  for (std::size_t i : order) {
    if (scores[i] <= 0.0) break;
    if (static_cast<int>(out.size()) >= max_results_) break;
    Passage p;
    p.source = "opencorpus";
    p.title = docs_[i].title;
    p.text = docs_[i].text;
    p.rank = static_cast<int>(out.size());
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// RetrieverFixture

namespace {

ordered_json passage_to_json(const Passage& p) {
  ordered_json j;
  j["source"] = p.source;
  j["title"] = p.title;
  j["text"] = p.text;
  j["rank"] = p.rank;
  return j;
}

Passage passage_from_json(const ordered_json& j) {
  Passage p;
  p.source = j.value("source", "dataset");
  p.title = j.value("title", "");
  p.text = j.at("text").get<std::string>();
  p.rank = j.value("rank", 0);
  return p;
}

}  // namespace

void RetrieverFixture::add(const std::string& query, std::vector<Passage> passages) {
  entries_[query] = std::move(passages);
}

const std::vector<Passage>* RetrieverFixture::find(const std::string& query) const {
  auto it = entries_.find(query);
  return it == entries_.end() ? nullptr : &it->second;
}

void RetrieverFixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open retriever fixture: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ordered_json doc = ordered_json::parse(ss.str());
  mode = doc.value("mode", "strict") == "fallback" ? Mode::fallback : Mode::strict;
  entries_.clear();
  for (const auto& [query, jlist] : doc.at("entries").items()) {
    std::vector<Passage> ps;
    for (const auto& jp : jlist) ps.push_back(passage_from_json(jp));
    entries_[query] = std::move(ps);
  }
}

void RetrieverFixture::save(const std::string& path) const {
  ordered_json doc;
  doc["mode"] = mode == Mode::strict ? "strict" : "fallback";
  doc["entries"] = ordered_json::object();
  for (const auto& [query, ps] : entries_) {
    ordered_json jlist = ordered_json::array();
    for (const auto& p : ps) jlist.push_back(passage_to_json(p));
    doc["entries"][query] = std::move(jlist);
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write retriever fixture: " + path);
  out << doc.dump(2) << "\n";
}

FixtureRetriever::FixtureRetriever(RetrieverFixture fixture, Retriever* fallback)
    : fixture_(std::move(fixture)), fallback_(fallback) {}

std::vector<Passage> FixtureRetriever::retrieve(const std::string& query) {
  const std::vector<Passage>* found = fixture_.find(query);
  if (found != nullptr) return *found;
  if (fixture_.mode == RetrieverFixture::Mode::fallback && fallback_ != nullptr) {
    return fallback_->retrieve(query);
  }
  throw RetrieverUnavailable("no retriever fixture entry for query: " + query);
}

RecordingRetriever::RecordingRetriever(Retriever& inner, RetrieverFixture& sink)
    : inner_(inner), sink_(sink) {}

std::vector<Passage> RecordingRetriever::retrieve(const std::string& query) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    const std::vector<Passage>* found = sink_.find(query);
    if (found != nullptr) return *found;
  }
  std::vector<Passage> result = inner_.retrieve(query);
  {
    std::lock_guard<std::mutex> lock(mu_);
    sink_.add(query, result);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sentence splitting and ranking

std::vector<std::string> split_passage_sentences(const std::vector<Passage>& passages) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : passages) {
    for (auto& s : text::split_sentences(p.text)) {
      if (seen.insert(s).second) out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::string> tfidf_features(const std::string& s) {
  std::vector<std::string> unigrams = text::word_tokens(s);
  std::vector<std::string> features = unigrams;
  for (std::size_t i = 0; i + 1 < unigrams.size(); ++i) {
    features.push_back(unigrams[i] + " " + unigrams[i + 1]);
  }
  return features;
}

namespace {

std::map<std::string, double> tfidf_vector(const std::vector<std::string>& features,
                                           const std::map<std::string, int>& doc_freqs,
                                           int n_docs) {
  std::map<std::string, double> vec;
  for (const auto& f : features) vec[f] += 1.0;
  double norm_sq = 0.0;
  for (auto& [f, tf] : vec) {
    const int df = doc_freqs.count(f) ? doc_freqs.at(f) : 0;
    const double idf = std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
    tf *= idf;
    norm_sq += tf * tf;
  }
  if (norm_sq > 0) {
    const double norm = std::sqrt(norm_sq);
    for (auto& [f, v] : vec) v /= norm;
  }
  return vec;
}

double dot(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  double sum = 0.0;
  for (const auto& [f, v] : small) {
    auto it = large.find(f);
    if (it != large.end()) sum += v * it->second;
  }
  return sum;
}

std::vector<RankedSentence> rank_lexical(const std::string& query,
                                         const std::vector<std::string>& sentences, int k) {
  const int n_docs = static_cast<int>(sentences.size()) + 1;
  std::vector<std::vector<std::string>> feats;
  feats.push_back(tfidf_features(query));
  for (const auto& s : sentences) feats.push_back(tfidf_features(s));

  std::map<std::string, int> doc_freqs;
  for (const auto& f : feats) {
    std::set<std::string> uniq(f.begin(), f.end());
    for (const auto& t : uniq) ++doc_freqs[t];
  }

  const auto qvec = tfidf_vector(feats[0], doc_freqs, n_docs);
  std::vector<double> scores(sentences.size(), 0.0);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    scores[i] = dot(qvec, tfidf_vector(feats[i + 1], doc_freqs, n_docs));
  }

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RankedSentence> out;
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), sentences.size());
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back({sentences[order[i]], scores[order[i]]});
  }
  return out;
}

}  // namespace

// Defined in http_retrievers.cpp.
std::vector<RankedSentence> rank_embedding_endpoint(const std::string& query,
                                                    const std::vector<std::string>& sentences,
                                                    int k, const std::string& endpoint);

std::vector<RankedSentence> rank_sentences(const std::string& query,
                                           const std::vector<std::string>& sentences,
                                           const RankerConfig& config) {
  if (sentences.empty()) return {};
  if (config.method == RankerConfig::Method::embedding_endpoint) {
    return rank_embedding_endpoint(query, sentences, config.k, config.endpoint);
  }
  return rank_lexical(query, sentences, config.k);
}

EvidenceSet gather_evidence(Retriever& retriever, const std::string& query,
                            const RankerConfig& config) {
  EvidenceSet ev;
  ev.query = query;
  ev.k = config.k;
  ev.passages = retriever.retrieve(query);
  ev.top_sentences = rank_sentences(query, split_passage_sentences(ev.passages), config);
  return ev;
}

}  // namespace vecot
