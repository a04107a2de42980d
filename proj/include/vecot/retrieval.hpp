#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vecot/errors.hpp"

namespace vecot {

struct Passage {
  std::string source;  // wikipedia | opencorpus | websearch | dataset
  std::string title;
  std::string text;
  int rank = 0;
};

struct RankedSentence {
  std::string sentence;
  double score = 0.0;
};

struct EvidenceSet {
  std::string query;
  std::vector<Passage> passages;
  std::vector<RankedSentence> top_sentences;
  int k = 3;
};

struct RankerConfig {
  enum class Method { lexical, embedding_endpoint };
  int k = 3;
  Method method = Method::lexical;
  std::string endpoint;  // required for embedding_endpoint
};

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<Passage> retrieve(const std::string& query) = 0;
};

/// Oracle-style retriever over the paragraphs shipped with one instance
/// (supporting + distractor contexts). Returns them verbatim for any query.
class DatasetRetriever : public Retriever {
 public:
  explicit DatasetRetriever(std::vector<Passage> paragraphs);
  std::vector<Passage> retrieve(const std::string& query) override;

 private:
  std::vector<Passage> paragraphs_;
};

struct CorpusDoc {
  std::string id;
  std::string title;
  std::string text;
};

/**
 * BM25 retriever over an in-memory corpus (the open-retrieval stand-in).
 * The index is built once in the constructor and read-only afterwards.
 * Documents with zero score are never returned.
 */
class BM25Retriever : public Retriever {
 public:
  explicit BM25Retriever(std::vector<CorpusDoc> docs, int max_results = 5);
  static BM25Retriever from_jsonl(const std::string& path, int max_results = 5);

  std::vector<Passage> retrieve(const std::string& query) override;

  static constexpr double kK1 = 1.5;
  static constexpr double kB = 0.75;

 private:
  std::vector<CorpusDoc> docs_;
  std::vector<std::map<std::string, int>> term_freqs_;
  std::vector<int> doc_lens_;
  std::map<std::string, int> doc_freqs_;
  double avg_len_ = 0.0;
  int max_results_;
};

/// Replay fixture for HTTP retrievers: a JSON map query -> passages.
class RetrieverFixture {
 public:
  enum class Mode { strict, fallback };
  Mode mode = Mode::strict;

  void add(const std::string& query, std::vector<Passage> passages);
  const std::vector<Passage>* find(const std::string& query) const;
  std::size_t size() const { return entries_.size(); }

  void load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::vector<Passage>> entries_;
};

class FixtureRetriever : public Retriever {
 public:
  explicit FixtureRetriever(RetrieverFixture fixture, Retriever* fallback = nullptr);
  std::vector<Passage> retrieve(const std::string& query) override;

 private:
  RetrieverFixture fixture_;
  Retriever* fallback_;
};

class RecordingRetriever : public Retriever {
 public:
  RecordingRetriever(Retriever& inner, RetrieverFixture& sink);
  std::vector<Passage> retrieve(const std::string& query) override;

 private:
  Retriever& inner_;
  RetrieverFixture& sink_;
  std::mutex mu_;
};

struct WikipediaConfig {
  std::string base_url = "https://en.wikipedia.org";
  int pages = 2;  // lead extracts of the top search hits
  double min_request_interval_s = 0.1;
};

/// Wikipedia search API client: full-question search, then plain-text lead
/// extracts of the top pages.
class WikipediaRetriever : public Retriever {
 public:
  explicit WikipediaRetriever(WikipediaConfig cfg);
  std::vector<Passage> retrieve(const std::string& query) override;

 private:
  WikipediaConfig cfg_;
  std::mutex rate_mu_;
  double last_request_s_ = 0.0;
};

/// Generic SERP-JSON adapter: url_template with {query} (and optional {key},
/// filled from VECOT_SEARCH_KEY), a dot-path to the result array, and field
/// names for title and snippet.
struct WebSearchConfig {
  std::string url_template;
  std::string results_json_path = "organic_results";
  std::string title_field = "title";
  std::string snippet_field = "snippet";
  int max_results = 5;
  double min_request_interval_s = 0.1;
};

class WebSearchRetriever : public Retriever {
 public:
  explicit WebSearchRetriever(WebSearchConfig cfg);
  std::vector<Passage> retrieve(const std::string& query) override;

 private:
  WebSearchConfig cfg_;
  std::mutex rate_mu_;
  double last_request_s_ = 0.0;
};

/// Sentence-split all passages in order (shared splitting rules with the
/// prompting module), dropping exact duplicates.
std::vector<std::string> split_passage_sentences(const std::vector<Passage>& passages);

/**
 * Rank candidate sentences against the query and keep the top min(k, |s|).
 * Lexical method: cosine over L2-normalized TF-IDF unigram+bigram vectors
 * fit on {query} + sentences. Ties keep original sentence order.
 */
std::vector<RankedSentence> rank_sentences(const std::string& query,
                                           const std::vector<std::string>& sentences,
                                           const RankerConfig& config);

EvidenceSet gather_evidence(Retriever& retriever, const std::string& query,
                            const RankerConfig& config);

/// TF-IDF detail shared with rank_sentences; exposed for the oracle tests.
std::vector<std::string> tfidf_features(const std::string& s);

}  // namespace vecot
