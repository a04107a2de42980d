#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vecot/errors.hpp"
#include "vecot/prompting.hpp"

namespace vecot {

/// One sampled CoT path that survived parsing.
struct ReasoningPath {
  Rationale rationale;
  std::string answer;
  double total_logprob = 0.0;
  bool has_logprobs = false;
};

struct SampleSet {
  std::vector<ReasoningPath> paths;

  int n() const { return static_cast<int>(paths.size()); }
};

struct AnswerGroup {
  int count = 0;
  double weight = 0.0;           // scaled so weights sum to n
  std::vector<std::size_t> members;
};

struct ConsistencyReport {
  std::map<std::string, AnswerGroup> groups;  // keyed by normalized answer
  std::string top_answer;                     // raw answer of the representative path
  std::string top_group_key;
  std::size_t top_path_index = 0;             // member of top group with max total_logprob
  int majority_score = 0;
  double weighted_score = 0.0;
  int n = 0;
};

using AnswerNormalizer = std::function<std::string(const std::string&)>;

/// Lowercase, strip terminal punctuation, collapse whitespace, drop a leading
/// article (a/an/the). Used both for answer grouping and exact match.
std::string normalize_answer(const std::string& raw);

/**
 * Group the sampled answers and compute majority and probability-weighted
 * consistency. Group weight = n * sum(exp(logprob)) / total over all paths;
 * when any path lacks logprobs, weights fall back to plain counts. The top
 * group maximizes weight, ties broken by count then lexicographic key.
 */
ConsistencyReport score(const SampleSet& samples,
                        const AnswerNormalizer& normalizer = normalize_answer);

double default_edit_threshold(int n);  // ceil(n/2)

/// Gate: edit iff weighted_score < threshold (threshold < 0 => ceil(n/2)).
bool should_edit(const ConsistencyReport& report, double threshold = -1.0);

}  // namespace vecot
