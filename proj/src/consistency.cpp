#include "vecot/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "vecot/text.hpp"

namespace vecot {

std::string normalize_answer(const std::string& raw) {
  std::string s = text::lowercase(raw);
  s = text::strip_terminal_punct(s);
  s = text::collapse_whitespace(s);
  for (const char* article : {"a ", "an ", "the "}) {
    const std::size_t len = std::char_traits<char>::length(article);
    if (s.rfind(article, 0) == 0) {
      s = s.substr(len);
      break;
    }
  }
  return text::trim(s);
}

double default_edit_threshold(int n) { return std::ceil(n / 2.0); }

ConsistencyReport score(const SampleSet& samples, const AnswerNormalizer& normalizer) {
  if (samples.paths.empty()) throw EmptySampleSet("no reasoning paths to score");

  ConsistencyReport report;
  report.n = samples.n();

  bool all_logprobs = std::all_of(samples.paths.begin(), samples.paths.end(),
                                  [](const ReasoningPath& p) { return p.has_logprobs; });

  for (std::size_t i = 0; i < samples.paths.size(); ++i) {
    AnswerGroup& g = report.groups[normalizer(samples.paths[i].answer)];
    g.count += 1;
    g.members.push_back(i);
  }

  if (all_logprobs) {
    // Shift by max logprob before exponentiating; the scaling cancels in the
    // normalized weights.
    double max_lp = samples.paths[0].total_logprob;
    for (const auto& p : samples.paths) max_lp = std::max(max_lp, p.total_logprob);
    double total = 0.0;
    for (const auto& p : samples.paths) total += std::exp(p.total_logprob - max_lp);
    for (auto& [key, g] : report.groups) {
      double mass = 0.0;
      for (std::size_t i : g.members) {
        mass += std::exp(samples.paths[i].total_logprob - max_lp);
      }
      g.weight = report.n * mass / total;
    }
  } else {
    for (auto& [key, g] : report.groups) g.weight = static_cast<double>(g.count);
  }

  const std::string* best_key = nullptr;
  for (const auto& [key, g] : report.groups) {
    if (best_key == nullptr) {
      best_key = &key;
      continue;
    }
    const AnswerGroup& best = report.groups.at(*best_key);
    if (g.weight > best.weight ||
        (g.weight == best.weight && g.count > best.count)) {
      best_key = &key;
    }
    // Equal weight and count: the map iterates keys in lexicographic order, so
    // the earlier key already won.
  }

  const AnswerGroup& top = report.groups.at(*best_key);
  report.top_group_key = *best_key;
  report.majority_score = top.count;
  report.weighted_score = top.weight;
  std::size_t best_member = top.members.front();
  for (std::size_t i : top.members) {
    if (samples.paths[i].total_logprob > samples.paths[best_member].total_logprob) {
      best_member = i;
    }
  }
  report.top_path_index = best_member;
  report.top_answer = samples.paths[best_member].answer;
  return report;
}

bool should_edit(const ConsistencyReport& report, double threshold) {
  if (threshold < 0) threshold = default_edit_threshold(report.n);
  return report.weighted_score < threshold;
}

}  // namespace vecot
