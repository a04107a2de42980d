#include "vecot/evalharness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "vecot/text.hpp"

namespace vecot {

int exact_match(const std::string& predicted, const std::string& gold) {
  return normalize_answer(predicted) == normalize_answer(gold) ? 1 : 0;
}

int label_match(const std::string& predicted, const std::string& gold) {
  auto upper = [](const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return text::trim(out);
  };
  return upper(predicted) == upper(gold) ? 1 : 0;
}

double roc_auc(const std::vector<double>& confidences, const std::vector<bool>& correct) {
  if (confidences.size() != correct.size()) {
    throw DegenerateLabels("confidence and label lists differ in length");
  }
  long n_pos = std::count(correct.begin(), correct.end(), true);
  long n_neg = static_cast<long>(correct.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DegenerateLabels("roc_auc needs at least one correct and one incorrect row");
  }

  // Rank-sum formulation with midranks for ties.
  std::vector<std::size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidences[a] < confidences[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && confidences[order[j]] == confidences[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (correct[order[k]]) pos_rank_sum += midrank;
    }
    i = j;
  }
  return (pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double cost(const TokenUsage& usage, const CostModel& model) {
  return static_cast<double>(usage.total()) / 1000.0 * model.usd_per_1k_tokens;
}

std::vector<std::string> balanced_subsample(const std::vector<EvalRow>& rows, int target,
                                            std::uint64_t seed) {
  std::vector<std::string> correct_ids;
  std::vector<std::string> incorrect_ids;
  for (const auto& row : rows) {
    (row.correct ? correct_ids : incorrect_ids).push_back(row.id);
  }
  const int half = target / 2;
  if (static_cast<int>(correct_ids.size()) < half ||
      static_cast<int>(incorrect_ids.size()) < half) {
    throw InsufficientPool("need " + std::to_string(half) +
                           " rows per class, have " + std::to_string(correct_ids.size()) +
                           " correct / " + std::to_string(incorrect_ids.size()) +
                           " incorrect");
  }
  // Sort before shuffling so the draw depends only on id sets and the seed,
  // not on input row order.
  std::sort(correct_ids.begin(), correct_ids.end());
  std::sort(incorrect_ids.begin(), incorrect_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(correct_ids.begin(), correct_ids.end(), rng);
  std::shuffle(incorrect_ids.begin(), incorrect_ids.end(), rng);

  std::vector<std::string> out;
  out.insert(out.end(), correct_ids.begin(), correct_ids.begin() + half);
  out.insert(out.end(), incorrect_ids.begin(), incorrect_ids.begin() + half);
  return out;
}

std::vector<DensityBin> consistency_density(const std::vector<EvalRow>& rows, int n) {
  if (rows.empty()) return {};
  const int n_bins = n * 2;  // width 0.5 over [0, n]
  std::vector<DensityBin> bins(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    bins[b].bin_low = b * 0.5;
    bins[b].bin_high = (b + 1) * 0.5;
  }
  for (const auto& row : rows) {
    int b = static_cast<int>(std::floor(row.weighted_score / 0.5));
    if (b >= n_bins) b = n_bins - 1;  // score == n lands in the top bin
    if (b < 0) b = 0;
    if (row.correct) {
      bins[b].correct_count += 1;
    } else {
      bins[b].incorrect_count += 1;
    }
  }
  return bins;
}

EvalRow eval_row_from_trace(const PipelineTrace& trace, bool fever) {
  EvalRow row;
  row.id = trace.id;
  row.predicted = trace.final_answer;
  row.gold = trace.gold;
  row.failed = trace.failed;
  row.correct = !trace.failed &&
                (fever ? label_match(trace.final_answer, trace.gold)
                       : exact_match(trace.final_answer, trace.gold)) == 1;
  row.confidence = trace.confidence;
  row.edited = trace.edited;
  row.weighted_score = trace.report.weighted_score;
  row.n = trace.report.n;
  row.usage = trace.usage;
  return row;
}

std::vector<EvalRow> eval_rows(const std::vector<PipelineTrace>& traces, bool fever) {
  std::vector<EvalRow> rows;
  rows.reserve(traces.size());
  for (const auto& t : traces) rows.push_back(eval_row_from_trace(t, fever));
  return rows;
}

Aggregates aggregate(const std::vector<EvalRow>& rows, const CostModel& model) {
  Aggregates agg;
  if (rows.empty()) return agg;
  long correct = 0, edited = 0;
  TokenUsage usage;
  std::vector<double> confidences;
  std::vector<bool> labels;
  for (const auto& row : rows) {
    if (row.correct) ++correct;
    if (row.edited) ++edited;
    usage += row.usage;
    confidences.push_back(row.confidence);
    labels.push_back(row.correct);
  }
  agg.em_or_accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  agg.edit_fraction = static_cast<double>(edited) / static_cast<double>(rows.size());
  agg.total_cost_usd = cost(usage, model);
  try {
    agg.auc = roc_auc(confidences, labels);
  } catch (const DegenerateLabels&) {
    agg.auc = 0.5;
  }
  return agg;
}

std::vector<AblationMetricsRow> ablation_metrics(const std::vector<AblationRun>& runs,
                                                 bool fever, const CostModel& model) {
  std::vector<AblationMetricsRow> out;
  for (const auto& run : runs) {
    Aggregates agg = aggregate(eval_rows(run.traces, fever), model);
    AblationMetricsRow row;
    row.threshold = run.threshold;
    row.em_or_accuracy = agg.em_or_accuracy;
    row.auc = agg.auc;
    row.edit_fraction = agg.edit_fraction;
    out.push_back(row);
  }
  return out;
}

}  // namespace vecot
