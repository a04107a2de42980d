#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vecot/backend.hpp"
#include "vecot/editor.hpp"
#include "vecot/errors.hpp"

namespace vecot {

struct EvalRow {
  std::string id;
  std::string predicted;
  std::string gold;
  bool correct = false;
  double confidence = 0.0;
  bool edited = false;
  double weighted_score = 0.0;
  int n = 0;
  TokenUsage usage;
  bool failed = false;
};

struct CostModel {
  double usd_per_1k_tokens = 0.02;
};

struct Aggregates {
  double em_or_accuracy = 0.0;
  double auc = 0.5;
  double edit_fraction = 0.0;
  double total_cost_usd = 0.0;
};

/// EM over normalized answers (1 / 0).
int exact_match(const std::string& predicted, const std::string& gold);

/// Fever: case-insensitive label equality.
int label_match(const std::string& predicted, const std::string& gold);

/**
 * Mann-Whitney ROC-AUC: probability a random (correct, incorrect) pair is
 * ordered by confidence, ties counted 1/2. Throws DegenerateLabels when one
 * class is missing.
 */
double roc_auc(const std::vector<double>& confidences, const std::vector<bool>& correct);

/// (prompt + completion tokens) / 1000 * rate.
double cost(const TokenUsage& usage, const CostModel& model);

/**
 * Uniformly sample target/2 ids from the correct rows and target/2 from the
 * incorrect ones, without replacement, deterministic under the seed.
 */
std::vector<std::string> balanced_subsample(const std::vector<EvalRow>& rows, int target,
                                            std::uint64_t seed);

struct DensityBin {
  double bin_low = 0.0;
  double bin_high = 0.0;
  int correct_count = 0;
  int incorrect_count = 0;
};

/// Histogram of weighted consistency scores over [0, n] at width 0.5, one
/// series per correctness class. Raw binned data, no curve fitting.
std::vector<DensityBin> consistency_density(const std::vector<EvalRow>& rows, int n);

EvalRow eval_row_from_trace(const PipelineTrace& trace, bool fever);
std::vector<EvalRow> eval_rows(const std::vector<PipelineTrace>& traces, bool fever);

/// Aggregate metrics; AUC falls back to 0.5 when labels are degenerate.
Aggregates aggregate(const std::vector<EvalRow>& rows, const CostModel& model = {});

struct AblationMetricsRow {
  double threshold = 0.0;
  double em_or_accuracy = 0.0;
  double auc = 0.0;
  double edit_fraction = 0.0;
};

std::vector<AblationMetricsRow> ablation_metrics(const std::vector<AblationRun>& runs,
                                                 bool fever, const CostModel& model = {});

}  // namespace vecot
