#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vecot/backend.hpp"
#include "vecot/consistency.hpp"
#include "vecot/dataset.hpp"
#include "vecot/prompting.hpp"
#include "vecot/retrieval.hpp"

namespace vecot {

struct PipelineConfig {
  std::string task = "hotpotqa";
  int n_samples = 5;
  double sample_temperature = 0.7;
  double edit_threshold = -1.0;  // < 0 => ceil(n/2)
  std::string retriever_id = "dataset";
  RankerConfig ranker;
  int max_tokens = 256;
  std::vector<std::string> stop_sequences = {"\n\nQ:", "\n\nQuestion:", "\n\nClaim:"};

  double threshold() const;
};

struct VerificationStep {
  std::string original_sentence;
  std::string verifying_question;  // empty when question generation fell back
  EvidenceSet evidence;
  std::string verified_statement;
  bool fallback = false;  // verified_statement kept the original sentence
};

struct PipelineTrace {
  std::string id;
  std::string task;
  std::string question;
  std::string gold;
  bool failed = false;
  std::string error;
  SampleSet samples;
  std::vector<std::string> raw_sample_texts;  // includes unparseable completions
  ConsistencyReport report;
  bool edited = false;
  std::vector<VerificationStep> steps;
  std::string edited_rationale;
  std::string final_answer;
  double confidence = 0.0;
  TokenUsage usage;
  long backend_calls = 0;
  long retrieval_calls = 0;
};

/// Builds a retriever for the instance at hand. The dataset source is bound
/// per instance; HTTP/corpus retrievers are shared and returned as-is.
using RetrieverFactory = std::function<std::shared_ptr<Retriever>(const Instance&)>;

/**
 * Runs the full verify-and-edit loop for one instance: sample n CoT paths,
 * gate on self-consistency, and for low-consistency instances verify each
 * rationale sentence against retrieved evidence, rewrite it, and re-answer
 * greedily from the edited rationale.
 *
 * Stage failures never abort an instance: a verifying question without a "?"
 * or empty evidence keeps the original sentence, and a failed re-answer keeps
 * the sampled top answer.
 */
class Pipeline {
 public:
  Pipeline(Backend& backend, RetrieverFactory retriever_factory,
           const PromptLibrary& prompts, PipelineConfig cfg);

  PipelineTrace run_instance(const Instance& instance);
  std::vector<PipelineTrace> run_batch(const std::vector<Instance>& instances,
                                       int parallelism);

  /// Sample n CoT paths and parse them; unparseable completions are dropped
  /// (kept in raw texts). Throws InstanceFailed when nothing parses.
  void sample_paths(const Instance& instance, PipelineTrace& trace);

  /// Gate + edit + re-answer on already-sampled paths; lets the threshold
  /// ablation reuse one sampling pass.
  void finish_from_samples(const Instance& instance, PipelineTrace& trace, double threshold);

  std::string generate_verifying_question(const Instance& instance,
                                          const std::string& sentence, PipelineTrace& trace);
  std::string generate_verifying_answer(const std::string& verifying_question,
                                        const EvidenceSet& evidence, PipelineTrace& trace);

  const PipelineConfig& config() const { return cfg_; }

 private:
  std::string question_binding_name() const;
  CompletionBatch call(const CompletionRequest& req, PipelineTrace& trace);

  Backend& backend_;
  RetrieverFactory retriever_factory_;
  const PromptLibrary& prompts_;
  PipelineConfig cfg_;
};

/// Per-threshold ablation rows; sampling runs once per instance, only the
/// gate and the editing stage vary.
struct AblationRun {
  double threshold = 0.0;
  std::vector<PipelineTrace> traces;
};

std::vector<AblationRun> ablate_threshold(Pipeline& pipeline,
                                          const std::vector<Instance>& instances,
                                          const std::vector<double>& thresholds,
                                          int parallelism = 1);

}  // namespace vecot
