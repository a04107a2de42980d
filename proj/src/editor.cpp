#include "vecot/editor.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include "vecot/text.hpp"

namespace vecot {

double PipelineConfig::threshold() const {
  return edit_threshold < 0 ? default_edit_threshold(n_samples) : edit_threshold;
}

Pipeline::Pipeline(Backend& backend, RetrieverFactory retriever_factory,
                   const PromptLibrary& prompts, PipelineConfig cfg)
    : backend_(backend),
      retriever_factory_(std::move(retriever_factory)),
      prompts_(prompts),
      cfg_(std::move(cfg)) {}

std::string Pipeline::question_binding_name() const {
  return cfg_.task == "fever" ? "claim" : "question";
}

CompletionBatch Pipeline::call(const CompletionRequest& req, PipelineTrace& trace) {
  CompletionBatch batch = backend_.complete(req);
  trace.usage += batch.usage;
  trace.backend_calls += 1;
  return batch;
}

void Pipeline::sample_paths(const Instance& instance, PipelineTrace& trace) {
  const PromptTemplate& cot = prompts_.get(cfg_.task, PromptKind::cot);
  CompletionRequest req;
  req.prompt = render(cot, {{question_binding_name(), instance.question}});
  req.n_samples = cfg_.n_samples;
  req.temperature = cfg_.sample_temperature;
  req.max_tokens = cfg_.max_tokens;
  req.stop_sequences = cfg_.stop_sequences;
  req.want_logprobs = true;

  CompletionBatch batch = call(req, trace);
  for (const auto& c : batch.completions) {
    trace.raw_sample_texts.push_back(c.text);
    try {
      ReasoningPath path;
      path.rationale = parse_cot(c.text, instance.is_fever());
      path.answer = path.rationale.answer;
      path.total_logprob = c.total_logprob;
      path.has_logprobs = c.has_logprobs();
      trace.samples.paths.push_back(std::move(path));
    } catch (const ParseFailure&) {
      // Unparseable sample: dropped, n reflects survivors.
    }
  }
  if (trace.samples.paths.empty()) {
    throw InstanceFailed("all " + std::to_string(cfg_.n_samples) +
                         " sampled completions failed to parse for instance " + instance.id);
  }
}

std::string Pipeline::generate_verifying_question(const Instance& instance,
                                                  const std::string& sentence,
                                                  PipelineTrace& trace) {
  const PromptTemplate& vq = prompts_.get(cfg_.task, PromptKind::verifying_question);
  CompletionRequest req;
  req.prompt = render(vq, {{question_binding_name(), instance.question},
                           {"rationale_sentence", sentence}});
  req.n_samples = 1;
  req.temperature = 0.0;
  req.max_tokens = cfg_.max_tokens;
  req.stop_sequences = cfg_.stop_sequences;

  CompletionBatch batch = call(req, trace);
  const std::string& raw = batch.completions.front().text;

  // First line that asks something; keep it through its first '?'.
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    std::string line = raw.substr(start, end == std::string::npos ? std::string::npos
                                                                  : end - start);
    std::size_t qmark = line.find('?');
    if (qmark != std::string::npos) return text::trim(line.substr(0, qmark + 1));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  throw ParseFailure("verifying-question completion contains no '?': " + raw);
}

std::string Pipeline::generate_verifying_answer(const std::string& verifying_question,
                                                const EvidenceSet& evidence,
                                                PipelineTrace& trace) {
  const PromptTemplate& va = prompts_.get(cfg_.task, PromptKind::verifying_answer);
  std::string contexts;
  for (const auto& rs : evidence.top_sentences) {
    if (!contexts.empty()) contexts += '\n';
    contexts += rs.sentence;
  }
  CompletionRequest req;
  req.prompt = render(va, {{"contexts", contexts},
                           {"verifying_question", verifying_question}});
  req.n_samples = 1;
  req.temperature = 0.0;
  req.max_tokens = cfg_.max_tokens;
  req.stop_sequences = cfg_.stop_sequences;

  CompletionBatch batch = call(req, trace);
  std::string out = batch.completions.front().text;
  std::size_t nl = out.find('\n');
  if (nl != std::string::npos) out.resize(nl);
  return text::trim(out);
}

void Pipeline::finish_from_samples(const Instance& instance, PipelineTrace& trace,
                                   double threshold) {
  trace.report = score(trace.samples);
  trace.edited = should_edit(trace.report, threshold);

  if (!trace.edited) {
    trace.final_answer = trace.report.top_answer;
    trace.confidence = trace.report.weighted_score / trace.report.n;
    return;
  }

  const ReasoningPath& top = trace.samples.paths[trace.report.top_path_index];

  std::shared_ptr<Retriever> retriever;
  try {
    retriever = retriever_factory_(instance);
  } catch (const std::runtime_error&) {
    retriever = nullptr;  // every step degrades to keeping its sentence
  }

  std::vector<std::string> verified;
  for (const auto& sentence : top.rationale.sentences) {
    VerificationStep step;
    step.original_sentence = sentence;
    step.verified_statement = sentence;
    step.fallback = true;

    try {
      step.verifying_question = generate_verifying_question(instance, sentence, trace);
    } catch (const ParseFailure&) {
      step.verifying_question.clear();
    }

    if (!step.verifying_question.empty() && retriever != nullptr) {
      try {
        trace.retrieval_calls += 1;
        step.evidence = gather_evidence(*retriever, step.verifying_question, cfg_.ranker);
      } catch (const std::runtime_error&) {
        step.evidence = EvidenceSet{};
        step.evidence.query = step.verifying_question;
      }
      if (!step.evidence.top_sentences.empty()) {
        std::string answer =
            generate_verifying_answer(step.verifying_question, step.evidence, trace);
        if (!answer.empty()) {
          step.verified_statement = answer;
          step.fallback = false;
        }
      }
    }
    verified.push_back(step.verified_statement);
    trace.steps.push_back(std::move(step));
  }

  Rationale top_rationale = top.rationale;
  trace.edited_rationale = compose_edited_rationale(top_rationale, verified);

  // Re-answer: the CoT few-shot prompt with the edited rationale in the
  // answer slot, cueing "The answer is" so only the answer gets generated.
  const PromptTemplate& cot = prompts_.get(cfg_.task, PromptKind::cot);
  CompletionRequest req;
  req.prompt = render(cot, {{question_binding_name(), instance.question}}) + " " +
               trace.edited_rationale + " The answer is";
  req.n_samples = 1;
  req.temperature = 0.0;
  req.max_tokens = cfg_.max_tokens;
  req.stop_sequences = cfg_.stop_sequences;

  trace.final_answer = trace.report.top_answer;
  trace.confidence = trace.report.weighted_score / trace.report.n;
  try {
    CompletionBatch batch = call(req, trace);
    const Completion& c = batch.completions.front();
    std::string answer = c.text;
    std::size_t nl = answer.find('\n');
    if (nl != std::string::npos) answer.resize(nl);
    answer = text::strip_terminal_punct(answer);
    if (instance.is_fever()) {
      std::string upper = answer;
      std::transform(upper.begin(), upper.end(), upper.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
      if (upper != "SUPPORTS" && upper != "REFUTES" && upper != "NOT ENOUGH INFO") {
        throw ParseFailure("re-answer is not a Fever label: " + answer);
      }
      answer = upper;
    }
    if (answer.empty()) throw ParseFailure("empty re-answer");
    trace.final_answer = answer;
    if (c.has_logprobs()) {
      trace.confidence =
          std::exp(c.total_logprob / static_cast<double>(c.token_logprobs.size()));
    }
  } catch (const ParseFailure&) {
    // Keep the sampled top answer and its consistency-based confidence.
  }
}

PipelineTrace Pipeline::run_instance(const Instance& instance) {
  PipelineTrace trace;
  trace.id = instance.id;
  trace.task = instance.task;
  trace.question = instance.question;
  trace.gold = instance.gold;
  sample_paths(instance, trace);
  finish_from_samples(instance, trace, cfg_.threshold());
  return trace;
}

std::vector<PipelineTrace> Pipeline::run_batch(const std::vector<Instance>& instances,
                                               int parallelism) {
  if (parallelism < 1) parallelism = 1;
  std::vector<PipelineTrace> traces(instances.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) break;
      try {
        traces[i] = run_instance(instances[i]);
      } catch (const std::runtime_error& e) {
        PipelineTrace failed;
        failed.id = instances[i].id;
        failed.task = instances[i].task;
        failed.question = instances[i].question;
        failed.gold = instances[i].gold;
        failed.failed = true;
        failed.error = e.what();
        traces[i] = std::move(failed);
      }
    }
  };

  const int n_workers = std::min<int>(parallelism, static_cast<int>(instances.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return traces;
}

std::vector<AblationRun> ablate_threshold(Pipeline& pipeline,
                                          const std::vector<Instance>& instances,
                                          const std::vector<double>& thresholds,
                                          int parallelism) {
  (void)parallelism;
  std::vector<PipelineTrace> bases(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    PipelineTrace base;
    base.id = instances[i].id;
    base.task = instances[i].task;
    base.question = instances[i].question;
    base.gold = instances[i].gold;
    try {
      pipeline.sample_paths(instances[i], base);
    } catch (const std::runtime_error& e) {
      base.failed = true;
      base.error = e.what();
    }
    bases[i] = std::move(base);
  }

  std::vector<AblationRun> runs;
  for (double threshold : thresholds) {
    AblationRun run;
    run.threshold = threshold;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      PipelineTrace trace = bases[i];  // re-gate from the shared sampling pass
      if (!trace.failed) {
        pipeline.finish_from_samples(instances[i], trace, threshold);
      }
      run.traces.push_back(std::move(trace));
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace vecot
