#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "vecot/editor.hpp"
#include "vecot/evalharness.hpp"
#include "vecot/io.hpp"

using namespace vecot;

namespace {

const PromptLibrary& library() {
  static PromptLibrary lib(std::string(VECOT_SOURCE_DIR) + "/prompts");
  return lib;
}

Completion completion(const std::string& text, std::vector<double> lps) {
  Completion c;
  c.text = text;
  c.token_logprobs = std::move(lps);
  for (double lp : c.token_logprobs) c.total_logprob += lp;
  return c;
}

Instance hotpot_instance() {
  Instance inst;
  inst.id = "i1";
  inst.task = "hotpotqa";
  inst.question = "What team did Milan Blagojevic play for?";
  inst.gold = "Adelaide City";
  Passage p1;
  p1.source = "dataset";
  p1.title = "Milan Blagojevic";
  p1.text = "Milan Blagojevic is an Australian coach. "
            "He played for Adelaide City in the National Soccer League.";
  Passage p2;
  p2.source = "dataset";
  p2.title = "Distractor";
  p2.text = "A completely unrelated paragraph about pasta recipes.";
  inst.paragraphs = {p1, p2};
  return inst;
}

RetrieverFactory dataset_factory() {
  return [](const Instance& inst) -> std::shared_ptr<Retriever> {
    return std::make_shared<DatasetRetriever>(inst.paragraphs);
  };
}

std::string greedy_key(const std::string& prompt) {
  CompletionRequest req;
  req.prompt = prompt;
  req.n_samples = 1;
  req.temperature = 0.0;
  return fixture_key(req);
}

std::string sample_key(const std::string& prompt, int n, double temp) {
  CompletionRequest req;
  req.prompt = prompt;
  req.n_samples = n;
  req.temperature = temp;
  return fixture_key(req);
}

// An always-empty retriever, for the empty-evidence fallback path.
class EmptyRetriever : public Retriever {
 public:
  std::vector<Passage> retrieve(const std::string&) override { return {}; }
};

}  // namespace

TEST_CASE("unanimous samples skip editing entirely") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});

  ScriptedFixture fixture;
  std::vector<Completion> samples;
  for (int i = 0; i < 5; ++i) {
    samples.push_back(completion(
        "First, Milan Blagojevic played for Adelaide City. The answer is Adelaide City.",
        {-0.5}));
  }
  fixture.add(sample_key(cot_prompt, 5, 0.7), samples, TokenUsage{900, 110});
  ScriptedBackend backend(std::move(fixture));

  int factory_calls = 0;
  RetrieverFactory counting_factory = [&](const Instance& i) -> std::shared_ptr<Retriever> {
    ++factory_calls;
    return std::make_shared<DatasetRetriever>(i.paragraphs);
  };
  Pipeline pipeline(backend, counting_factory, library(), cfg);
  PipelineTrace trace = pipeline.run_instance(inst);

  CHECK_FALSE(trace.edited);
  CHECK(trace.final_answer == "Adelaide City");
  CHECK(trace.report.weighted_score == doctest::Approx(5.0));
  CHECK(trace.confidence == doctest::Approx(1.0));
  CHECK(trace.backend_calls == 1);
  CHECK(trace.retrieval_calls == 0);
  CHECK(factory_calls == 0);
  CHECK(trace.steps.empty());
  CHECK(trace.usage.prompt_tokens == 900);
  CHECK(trace.usage.completion_tokens == 110);
}

TEST_CASE("low-consistency instance goes through the full edit loop") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
  const std::string top_sentence = "First, Milan Blagojevic played for Sydney FC.";

  ScriptedFixture fixture;
  fixture.add(
      sample_key(cot_prompt, 5, 0.7),
      {completion(top_sentence + " The answer is Sydney FC.", {-1.0}),
       completion("First, he played for Sydney FC. The answer is Sydney FC.", {-2.0}),
       completion("First, he played for Melbourne. The answer is Melbourne.", {-2.0}),
       completion("First, he played for Perth Glory. The answer is Perth Glory.", {-2.0}),
       completion("no conclusion in this sample", {-9.0})},
      TokenUsage{900, 160});

  const std::string vq_prompt =
      render(library().get("hotpotqa", PromptKind::verifying_question),
             {{"question", inst.question}, {"rationale_sentence", top_sentence}});
  const std::string vq_text = "What team did Milan Blagojevic play for?";
  fixture.add(greedy_key(vq_prompt), {completion(" " + vq_text + "\nignored tail", {-0.4})},
              TokenUsage{300, 12});

  DatasetRetriever ret(inst.paragraphs);
  EvidenceSet ev = gather_evidence(ret, vq_text, cfg.ranker);
  std::string contexts;
  for (const auto& rs : ev.top_sentences) {
    if (!contexts.empty()) contexts += '\n';
    contexts += rs.sentence;
  }
  const std::string va_prompt =
      render(library().get("hotpotqa", PromptKind::verifying_answer),
             {{"contexts", contexts}, {"verifying_question", vq_text}});
  fixture.add(greedy_key(va_prompt),
              {completion(" Milan Blagojevic played for Adelaide City\nextra", {-0.3})},
              TokenUsage{250, 10});

  const std::string reanswer_prompt = cot_prompt +
                                      " Milan Blagojevic played for Adelaide City." +
                                      " The answer is";
  fixture.add(greedy_key(reanswer_prompt), {completion(" Adelaide City.", {-0.1, -0.2})},
              TokenUsage{120, 3});

  ScriptedBackend backend(std::move(fixture));
  Pipeline pipeline(backend, dataset_factory(), library(), cfg);
  PipelineTrace trace = pipeline.run_instance(inst);

  CHECK(trace.edited);
  REQUIRE(trace.samples.paths.size() == 4);  // unparseable sample dropped
  CHECK(trace.report.top_group_key == "sydney fc");
  CHECK(trace.report.weighted_score < 3.0);
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.steps[0].verifying_question == vq_text);
  CHECK_FALSE(trace.steps[0].fallback);
  CHECK(trace.steps[0].verified_statement == "Milan Blagojevic played for Adelaide City");
  CHECK(trace.edited_rationale == "Milan Blagojevic played for Adelaide City.");
  CHECK(trace.final_answer == "Adelaide City");
  CHECK(trace.confidence == doctest::Approx(std::exp(-0.15)));
  CHECK(trace.backend_calls == 4);
  CHECK(trace.retrieval_calls == 1);
  // Token accounting: the trace total equals what the backend served.
  CHECK(trace.usage.prompt_tokens == 900 + 300 + 250 + 120);
  CHECK(trace.usage.completion_tokens == 160 + 12 + 10 + 3);
  CHECK(backend.served_usage().prompt_tokens == trace.usage.prompt_tokens);

  // Evidence sentences carry provenance back to the instance paragraphs.
  REQUIRE(!trace.steps[0].evidence.top_sentences.empty());
  bool saw_adelaide = false;
  for (const auto& rs : trace.steps[0].evidence.top_sentences) {
    if (rs.sentence == "He played for Adelaide City in the National Soccer League.") {
      saw_adelaide = true;
    }
    bool in_some_passage = false;
    for (const auto& p : trace.steps[0].evidence.passages) {
      if (p.text.find(rs.sentence) != std::string::npos) in_some_passage = true;
    }
    CHECK(in_some_passage);
  }
  CHECK(saw_adelaide);
}

TEST_CASE("fallback ladder: no '?', empty evidence, failed re-answer") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
  const std::string s1 = "First, Milan Blagojevic played for Sydney FC.";

  auto base_fixture = [&](const std::string& vq_completion) {
    ScriptedFixture fixture;
    // The Sydney path carries the most probability mass, so its group wins
    // but stays below the threshold of 3.
    fixture.add(sample_key(cot_prompt, 5, 0.7),
                {completion(s1 + " The answer is Sydney FC.", {-0.5}),
                 completion("First, X. The answer is Melbourne.", {-2.0}),
                 completion("First, Y. The answer is Perth.", {-2.0}),
                 completion("First, Z. The answer is Brisbane.", {-2.0}),
                 completion("First, W. The answer is Newcastle.", {-2.0})});
    const std::string vq_prompt =
        render(library().get("hotpotqa", PromptKind::verifying_question),
               {{"question", inst.question}, {"rationale_sentence", s1}});
    fixture.add(greedy_key(vq_prompt), {completion(vq_completion, {-0.4})});
    // Re-answer from the kept original sentence; empty text => ParseFailure.
    fixture.add(greedy_key(cot_prompt + " " + s1 + " The answer is"),
                {completion("   ", {})});
    return fixture;
  };

  SUBCASE("verifying question without '?' keeps the sentence, skips retrieval") {
    ScriptedBackend backend(base_fixture("I cannot form a question."));
    Pipeline pipeline(backend, dataset_factory(), library(), cfg);
    PipelineTrace trace = pipeline.run_instance(inst);
    CHECK(trace.edited);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].fallback);
    CHECK(trace.steps[0].verifying_question.empty());
    CHECK(trace.steps[0].verified_statement == s1);
    CHECK(trace.retrieval_calls == 0);
    // Re-answer parse failed too: the sampled top answer survives.
    CHECK(trace.final_answer == "Sydney FC");
    const double sydney_mass = std::exp(-0.5) / (std::exp(-0.5) + 4.0 * std::exp(-2.0));
    CHECK(trace.confidence == doctest::Approx(sydney_mass));
  }

  SUBCASE("empty evidence keeps the sentence") {
    ScriptedBackend backend(
        base_fixture("What team did Milan Blagojevic play for?"));
    RetrieverFactory empty_factory = [](const Instance&) -> std::shared_ptr<Retriever> {
      return std::make_shared<EmptyRetriever>();
    };
    Pipeline pipeline(backend, empty_factory, library(), cfg);
    PipelineTrace trace = pipeline.run_instance(inst);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].fallback);
    CHECK(trace.steps[0].verified_statement == s1);
    CHECK(trace.retrieval_calls == 1);
    CHECK(trace.final_answer == "Sydney FC");
  }

  SUBCASE("retriever construction failure degrades the same way") {
    ScriptedBackend backend(
        base_fixture("What team did Milan Blagojevic play for?"));
    RetrieverFactory broken = [](const Instance&) -> std::shared_ptr<Retriever> {
      throw NoDatasetContext("nothing to retrieve from");
    };
    Pipeline pipeline(backend, broken, library(), cfg);
    PipelineTrace trace = pipeline.run_instance(inst);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].fallback);
    CHECK(trace.final_answer == "Sydney FC");
  }
}

TEST_CASE("threshold zero disables editing regardless of disagreement") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  cfg.edit_threshold = 0.0;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
  ScriptedFixture fixture;
  fixture.add(sample_key(cot_prompt, 5, 0.7),
              {completion("First, A. The answer is Alpha.", {-1.0}),
               completion("First, B. The answer is Beta.", {-1.0}),
               completion("First, C. The answer is Gamma.", {-1.0}),
               completion("First, D. The answer is Delta.", {-1.0}),
               completion("First, E. The answer is Epsilon.", {-1.0})});
  ScriptedBackend backend(std::move(fixture));
  RetrieverFactory never = [](const Instance&) -> std::shared_ptr<Retriever> {
    FAIL("retriever must not be consulted at threshold 0");
    return nullptr;
  };
  Pipeline pipeline(backend, never, library(), cfg);
  PipelineTrace trace = pipeline.run_instance(inst);
  CHECK_FALSE(trace.edited);
  CHECK(trace.backend_calls == 1);
  CHECK(trace.final_answer == "Alpha");  // weight tie broken by count then key
}

TEST_CASE("all samples unparseable fails the instance, batch keeps going") {
  Instance good = hotpot_instance();
  Instance bad = hotpot_instance();
  bad.id = "i2";
  bad.question = "Who wrote the unrelated book?";

  PipelineConfig cfg;
  ScriptedFixture fixture;
  const std::string good_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", good.question}});
  const std::string bad_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", bad.question}});
  std::vector<Completion> good_samples;
  for (int i = 0; i < 5; ++i) {
    good_samples.push_back(completion("First, F. The answer is Adelaide City.", {-0.5}));
  }
  std::vector<Completion> bad_samples;
  for (int i = 0; i < 5; ++i) bad_samples.push_back(completion("no conclusion", {-0.5}));
  fixture.add(sample_key(good_prompt, 5, 0.7), good_samples);
  fixture.add(sample_key(bad_prompt, 5, 0.7), bad_samples);
  ScriptedBackend backend(std::move(fixture));
  Pipeline pipeline(backend, dataset_factory(), library(), cfg);

  auto traces = pipeline.run_batch({good, bad}, 2);
  REQUIRE(traces.size() == 2);
  CHECK_FALSE(traces[0].failed);
  CHECK(traces[0].id == "i1");
  CHECK(traces[1].failed);
  CHECK(traces[1].id == "i2");
  CHECK(!traces[1].error.empty());
}

TEST_CASE("run_batch is order-preserving and parallelism-invariant") {
  PipelineConfig cfg;
  std::vector<Instance> instances;
  ScriptedFixture fixture;
  for (int i = 0; i < 8; ++i) {
    Instance inst = hotpot_instance();
    inst.id = "b" + std::to_string(i);
    inst.question = "Question number " + std::to_string(i) + "?";
    const std::string prompt =
        render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
    std::vector<Completion> samples;
    for (int s = 0; s < 5; ++s) {
      samples.push_back(completion(
          "First, fact " + std::to_string(i) + ". The answer is Answer" +
              std::to_string(i) + ".",
          {-0.5 - 0.1 * s}));
    }
    fixture.add(sample_key(prompt, 5, 0.7), samples);
    instances.push_back(std::move(inst));
  }

  ScriptedBackend b1(fixture);
  ScriptedBackend b4(fixture);
  Pipeline p1(b1, dataset_factory(), library(), cfg);
  Pipeline p4(b4, dataset_factory(), library(), cfg);
  auto serial = p1.run_batch(instances, 1);
  auto parallel = p4.run_batch(instances, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].id == instances[i].id);
    CHECK(trace_to_json(serial[i]).dump() == trace_to_json(parallel[i]).dump());
  }
}

TEST_CASE("threshold ablation samples once and edit fraction is monotone") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
  const std::string s1 = "First, Milan Blagojevic played for Sydney FC.";

  ScriptedFixture fixture;
  fixture.add(sample_key(cot_prompt, 5, 0.7),
              {completion(s1 + " The answer is Sydney FC.", {-1.0}),
               completion("First, s. The answer is Sydney FC.", {-1.0}),
               completion("First, s. The answer is Sydney FC.", {-1.0}),
               completion("First, m. The answer is Melbourne.", {-1.0}),
               completion("First, p. The answer is Perth.", {-1.0})});
  const std::string vq_prompt =
      render(library().get("hotpotqa", PromptKind::verifying_question),
             {{"question", inst.question}, {"rationale_sentence", s1}});
  const std::string vq_text = "What team did Milan Blagojevic play for?";
  fixture.add(greedy_key(vq_prompt), {completion(vq_text, {-0.4})});

  DatasetRetriever ret(inst.paragraphs);
  EvidenceSet ev = gather_evidence(ret, vq_text, cfg.ranker);
  std::string contexts;
  for (const auto& rs : ev.top_sentences) {
    if (!contexts.empty()) contexts += '\n';
    contexts += rs.sentence;
  }
  const std::string va_prompt =
      render(library().get("hotpotqa", PromptKind::verifying_answer),
             {{"contexts", contexts}, {"verifying_question", vq_text}});
  fixture.add(greedy_key(va_prompt),
              {completion("Milan Blagojevic played for Adelaide City", {-0.3})});
  fixture.add(greedy_key(cot_prompt + " Milan Blagojevic played for Adelaide City." +
                         " The answer is"),
              {completion(" Adelaide City.", {-0.1})});

  ScriptedBackend backend(std::move(fixture));
  Pipeline pipeline(backend, dataset_factory(), library(), cfg);

  const std::vector<double> thresholds = {0.0, 3.0, 5.0};
  auto runs = ablate_threshold(pipeline, {inst}, thresholds);
  REQUIRE(runs.size() == 3);
  CHECK(backend.calls() >= 1);

  // threshold 0: never edits (CoT-SC); threshold 3: weighted 3.0 is not below;
  // threshold 5: edits.
  CHECK_FALSE(runs[0].traces[0].edited);
  CHECK(runs[0].traces[0].final_answer == "Sydney FC");
  CHECK_FALSE(runs[1].traces[0].edited);
  CHECK(runs[2].traces[0].edited);
  CHECK(runs[2].traces[0].final_answer == "Adelaide City");

  double prev = -1.0;
  for (const auto& run : runs) {
    auto rows = eval_rows(run.traces, false);
    Aggregates agg = aggregate(rows);
    CHECK(agg.edit_fraction >= prev);
    prev = agg.edit_fraction;
  }
}

TEST_CASE("fever task binds the claim and validates re-answer labels") {
  Instance inst;
  inst.id = "f1";
  inst.task = "fever";
  inst.question = "Adelaide City is a football club.";
  inst.gold = "SUPPORTS";
  Passage p;
  p.source = "dataset";
  p.title = "Adelaide City FC";
  p.text = "Adelaide City Football Club is an Australian football club based in Adelaide.";
  inst.paragraphs = {p};

  PipelineConfig cfg;
  cfg.task = "fever";
  const std::string cot_prompt =
      render(library().get("fever", PromptKind::cot), {{"claim", inst.question}});
  ScriptedFixture fixture;
  std::vector<Completion> samples;
  for (int i = 0; i < 5; ++i) {
    samples.push_back(
        completion("First, it is a club. The answer is supports.", {-0.5}));
  }
  fixture.add(sample_key(cot_prompt, 5, 0.7), samples);
  ScriptedBackend backend(std::move(fixture));
  Pipeline pipeline(backend, dataset_factory(), library(), cfg);
  PipelineTrace trace = pipeline.run_instance(inst);
  CHECK(trace.final_answer == "SUPPORTS");
  CHECK_FALSE(trace.edited);
}

TEST_CASE("trace serialization is deterministic") {
  Instance inst = hotpot_instance();
  PipelineConfig cfg;
  const std::string cot_prompt =
      render(library().get("hotpotqa", PromptKind::cot), {{"question", inst.question}});
  ScriptedFixture fixture;
  std::vector<Completion> samples;
  for (int i = 0; i < 5; ++i) {
    samples.push_back(completion("First, F. The answer is Adelaide City.", {-0.5}));
  }
  fixture.add(sample_key(cot_prompt, 5, 0.7), samples);
  ScriptedBackend backend(std::move(fixture));
  Pipeline pipeline(backend, dataset_factory(), library(), cfg);
  const std::string a = trace_to_json(pipeline.run_instance(inst)).dump();
  const std::string b = trace_to_json(pipeline.run_instance(inst)).dump();
  CHECK(a == b);
  CHECK(a.find("timestamp") == std::string::npos);
}
