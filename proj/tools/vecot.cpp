// Command-line front end: run the verify-and-edit pipeline and its baselines
// over a dataset, export ablation/density plot data, build balanced challenge
// sets, and record/replay HTTP fixtures for reproducible runs.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vecot/backend.hpp"
#include "vecot/dataset.hpp"
#include "vecot/editor.hpp"
#include "vecot/evalharness.hpp"
#include "vecot/io.hpp"
#include "vecot/prompting.hpp"
#include "vecot/retrieval.hpp"
#include "vecot/text.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace vecot;

namespace {

struct RunOptions {
  std::string config_path;
  std::string task = "hotpotqa_adv";
  std::string dataset_path;
  std::string index_path;
  std::string retriever = "dataset";
  std::string prompts_dir = "prompts";
  int n = 5;
  double temperature = 0.7;
  double threshold = -1.0;
  int k = 3;
  int parallel = 4;
  std::uint64_t seed = 0;
  std::string replay_dir;
  std::string record_dir;
  std::string out_dir = "out";

  // from config file only
  HttpBackendConfig backend;
  std::string corpus_path;
  WebSearchConfig websearch;
  WikipediaConfig wikipedia;
  RankerConfig ranker;
  CostModel cost_model;
  int max_tokens = 256;
  std::vector<std::string> stop_sequences = {"\n\nQ:", "\n\nQuestion:", "\n\nClaim:"};
};

void add_run_flags(CLI::App* cmd, RunOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--task", opt.task, "hotpotqa_adv | 2wikimultihop | fever");
  cmd->add_option("--dataset", opt.dataset_path, "dataset file (JSON array or JSONL)")
      ->required();
  cmd->add_option("--index", opt.index_path, "newline-separated instance id file");
  cmd->add_option("--retriever", opt.retriever,
                  "wikipedia | opencorpus | websearch | dataset");
  cmd->add_option("--prompts", opt.prompts_dir, "prompt template directory");
  cmd->add_option("--n", opt.n, "sampled CoT paths per instance");
  cmd->add_option("--temperature", opt.temperature, "sampling temperature");
  cmd->add_option("--threshold", opt.threshold, "consistency edit threshold (-1 = ceil(n/2))");
  cmd->add_option("--k", opt.k, "ranked evidence sentences per verifying question");
  cmd->add_option("--parallel", opt.parallel, "worker parallelism");
  cmd->add_option("--seed", opt.seed, "run seed (manifest + subsampling)");
  cmd->add_option("--replay", opt.replay_dir, "fixture directory to replay from");
  cmd->add_option("--record", opt.record_dir, "fixture directory to record into");
  cmd->add_option("--out", opt.out_dir, "output directory");
}

void apply_config_file(RunOptions& opt, const CLI::App* cmd) {
  if (opt.config_path.empty()) return;
  // Config keys are defaults; any flag given explicitly on the command line wins.
  auto overridden = [cmd](const std::string& flag) { return cmd->count(flag) > 0; };
  std::ifstream in(opt.config_path);
  if (!in) throw ConfigError("cannot open config file: " + opt.config_path);
  ordered_json cfg;
  try {
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = ordered_json::parse(ss.str());
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  if (cfg.contains("backend")) {
    const auto& b = cfg["backend"];
    opt.backend.base_url = b.value("base_url", opt.backend.base_url);
    opt.backend.base_path = b.value("base_path", opt.backend.base_path);
    opt.backend.model = b.value("model", opt.backend.model);
    opt.backend.in_flight_cap = b.value("in_flight_cap", opt.backend.in_flight_cap);
    opt.max_tokens = b.value("max_tokens", opt.max_tokens);
    if (b.contains("stop_sequences")) {
      opt.stop_sequences = b["stop_sequences"].get<std::vector<std::string>>();
    }
  }
  if (cfg.contains("sampling")) {
    const auto& s = cfg["sampling"];
    if (!overridden("--n")) opt.n = s.value("n", opt.n);
    if (!overridden("--temperature")) opt.temperature = s.value("temperature", opt.temperature);
    if (!overridden("--seed")) opt.seed = s.value("seed", opt.seed);
  }
  if (cfg.contains("editing")) {
    const auto& e = cfg["editing"];
    if (!overridden("--threshold")) opt.threshold = e.value("threshold", opt.threshold);
    if (!overridden("--k")) opt.k = e.value("k", opt.k);
  }
  if (cfg.contains("retrieval")) {
    const auto& r = cfg["retrieval"];
    if (!overridden("--retriever")) opt.retriever = r.value("retriever", opt.retriever);
    opt.corpus_path = r.value("corpus_path", opt.corpus_path);
    if (r.contains("websearch")) {
      const auto& w = r["websearch"];
      opt.websearch.url_template = w.value("url_template", "");
      opt.websearch.results_json_path =
          w.value("results_json_path", opt.websearch.results_json_path);
      opt.websearch.title_field = w.value("title_field", opt.websearch.title_field);
      opt.websearch.snippet_field = w.value("snippet_field", opt.websearch.snippet_field);
      opt.websearch.max_results = w.value("max_results", opt.websearch.max_results);
    }
    if (r.contains("wikipedia_base_url")) {
      opt.wikipedia.base_url = r["wikipedia_base_url"].get<std::string>();
    }
    if (r.contains("ranker")) {
      const auto& rk = r["ranker"];
      if (rk.value("method", "lexical") == "embedding_endpoint") {
        opt.ranker.method = RankerConfig::Method::embedding_endpoint;
        opt.ranker.endpoint = rk.value("endpoint", "");
      }
    }
  }
  if (cfg.contains("eval")) {
    opt.cost_model.usd_per_1k_tokens =
        cfg["eval"].value("usd_per_1k_tokens", opt.cost_model.usd_per_1k_tokens);
  }
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Session {
  std::unique_ptr<Backend> live_backend;
  std::unique_ptr<ScriptedBackend> scripted_backend;
  std::unique_ptr<RecordingBackend> recording_backend;
  ScriptedFixture record_sink;
  Backend* backend = nullptr;

  std::shared_ptr<Retriever> shared_retriever;
  std::shared_ptr<Retriever> recording_retriever;
  RetrieverFixture retriever_sink;
  RetrieverFactory retriever_factory;
};

// exit code 2 when a live backend is requested without credentials
struct BackendUnreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void build_backend(const RunOptions& opt, Session& s) {
  if (!opt.replay_dir.empty()) {
    ScriptedFixture fixture;
    fixture.load((fs::path(opt.replay_dir) / "completions.json").string());
    s.scripted_backend = std::make_unique<ScriptedBackend>(std::move(fixture));
    s.backend = s.scripted_backend.get();
    return;
  }
  HttpBackendConfig cfg = opt.backend;
  if (cfg.api_key.empty() && std::getenv("VECOT_API_KEY") == nullptr) {
    throw BackendUnreachable("live backend requires VECOT_API_KEY (or pass --replay DIR)");
  }
  s.live_backend = std::make_unique<HttpBackend>(cfg);
  if (!opt.record_dir.empty()) {
    s.recording_backend = std::make_unique<RecordingBackend>(*s.live_backend, s.record_sink);
    s.backend = s.recording_backend.get();
  } else {
    s.backend = s.live_backend.get();
  }
}

void build_retriever(const RunOptions& opt, Session& s) {
  if (opt.retriever == "dataset") {
    s.retriever_factory = [](const Instance& inst) {
      return std::make_shared<DatasetRetriever>(inst.paragraphs);
    };
    return;
  }

  if (!opt.replay_dir.empty()) {
    RetrieverFixture fixture;
    fixture.load((fs::path(opt.replay_dir) / "retrieval.json").string());
    s.shared_retriever = std::make_shared<FixtureRetriever>(std::move(fixture));
  } else if (opt.retriever == "opencorpus") {
    if (opt.corpus_path.empty()) {
      throw ConfigError("opencorpus retriever needs retrieval.corpus_path in the config");
    }
    s.shared_retriever =
        std::make_shared<BM25Retriever>(BM25Retriever::from_jsonl(opt.corpus_path));
  } else if (opt.retriever == "wikipedia") {
    s.shared_retriever = std::make_shared<WikipediaRetriever>(opt.wikipedia);
  } else if (opt.retriever == "websearch") {
    s.shared_retriever = std::make_shared<WebSearchRetriever>(opt.websearch);
  } else {
    throw ConfigError("unknown retriever: " + opt.retriever);
  }

  std::shared_ptr<Retriever> target = s.shared_retriever;
  if (!opt.record_dir.empty() && opt.replay_dir.empty()) {
    s.recording_retriever =
        std::make_shared<RecordingRetriever>(*s.shared_retriever, s.retriever_sink);
    target = s.recording_retriever;
  }
  s.retriever_factory = [target](const Instance&) { return target; };
}

PipelineConfig pipeline_config(const RunOptions& opt, DatasetFormat format) {
  PipelineConfig cfg;
  cfg.task = task_for(format);
  cfg.n_samples = opt.n;
  cfg.sample_temperature = opt.temperature;
  cfg.edit_threshold = opt.threshold;
  cfg.retriever_id = opt.retriever;
  cfg.ranker = opt.ranker;
  cfg.ranker.k = opt.k;
  cfg.max_tokens = opt.max_tokens;
  cfg.stop_sequences = opt.stop_sequences;
  return cfg;
}

void save_recordings(const RunOptions& opt, Session& s) {
  if (opt.record_dir.empty()) return;
  fs::create_directories(opt.record_dir);
  s.record_sink.save((fs::path(opt.record_dir) / "completions.json").string());
  if (s.recording_retriever != nullptr || opt.retriever == "dataset") {
    s.retriever_sink.save((fs::path(opt.record_dir) / "retrieval.json").string());
  }
}

void write_manifest(const RunOptions& opt, const std::string& command,
                    const Aggregates& agg, const std::string& started,
                    const std::string& finished) {
  ordered_json m;
  m["command"] = command;
  ordered_json cfg;
  cfg["task"] = opt.task;
  cfg["retriever"] = opt.retriever;
  cfg["n"] = opt.n;
  cfg["temperature"] = opt.temperature;
  cfg["threshold"] = opt.threshold;
  cfg["k"] = opt.k;
  cfg["parallel"] = opt.parallel;
  cfg["max_tokens"] = opt.max_tokens;
  cfg["stop_sequences"] = opt.stop_sequences;
  cfg["usd_per_1k_tokens"] = opt.cost_model.usd_per_1k_tokens;
  m["config"] = std::move(cfg);
  m["dataset"] = {{"path", opt.dataset_path}, {"hash", file_hash_hex(opt.dataset_path)}};
  if (!opt.index_path.empty()) m["index"] = opt.index_path;
  m["fixtures"] = {{"replay", opt.replay_dir}, {"record", opt.record_dir}};
  m["seed"] = opt.seed;
  m["started_at"] = started;
  m["finished_at"] = finished;
  m["aggregates"] = {{"em_or_accuracy", agg.em_or_accuracy},
                     {"auc", agg.auc},
                     {"edit_fraction", agg.edit_fraction},
                     {"total_cost_usd", agg.total_cost_usd}};
  std::ofstream out(fs::path(opt.out_dir) / "manifest.json");
  out << m.dump(2) << "\n";
}

void print_aggregates(const std::string& label, const Aggregates& agg, std::size_t count) {
  std::cout << label << ": instances=" << count
            << " em_or_accuracy=" << format_metric(agg.em_or_accuracy)
            << " auc=" << format_metric(agg.auc)
            << " edit_fraction=" << format_metric(agg.edit_fraction)
            << " cost_usd=" << format_metric(agg.total_cost_usd) << "\n";
}

Aggregates emit_run_artifacts(const RunOptions& opt, const std::string& command,
                              const std::vector<PipelineTrace>& traces, bool fever,
                              const std::string& started) {
  fs::create_directories(opt.out_dir);
  std::vector<EvalRow> rows = eval_rows(traces, fever);
  Aggregates agg = aggregate(rows, opt.cost_model);
  write_traces_jsonl((fs::path(opt.out_dir) / "traces.jsonl").string(), traces);
  write_results_jsonl((fs::path(opt.out_dir) / "results.jsonl").string(), rows);
  write_manifest(opt, command, agg, started, iso_timestamp());
  print_aggregates(command, agg, traces.size());
  return agg;
}

int cmd_run(RunOptions& opt) {
  const std::string started = iso_timestamp();
  DatasetFormat format = dataset_format_from_string(opt.task);
  std::vector<Instance> instances = load_dataset(opt.dataset_path, format, opt.index_path);

  Session session;
  build_backend(opt, session);
  build_retriever(opt, session);
  PromptLibrary prompts(opt.prompts_dir);
  Pipeline pipeline(*session.backend, session.retriever_factory, prompts,
                    pipeline_config(opt, format));
  std::vector<PipelineTrace> traces = pipeline.run_batch(instances, opt.parallel);
  emit_run_artifacts(opt, "run", traces, format == DatasetFormat::fever, started);
  save_recordings(opt, session);
  return 0;
}

// Standard and CoT baselines call the backend directly: a single greedy
// completion, confidence = exp(mean token logprob).
PipelineTrace baseline_trace(Backend& backend, const PromptLibrary& prompts,
                             const Instance& inst, const RunOptions& opt,
                             bool chain_of_thought) {
  PipelineTrace trace;
  trace.id = inst.id;
  trace.task = inst.task;
  trace.question = inst.question;
  trace.gold = inst.gold;

  const PromptTemplate& tmpl =
      prompts.get(inst.task, chain_of_thought ? PromptKind::cot : PromptKind::standard);
  CompletionRequest req;
  req.prompt = render(tmpl, {{inst.is_fever() ? "claim" : "question", inst.question}});
  req.n_samples = 1;
  req.temperature = 0.0;
  req.max_tokens = opt.max_tokens;
  req.stop_sequences = opt.stop_sequences;

  CompletionBatch batch = backend.complete(req);
  trace.usage += batch.usage;
  trace.backend_calls = 1;
  const Completion& c = batch.completions.front();
  trace.raw_sample_texts.push_back(c.text);

  if (chain_of_thought) {
    Rationale r = parse_cot(c.text, inst.is_fever());
    ReasoningPath path;
    path.rationale = r;
    path.answer = r.answer;
    path.total_logprob = c.total_logprob;
    path.has_logprobs = c.has_logprobs();
    trace.samples.paths.push_back(std::move(path));
    trace.report = score(trace.samples);
    trace.final_answer = r.answer;
  } else {
    std::string answer = c.text;
    std::size_t nl = answer.find('\n');
    if (nl != std::string::npos) answer.resize(nl);
    answer = text::strip_terminal_punct(answer);
    if (answer.empty()) throw InstanceFailed("empty standard-prompt completion");
    trace.final_answer = answer;
  }
  trace.confidence =
      c.has_logprobs()
          ? std::exp(c.total_logprob / static_cast<double>(c.token_logprobs.size()))
          : 1.0;
  return trace;
}

int cmd_baseline(RunOptions& opt, const std::string& mode) {
  const std::string started = iso_timestamp();
  DatasetFormat format = dataset_format_from_string(opt.task);
  std::vector<Instance> instances = load_dataset(opt.dataset_path, format, opt.index_path);

  Session session;
  build_backend(opt, session);
  PromptLibrary prompts(opt.prompts_dir);

  std::vector<PipelineTrace> traces;
  if (mode == "cot-sc") {
    // CoT-SC is the pipeline with the gate disabled (threshold 0 edits nothing).
    RunOptions sc = opt;
    sc.threshold = 0.0;
    session.retriever_factory = [](const Instance&) -> std::shared_ptr<Retriever> {
      return nullptr;  // never consulted: threshold 0 never edits
    };
    Pipeline pipeline(*session.backend, session.retriever_factory, prompts,
                      pipeline_config(sc, format));
    traces = pipeline.run_batch(instances, opt.parallel);
  } else {
    const bool chain_of_thought = mode == "cot";
    for (const auto& inst : instances) {
      try {
        traces.push_back(baseline_trace(*session.backend, prompts, inst, opt,
                                        chain_of_thought));
      } catch (const std::runtime_error& e) {
        PipelineTrace failed;
        failed.id = inst.id;
        failed.task = inst.task;
        failed.question = inst.question;
        failed.gold = inst.gold;
        failed.failed = true;
        failed.error = e.what();
        traces.push_back(std::move(failed));
      }
    }
  }
  emit_run_artifacts(opt, "baseline-" + mode, traces, format == DatasetFormat::fever,
                     started);
  save_recordings(opt, session);
  return 0;
}

int cmd_ablate(RunOptions& opt, std::vector<double>& thresholds) {
  const std::string started = iso_timestamp();
  DatasetFormat format = dataset_format_from_string(opt.task);
  std::vector<Instance> instances = load_dataset(opt.dataset_path, format, opt.index_path);
  if (thresholds.empty()) {
    for (double t = 0.0; t <= opt.n + 1e-9; t += 0.5) thresholds.push_back(t);
  }

  Session session;
  build_backend(opt, session);
  build_retriever(opt, session);
  PromptLibrary prompts(opt.prompts_dir);
  Pipeline pipeline(*session.backend, session.retriever_factory, prompts,
                    pipeline_config(opt, format));

  std::vector<AblationRun> runs = ablate_threshold(pipeline, instances, thresholds, opt.parallel);
  std::vector<AblationMetricsRow> metrics =
      ablation_metrics(runs, format == DatasetFormat::fever, opt.cost_model);
  fs::create_directories(opt.out_dir);
  write_ablation_csv((fs::path(opt.out_dir) / "ablation.csv").string(), metrics);
  Aggregates base = aggregate(eval_rows(runs.front().traces, format == DatasetFormat::fever),
                              opt.cost_model);
  write_manifest(opt, "ablate", base, started, iso_timestamp());
  for (const auto& row : metrics) {
    std::cout << "threshold=" << format_metric(row.threshold)
              << " em_or_accuracy=" << format_metric(row.em_or_accuracy)
              << " auc=" << format_metric(row.auc)
              << " edit_fraction=" << format_metric(row.edit_fraction) << "\n";
  }
  save_recordings(opt, session);
  return 0;
}

int cmd_density(const std::string& results_path, const std::string& out_path, int n) {
  std::vector<EvalRow> rows = read_results_jsonl(results_path);
  if (n <= 0) {
    for (const auto& row : rows) n = std::max(n, row.n);
    if (n <= 0) n = 5;
  }
  write_density_csv(out_path, consistency_density(rows, n));
  std::cout << "density: " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

int cmd_subsample(const std::string& results_path, const std::string& out_path, int target,
                  std::uint64_t seed) {
  std::vector<EvalRow> rows = read_results_jsonl(results_path);
  std::vector<std::string> ids = balanced_subsample(rows, target, seed);
  write_id_list(out_path, ids);
  std::cout << "subsample: " << ids.size() << " ids -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verify-and-edit chain-of-thought pipeline"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "run the verify-and-edit pipeline");
  add_run_flags(run, run_opt);

  RunOptions base_opt;
  std::string baseline_mode = "cot-sc";
  CLI::App* baseline = app.add_subcommand("baseline", "run a baseline");
  baseline->add_option("--mode", baseline_mode, "standard | cot | cot-sc")->required();
  add_run_flags(baseline, base_opt);

  RunOptions ablate_opt;
  std::vector<double> thresholds;
  CLI::App* ablate = app.add_subcommand("ablate", "sweep the consistency threshold");
  ablate->add_option("--thresholds", thresholds, "explicit threshold list");
  add_run_flags(ablate, ablate_opt);

  std::string density_results, density_out = "density.csv";
  int density_n = 0;
  CLI::App* density = app.add_subcommand("density", "export consistency histogram data");
  density->add_option("--results", density_results, "results.jsonl from a run")->required();
  density->add_option("--out", density_out, "output CSV path");
  density->add_option("--n", density_n, "sampled paths per instance (0 = infer)");

  std::string sub_results, sub_out = "subsample_ids.txt";
  int sub_target = 1000;
  std::uint64_t sub_seed = 0;
  CLI::App* subsample =
      app.add_subcommand("subsample", "balanced challenge-set construction");
  subsample->add_option("--results", sub_results, "baseline results.jsonl")->required();
  subsample->add_option("--target", sub_target, "total ids to draw");
  subsample->add_option("--seed", sub_seed, "sampling seed");
  subsample->add_option("--out", sub_out, "output id list path");

  CLI::App* fixtures = app.add_subcommand("fixtures", "record or replay fixture packs");
  RunOptions fix_opt;
  CLI::App* fix_record = fixtures->add_subcommand("record", "run live and record fixtures");
  add_run_flags(fix_record, fix_opt);
  RunOptions fix_replay_opt;
  CLI::App* fix_replay = fixtures->add_subcommand("replay", "run from recorded fixtures");
  add_run_flags(fix_replay, fix_replay_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_config_file(run_opt, run);
      return cmd_run(run_opt);
    }
    if (baseline->parsed()) {
      apply_config_file(base_opt, baseline);
      if (baseline_mode != "standard" && baseline_mode != "cot" && baseline_mode != "cot-sc") {
        throw ConfigError("unknown baseline mode: " + baseline_mode);
      }
      return cmd_baseline(base_opt, baseline_mode);
    }
    if (ablate->parsed()) {
      apply_config_file(ablate_opt, ablate);
      return cmd_ablate(ablate_opt, thresholds);
    }
    if (density->parsed()) return cmd_density(density_results, density_out, density_n);
    if (subsample->parsed()) {
      return cmd_subsample(sub_results, sub_out, sub_target, sub_seed);
    }
    if (fixtures->parsed()) {
      if (fix_record->parsed()) {
        apply_config_file(fix_opt, fix_record);
        if (fix_opt.record_dir.empty()) throw ConfigError("fixtures record needs --record DIR");
        return cmd_run(fix_opt);
      }
      if (fix_replay->parsed()) {
        apply_config_file(fix_replay_opt, fix_replay);
        if (fix_replay_opt.replay_dir.empty()) {
          throw ConfigError("fixtures replay needs --replay DIR");
        }
        return cmd_run(fix_replay_opt);
      }
      throw ConfigError("fixtures needs a record or replay subcommand");
    }
  } catch (const BackendUnreachable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const QuotaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
