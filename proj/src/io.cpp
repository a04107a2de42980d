#include "vecot/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vecot {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json usage_to_json(const TokenUsage& u) {
  ordered_json j;
  j["prompt_tokens"] = u.prompt_tokens;
  j["completion_tokens"] = u.completion_tokens;
  return j;
}

ordered_json evidence_to_json(const EvidenceSet& ev) {
  ordered_json j;
  j["query"] = ev.query;
  j["k"] = ev.k;
  j["passages"] = ordered_json::array();
  for (const auto& p : ev.passages) {
    ordered_json jp;
    jp["source"] = p.source;
    jp["title"] = p.title;
    jp["text"] = p.text;
    jp["rank"] = p.rank;
    j["passages"].push_back(std::move(jp));
  }
  j["top_sentences"] = ordered_json::array();
  for (const auto& rs : ev.top_sentences) {
    ordered_json js;
    js["sentence"] = rs.sentence;
    js["score"] = rs.score;
    j["top_sentences"].push_back(std::move(js));
  }
  return j;
}

}  // namespace

ordered_json trace_to_json(const PipelineTrace& trace) {
  ordered_json j;
  j["id"] = trace.id;
  j["task"] = trace.task;
  j["question"] = trace.question;
  j["gold"] = trace.gold;
  j["failed"] = trace.failed;
  if (trace.failed) {
    j["error"] = trace.error;
    return j;
  }

  j["samples"] = ordered_json::array();
  for (const auto& p : trace.samples.paths) {
    ordered_json jp;
    jp["sentences"] = p.rationale.sentences;
    jp["answer_sentence"] = p.rationale.answer_sentence;
    jp["answer"] = p.answer;
    jp["total_logprob"] = p.total_logprob;
    jp["has_logprobs"] = p.has_logprobs;
    j["samples"].push_back(std::move(jp));
  }
  j["raw_sample_texts"] = trace.raw_sample_texts;

  ordered_json jr;
  jr["n"] = trace.report.n;
  jr["top_answer"] = trace.report.top_answer;
  jr["top_group"] = trace.report.top_group_key;
  jr["top_path_index"] = trace.report.top_path_index;
  jr["majority_score"] = trace.report.majority_score;
  jr["weighted_score"] = trace.report.weighted_score;
  jr["groups"] = ordered_json::object();
  for (const auto& [key, g] : trace.report.groups) {
    ordered_json jg;
    jg["count"] = g.count;
    jg["weight"] = g.weight;
    jg["members"] = g.members;
    jr["groups"][key] = std::move(jg);
  }
  j["report"] = std::move(jr);

  j["edited"] = trace.edited;
  j["steps"] = ordered_json::array();
  for (const auto& step : trace.steps) {
    ordered_json js;
    js["original_sentence"] = step.original_sentence;
    js["verifying_question"] = step.verifying_question;
    js["evidence"] = evidence_to_json(step.evidence);
    js["verified_statement"] = step.verified_statement;
    js["fallback"] = step.fallback;
    j["steps"].push_back(std::move(js));
  }
  j["edited_rationale"] = trace.edited_rationale;
  j["final_answer"] = trace.final_answer;
  j["confidence"] = trace.confidence;
  j["usage"] = usage_to_json(trace.usage);
  j["backend_calls"] = trace.backend_calls;
  j["retrieval_calls"] = trace.retrieval_calls;
  return j;
}

ordered_json eval_row_to_json(const EvalRow& row) {
  ordered_json j;
  j["id"] = row.id;
  j["predicted"] = row.predicted;
  j["gold"] = row.gold;
  j["correct"] = row.correct;
  j["confidence"] = row.confidence;
  j["edited"] = row.edited;
  j["weighted_score"] = row.weighted_score;
  j["n"] = row.n;
  j["prompt_tokens"] = row.usage.prompt_tokens;
  j["completion_tokens"] = row.usage.completion_tokens;
  j["failed"] = row.failed;
  return j;
}

EvalRow eval_row_from_json(const ordered_json& j) {
  EvalRow row;
  row.id = j.at("id").get<std::string>();
  row.predicted = j.value("predicted", "");
  row.gold = j.value("gold", "");
  row.correct = j.value("correct", false);
  row.confidence = j.value("confidence", 0.0);
  row.edited = j.value("edited", false);
  row.weighted_score = j.value("weighted_score", 0.0);
  row.n = j.value("n", 0);
  row.usage.prompt_tokens = j.value("prompt_tokens", 0L);
  row.usage.completion_tokens = j.value("completion_tokens", 0L);
  row.failed = j.value("failed", false);
  return row;
}

void write_traces_jsonl(const std::string& path, const std::vector<PipelineTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write traces file: " + path);
  for (const auto& t : traces) out << trace_to_json(t).dump() << "\n";
}

void write_results_jsonl(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write results file: " + path);
  for (const auto& row : rows) out << eval_row_to_json(row).dump() << "\n";
}

std::vector<EvalRow> read_results_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open results file: " + path);
  std::vector<EvalRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(eval_row_from_json(ordered_json::parse(line)));
    } catch (const ordered_json::exception& e) {
      throw SchemaError(std::string("invalid results row: ") + e.what(), lineno);
    }
  }
  return rows;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_density_csv(const std::string& path, const std::vector<DensityBin>& bins) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write density CSV: " + path);
  out << "bin_low,bin_high,correct_count,incorrect_count\n";
  for (const auto& b : bins) {
    out << format_metric(b.bin_low) << "," << format_metric(b.bin_high) << ","
        << b.correct_count << "," << b.incorrect_count << "\n";
  }
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationMetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write ablation CSV: " + path);
  out << "threshold,em_or_accuracy,auc,edit_fraction\n";
  for (const auto& row : rows) {
    out << format_metric(row.threshold) << "," << format_metric(row.em_or_accuracy) << ","
        << format_metric(row.auc) << "," << format_metric(row.edit_fraction) << "\n";
  }
}

void write_id_list(const std::string& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write id list: " + path);
  for (const auto& id : ids) out << id << "\n";
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for hashing: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

}  // namespace vecot
