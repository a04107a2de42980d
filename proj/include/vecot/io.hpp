#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vecot/editor.hpp"
#include "vecot/evalharness.hpp"

namespace vecot {

/// Deterministic, timestamp-free JSON for one trace; replayed runs must
/// serialize byte-identically.
nlohmann::ordered_json trace_to_json(const PipelineTrace& trace);
nlohmann::ordered_json eval_row_to_json(const EvalRow& row);
EvalRow eval_row_from_json(const nlohmann::ordered_json& j);

void write_traces_jsonl(const std::string& path, const std::vector<PipelineTrace>& traces);
void write_results_jsonl(const std::string& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_results_jsonl(const std::string& path);

void write_density_csv(const std::string& path, const std::vector<DensityBin>& bins);
void write_ablation_csv(const std::string& path,
                        const std::vector<AblationMetricsRow>& rows);
void write_id_list(const std::string& path, const std::vector<std::string>& ids);

/// FNV-1a 64 hex digest of a file's bytes (manifest provenance).
std::string file_hash_hex(const std::string& path);

std::string format_metric(double v);  // stable %.6g formatting for CSV cells

}  // namespace vecot
