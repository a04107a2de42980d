#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vecot/errors.hpp"
#include "vecot/retrieval.hpp"

namespace vecot {

enum class DatasetFormat { hotpotqa_adv, twowikimultihop, fever };

DatasetFormat dataset_format_from_string(const std::string& s);
std::string to_string(DatasetFormat f);

/// Prompt task directory for a dataset format.
std::string task_for(DatasetFormat f);

struct Instance {
  std::string id;
  std::string task;
  std::string question;  // the claim, for Fever
  std::string gold;
  std::vector<Passage> paragraphs;  // supporting + distractor contexts

  bool is_fever() const { return task == "fever"; }
};

/**
 * Load a dataset file (JSON array or JSONL). hotpotqa_adv / 2wikimultihop rows
 * carry question/answer plus a HotpotQA-style context array of [title,
 * [sentences]] pairs; fever rows carry claim/label. Unknown fields are
 * ignored. An optional index file (newline-separated ids) selects and orders
 * instances.
 */
std::vector<Instance> load_dataset(const std::string& path, DatasetFormat format,
                                   const std::string& index_path = "");

}  // namespace vecot
