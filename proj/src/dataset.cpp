#include "vecot/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vecot/text.hpp"

namespace vecot {

using json = nlohmann::json;

DatasetFormat dataset_format_from_string(const std::string& s) {
  if (s == "hotpotqa_adv" || s == "hotpotqa") return DatasetFormat::hotpotqa_adv;
  if (s == "2wikimultihop" || s == "2wiki") return DatasetFormat::twowikimultihop;
  if (s == "fever") return DatasetFormat::fever;
  throw ConfigError("unknown dataset format: " + s);
}

std::string to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::hotpotqa_adv: return "hotpotqa_adv";
    case DatasetFormat::twowikimultihop: return "2wikimultihop";
    case DatasetFormat::fever: return "fever";
  }
  return "hotpotqa_adv";
}

std::string task_for(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::hotpotqa_adv: return "hotpotqa";
    case DatasetFormat::twowikimultihop: return "2wikimultihop";
    case DatasetFormat::fever: return "fever";
  }
  return "hotpotqa";
}

namespace {

const std::vector<std::string> kFeverLabels = {"SUPPORTS", "REFUTES", "NOT ENOUGH INFO"};

std::vector<json> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset file: " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string body = ss.str();

  std::size_t first = body.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw SchemaError("empty dataset file: " + path, 0);

  std::vector<json> rows;
  if (body[first] == '[') {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::exception& e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), 0);
    }
    for (auto& row : doc) rows.push_back(std::move(row));
  } else {
    std::istringstream lines(body);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        rows.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid JSON line: ") + e.what(), lineno);
      }
    }
  }
  return rows;
}

std::string get_string(const json& row, std::initializer_list<const char*> keys,
                       std::size_t rowno, const char* what) {
  for (const char* key : keys) {
    if (row.contains(key) && row[key].is_string()) return row[key].get<std::string>();
  }
  throw SchemaError(std::string("row missing ") + what, rowno);
}

std::vector<Passage> parse_context(const json& row, std::size_t rowno) {
  std::vector<Passage> out;
  if (!row.contains("context")) return out;
  const json& ctx = row["context"];
  if (!ctx.is_array()) throw SchemaError("context is not an array", rowno);
  for (const auto& pair : ctx) {
    Passage p;
    p.source = "dataset";
    p.rank = static_cast<int>(out.size());
    if (pair.is_array() && pair.size() == 2 && pair[1].is_array()) {
      p.title = pair[0].is_string() ? pair[0].get<std::string>() : "";
      std::string body;
      for (const auto& sent : pair[1]) {
        if (!sent.is_string()) continue;
        std::string s = text::trim(sent.get<std::string>());
        if (s.empty()) continue;
        if (!body.empty()) body += ' ';
        body += s;
      }
      p.text = body;
    } else if (pair.is_object() && pair.contains("text")) {
      p.title = pair.value("title", "");
      p.text = pair["text"].get<std::string>();
    } else {
      throw SchemaError("context entry is neither [title, [sentences]] nor {title, text}",
                        rowno);
    }
    if (!p.text.empty()) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<Instance> load_dataset(const std::string& path, DatasetFormat format,
                                   const std::string& index_path) {
  std::vector<json> rows = read_rows(path);
  std::vector<Instance> instances;
  instances.reserve(rows.size());

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    const std::size_t rowno = i + 1;
    if (!row.is_object()) throw SchemaError("row is not an object", rowno);

    Instance inst;
    inst.task = task_for(format);
    if (row.contains("id") && row["id"].is_number_integer()) {
      inst.id = std::to_string(row["id"].get<long>());
    } else if (row.contains("_id") || row.contains("id")) {
      inst.id = row.contains("_id") ? row["_id"].get<std::string>()
                                    : row["id"].get<std::string>();
    } else {
      inst.id = std::to_string(rowno);
    }

    if (format == DatasetFormat::fever) {
      inst.question = get_string(row, {"claim", "question"}, rowno, "claim");
      inst.gold = get_string(row, {"label", "answer", "gold"}, rowno, "gold label");
      std::string upper = inst.gold;
      std::transform(upper.begin(), upper.end(), upper.begin(),
                     [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      if (std::find(kFeverLabels.begin(), kFeverLabels.end(), upper) == kFeverLabels.end()) {
        throw SchemaError("invalid Fever label: " + inst.gold, rowno);
      }
      inst.gold = upper;
    } else {
      inst.question = get_string(row, {"question"}, rowno, "question");
      inst.gold = get_string(row, {"answer", "gold"}, rowno, "gold answer");
      inst.paragraphs = parse_context(row, rowno);
    }
    if (inst.gold.empty()) throw SchemaError("empty gold answer", rowno);
    instances.push_back(std::move(inst));
  }

  if (!index_path.empty()) {
    std::ifstream idx(index_path);
    if (!idx) throw SchemaError("cannot open index file: " + index_path, 0);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < instances.size(); ++i) by_id[instances[i].id] = i;
    std::vector<Instance> selected;
    std::string id;
    while (std::getline(idx, id)) {
      id = text::trim(id);
      if (id.empty()) continue;
      auto it = by_id.find(id);
      if (it == by_id.end()) throw SchemaError("index id not in dataset: " + id, 0);
      selected.push_back(instances[it->second]);
    }
    return selected;
  }
  return instances;
}

}  // namespace vecot
