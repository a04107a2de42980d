#include "vecot/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vecot/text.hpp"

namespace vecot {

namespace fs = std::filesystem;

std::string to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::standard: return "standard";
    case PromptKind::cot: return "cot";
    case PromptKind::verifying_question: return "verifying_question";
    case PromptKind::verifying_answer: return "verifying_answer";
  }
  return "standard";
}

PromptKind prompt_kind_from_string(const std::string& s) {
  if (s == "standard") return PromptKind::standard;
  if (s == "cot") return PromptKind::cot;
  if (s == "verifying_question") return PromptKind::verifying_question;
  if (s == "verifying_answer") return PromptKind::verifying_answer;
  throw UnknownTemplate("unknown prompt kind: " + s);
}

const std::vector<std::string>& known_placeholders() {
  static const std::vector<std::string> kNames = {
      "question", "claim", "rationale_sentence", "contexts", "verifying_question"};
  return kNames;
}

namespace {

int count_lines_with_prefix(const std::string& body, const std::vector<std::string>& prefixes) {
  int count = 0;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    for (const auto& p : prefixes) {
      if (line.rfind(p, 0) == 0) {
        ++count;
        break;
      }
    }
  }
  return count;
}

int infer_shot_count(PromptKind kind, const std::string& body) {
  // The final cue line carries the same label as the exemplars, hence -1.
  switch (kind) {
    case PromptKind::standard:
    case PromptKind::cot:
      return count_lines_with_prefix(body, {"A:"}) - 1;
    case PromptKind::verifying_question:
      return count_lines_with_prefix(body, {"Question:"}) - 1;
    case PromptKind::verifying_answer:
      return count_lines_with_prefix(body, {"A:", "Answer:"}) - 1;
  }
  return 0;
}

}  // namespace

PromptLibrary::PromptLibrary(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UnknownTemplate("prompt directory not found: " + dir);
  for (const auto& task_entry : fs::directory_iterator(dir)) {
    if (!task_entry.is_directory()) continue;
    const std::string task = task_entry.path().filename().string();
    for (const auto& file_entry : fs::directory_iterator(task_entry.path())) {
      if (file_entry.path().extension() != ".txt") continue;
      PromptTemplate tmpl;
      tmpl.task = task;
      tmpl.kind = prompt_kind_from_string(file_entry.path().stem().string());
      std::ifstream in(file_entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      tmpl.body = ss.str();
      tmpl.shot_count = infer_shot_count(tmpl.kind, tmpl.body);
      templates_[task + "/" + to_string(tmpl.kind)] = std::move(tmpl);
    }
  }
}

const PromptTemplate& PromptLibrary::get(const std::string& task, PromptKind kind) const {
  auto it = templates_.find(task + "/" + to_string(kind));
  if (it == templates_.end()) {
    throw UnknownTemplate("no template for " + task + "/" + to_string(kind));
  }
  return it->second;
}

std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings) {
  std::string out = tmpl.body;
  for (const auto& [name, value] : bindings) {
    const std::string token = "{" + name + "}";
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  for (const auto& name : known_placeholders()) {
    if (out.find("{" + name + "}") != std::string::npos) {
      throw MissingBinding("unbound placeholder {" + name + "} in " + tmpl.task + "/" +
                           to_string(tmpl.kind));
    }
  }
  return out;
}

namespace {

const std::string kAnswerCue = "the answer is";

// Case-insensitive find of the answer cue inside a sentence.
std::size_t find_answer_cue(const std::string& sentence) {
  const std::string lower = text::lowercase(sentence);
  return lower.find(kAnswerCue);
}

const std::vector<std::string>& fever_label_set() {
  static const std::vector<std::string> kLabels = {"SUPPORTS", "REFUTES", "NOT ENOUGH INFO"};
  return kLabels;
}

}  // namespace

Rationale parse_cot(const std::string& completion_text, bool fever_labels) {
  const std::vector<std::string> sentences = text::split_sentences(completion_text);

  // Scan from the end for the sentence carrying "The answer is ...".
  std::size_t answer_idx = sentences.size();
  std::size_t cue_pos = std::string::npos;
  for (std::size_t i = sentences.size(); i-- > 0;) {
    std::size_t p = find_answer_cue(sentences[i]);
    if (p != std::string::npos) {
      answer_idx = i;
      cue_pos = p;
      break;
    }
  }
  if (answer_idx == sentences.size()) {
    throw ParseFailure("no \"The answer is\" clause in completion");
  }

  Rationale r;
  r.answer_sentence = sentences[answer_idx];
  std::string raw = r.answer_sentence.substr(cue_pos + kAnswerCue.size());
  r.answer = text::strip_terminal_punct(raw);
  if (r.answer.empty()) throw ParseFailure("empty answer after \"The answer is\"");

  if (fever_labels) {
    std::string upper = r.answer;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const auto& labels = fever_label_set();
    if (std::find(labels.begin(), labels.end(), upper) == labels.end()) {
      throw ParseFailure("not a Fever label: " + r.answer);
    }
    r.answer = upper;
  }

  for (std::size_t i = 0; i < answer_idx; ++i) r.sentences.push_back(sentences[i]);
  return r;
}

std::string compose_edited_rationale(const Rationale& original,
                                     const std::vector<std::string>& verified) {
  if (verified.size() != original.sentences.size()) {
    throw LengthMismatch("verified statement count " + std::to_string(verified.size()) +
                         " != rationale sentence count " +
                         std::to_string(original.sentences.size()));
  }
  std::string out;
  for (const auto& v : verified) {
    std::string s = text::trim(v);
    if (s.empty()) continue;
    char last = s.back();
    if (last != '.' && last != '?' && last != '!') s += '.';
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

}  // namespace vecot
