#pragma once

#include <map>
#include <string>
#include <vector>

#include "vecot/errors.hpp"

namespace vecot {

enum class PromptKind { standard, cot, verifying_question, verifying_answer };

std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& s);

/**
 * A few-shot template loaded from prompts/<task>/<kind>.txt. Placeholders are
 * written in braces: {question}, {claim}, {rationale_sentence}, {contexts},
 * {verifying_question}.
 */
struct PromptTemplate {
  std::string task;
  PromptKind kind = PromptKind::standard;
  std::string body;
  int shot_count = 0;
};

/// One parsed chain-of-thought: the reasoning sentences (answer clause
/// excluded) plus the extracted answer.
struct Rationale {
  std::vector<std::string> sentences;
  std::string answer_sentence;
  std::string answer;
};

class PromptLibrary {
 public:
  /// Loads every prompts/<task>/<kind>.txt under `dir`.
  explicit PromptLibrary(const std::string& dir);

  const PromptTemplate& get(const std::string& task, PromptKind kind) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

/// Substitute bindings into the template body. Every placeholder present in
/// the body must be bound; exemplar text is passed through byte-identical.
std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

/**
 * Parse a CoT completion: sentences split on terminal punctuation, the final
 * "The answer is X." clause yields the answer (trailing period stripped).
 * With `fever_labels` the answer must uppercase to SUPPORTS / REFUTES /
 * NOT ENOUGH INFO and is returned uppercased.
 */
Rationale parse_cot(const std::string& completion_text, bool fever_labels = false);

/// Join verified statements in original order, one terminally punctuated
/// sentence each. Lengths must match.
std::string compose_edited_rationale(const Rationale& original,
                                     const std::vector<std::string>& verified);

/// Placeholder names render() knows about.
const std::vector<std::string>& known_placeholders();

}  // namespace vecot
