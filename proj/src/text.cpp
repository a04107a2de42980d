#include "vecot/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace vecot::text {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> kAbbrev = {
      "mr", "mrs", "ms", "dr", "prof", "st", "no", "vs", "etc",
      "jr", "sr", "inc", "ltd", "co", "fig", "al", "approx"};
  return kAbbrev;
}

// Token immediately preceding position `pos` (exclusive), without punctuation.
std::string token_before(const std::string& s, std::size_t pos) {
  std::size_t end = pos;
  std::size_t begin = end;
  while (begin > 0 && !is_space(s[begin - 1])) --begin;
  std::string tok = s.substr(begin, end - begin);
  while (!tok.empty() && !std::isalnum(static_cast<unsigned char>(tok.back()))) tok.pop_back();
  return tok;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : s) {
    if (is_space(c)) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out += ' ';
    in_ws = false;
    out += c;
  }
  return out;
}

std::string strip_terminal_punct(std::string_view s) {
  std::string out = trim(s);
  while (!out.empty()) {
    char c = out.back();
    if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
      out.pop_back();
    } else {
      break;
    }
  }
  return trim(out);
}

std::vector<std::string> split_sentences(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
    cur.clear();
  };

  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (c == '\n') {
      flush();
      ++i;
      continue;
    }
    cur += c;
    if (is_terminator(c)) {
      std::size_t j = i + 1;
      while (j < n && is_terminator(s[j])) {
        cur += s[j];
        ++j;
      }
      bool at_end = j >= n;
      bool boundary = at_end || s[j] == ' ' || s[j] == '\n' || s[j] == '\t' || s[j] == '\r';
      if (boundary && c == '.' && j == i + 1) {
        std::string tok = token_before(s, i);
        bool initial = tok.size() == 1 && std::isupper(static_cast<unsigned char>(tok[0]));
        if (initial || abbreviations().count(lowercase(tok)) > 0) boundary = false;
      }
      if (boundary) {
        flush();
        i = j;
        while (i < n && s[i] == ' ') ++i;
        continue;
      }
      i = j;
      continue;
    }
    ++i;
  }
  flush();
  return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

long approx_token_count(std::string_view s) {
  long count = 0;
  bool in_tok = false;
  for (char c : s) {
    if (is_space(c)) {
      in_tok = false;
    } else if (!in_tok) {
      in_tok = true;
      ++count;
    }
  }
  return count;
}

}  // namespace vecot::text
