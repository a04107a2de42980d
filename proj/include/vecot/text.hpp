#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vecot::text {

std::string trim(std::string_view s);
std::string lowercase(std::string_view s);
std::string collapse_whitespace(std::string_view s);

/// Strip trailing sentence punctuation (. , ! ? ; :) and surrounding whitespace.
std::string strip_terminal_punct(std::string_view s);

/**
 * Split prose into sentences on ". " / "? " / "! " boundaries (and newlines).
 * Periods after known abbreviations or single-letter initials ("S. Hanumantha
 * Rao") do not end a sentence. Runs of terminators ("City..") stay with the
 * sentence they close.
 */
std::vector<std::string> split_sentences(const std::string& s);

/// Lowercased alphanumeric word tokens ("John's 2nd" -> {"john", "s", "2nd"}).
std::vector<std::string> word_tokens(std::string_view s);

/// Rough whitespace-based token count, used only when an endpoint or fixture
/// does not report usage.
long approx_token_count(std::string_view s);

}  // namespace vecot::text
