#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hopgraph {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Case-insensitive match of `phrase` in `text` on word boundaries, so "man"
// does not match inside "woman". Empty phrases never match.
bool contains_phrase(std::string_view text, std::string_view phrase);

// Sentence segmentation on terminal punctuation (. ! ?) followed by
// whitespace, with an abbreviation guard ("Dr.", "e.g.", "Fig.", single-letter
// initials) and no split before a lowercase continuation. Blank lines also
// end a sentence. Returned sentences are trimmed and non-empty.
std::vector<std::string> split_sentences(std::string_view text);

// Words treated as non-terminal when followed by a period.
const std::vector<std::string>& abbreviation_guard();

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace hopgraph
