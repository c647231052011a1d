#pragma once

// Darknet-style configuration text: optional [section] headers followed by
// key=value lines, with '#' or ';' comments.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace maskpipe {

struct ConfigEntry {
  std::string key;  // normalized
  std::string value;
  int line = 0;

  /// Line numbers are not part of the value.
  friend bool operator==(const ConfigEntry& a, const ConfigEntry& b) {
    return a.key == b.key && a.value == b.value;
  }
};

struct ConfigSection {
  std::string name;  // empty for entries before the first header
  int line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(std::string_view key) const;

  friend bool operator==(const ConfigSection& a, const ConfigSection& b) {
    return a.name == b.name && a.entries == b.entries;
  }
};

/// Lowercases, trims, and turns runs of inner whitespace into one underscore,
/// so "Burn In" becomes "burn_in".
std::string normalize_key(std::string_view key);

/// Throws ParseError naming the line for a line that is neither a header,
/// a comment, nor key=value.
std::vector<ConfigSection> parse_sections(std::string_view text);

long parse_int(const ConfigEntry& e);
std::uint64_t parse_uint(const ConfigEntry& e);
double parse_real(const ConfigEntry& e);
std::vector<long> parse_int_list(const ConfigEntry& e);
std::vector<double> parse_real_list(const ConfigEntry& e);
bool parse_flag(const ConfigEntry& e);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

/// Writes sections back out, one "key=value" per line, blank line between
/// sections.
std::string serialize_sections(const std::vector<ConfigSection>& sections);

}  // namespace maskpipe
