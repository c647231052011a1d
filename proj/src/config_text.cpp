#include "maskpipe/config_text.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "maskpipe/errors.hpp"

namespace maskpipe {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const ConfigEntry& e, const char* expected) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + "=" + e.value +
                    " is not " + expected);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && end == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto comma = s.find(',');
    parts.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return parts;
}

}  // namespace

const ConfigEntry* ConfigSection::find(std::string_view key) const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->key == key) return &*it;
  }
  return nullptr;
}

std::string normalize_key(std::string_view key) {
  key = trim(key);
  std::string out;
  bool gap = false;
  for (char c : key) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      gap = true;
      continue;
    }
    if (gap) out.push_back('_');
    gap = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<ConfigSection> parse_sections(std::string_view text) {
  std::vector<ConfigSection> sections;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;

    const auto comment = line.find_first_of("#;");
    line = trim(line.substr(0, comment));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed section header");
      }
      sections.push_back({normalize_key(line.substr(1, line.size() - 2)), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || normalize_key(line.substr(0, eq)).empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
    }
    if (sections.empty()) sections.push_back({"", line_no, {}});
    sections.back().entries.push_back(
        {normalize_key(line.substr(0, eq)), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return sections;
}

long parse_int(const ConfigEntry& e) {
  long v = 0;
  if (!parse_number(e.value, v)) bad_value(e, "an integer");
  return v;
}

std::uint64_t parse_uint(const ConfigEntry& e) {
  std::uint64_t v = 0;
  if (!parse_number(e.value, v)) bad_value(e, "a non-negative integer");
  return v;
}

double parse_real(const ConfigEntry& e) {
  double v = 0;
  if (!parse_number(e.value, v) || !std::isfinite(v)) bad_value(e, "a finite number");
  return v;
}

std::vector<long> parse_int_list(const ConfigEntry& e) {
  std::vector<long> out;
  if (trim(e.value).empty()) return out;
  for (auto part : split_commas(e.value)) {
    long v = 0;
    if (!parse_number(part, v)) bad_value(e, "a list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_real_list(const ConfigEntry& e) {
  std::vector<double> out;
  if (trim(e.value).empty()) return out;
  for (auto part : split_commas(e.value)) {
    double v = 0;
    if (!parse_number(part, v) || !std::isfinite(v)) bad_value(e, "a list of numbers");
    out.push_back(v);
  }
  return out;
}

bool parse_flag(const ConfigEntry& e) {
  const std::string v = normalize_key(e.value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(e, "a flag");
}

std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string serialize_sections(const std::vector<ConfigSection>& sections) {
  std::string out;
  for (const auto& s : sections) {
    if (!out.empty()) out += "\n";
    if (!s.name.empty()) out += "[" + s.name + "]\n";
    for (const auto& e : s.entries) out += e.key + "=" + e.value + "\n";
  }
  return out;
}

}  // namespace maskpipe
