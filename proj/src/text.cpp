#include "glossdom/text.hpp"

#include <cctype>
#include <charconv>
#include <string>

#include "glossdom/error.hpp"

namespace glossdom {

ParseError::ParseError(std::string source, std::size_t line, std::string field,
                       const std::string& what)
    : InputError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                 (field.empty() ? std::string() : " [" + field + "]") + ": " + what),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

namespace text {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<double> parse_double_list(std::string_view s) {
  std::vector<double> values;
  if (trim(s).empty()) return values;
  for (const auto& part : split(s, ',')) {
    const auto token = std::string(trim(part));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (token.empty() || used != token.size()) throw InputError("not a number: '" + token + "'");
    values.push_back(v);
  }
  return values;
}

std::vector<int> parse_int_list(std::string_view s) {
  std::vector<int> values;
  if (trim(s).empty()) return values;
  for (const auto& part : split(s, ',')) {
    const auto token = trim(part);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
      throw InputError("not an integer: '" + std::string(token) + "'");
    }
    values.push_back(v);
  }
  return values;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool replace_first(std::string& s, std::string_view placeholder, std::string_view value) {
  const auto pos = s.find(placeholder);
  if (pos == std::string::npos) return false;
  s.replace(pos, placeholder.size(), value);
  return true;
}

}  // namespace text
}  // namespace glossdom
