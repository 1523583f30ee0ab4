#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace glossdom::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<double> parse_double_list(std::string_view s);
std::vector<int> parse_int_list(std::string_view s);

// Number of non-overlapping occurrences of needle in haystack.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

// Replaces the first occurrence of placeholder; returns false if absent.
bool replace_first(std::string& s, std::string_view placeholder, std::string_view value);

}  // namespace glossdom::text
