#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mardp::text {

std::string trim(std::string_view s);
/// Splits on commas and trims each field. No quoting support.
std::vector<std::string> split_csv(std::string_view line);
/// Non-blank, non-comment lines of a text file. Throws DataError if unreadable.
std::vector<std::string> read_lines(const std::filesystem::path& path);
double parse_double(const std::string& field, std::string_view what);
long long parse_int(const std::string& field, std::string_view what);
/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

}  // namespace mardp::text
