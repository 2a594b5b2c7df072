#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rockcluster {

// All CSV files use UTF-8, ',' separators, '.' decimals and LF line endings.
// Fields are written unquoted; writers reject field values containing
// separators so that files stay byte-stable and trivially parseable.

// Shortest decimal string that round-trips the exact double value.
std::string format_double(double value);

// Strict full-string parse; fails on trailing characters or empty input.
double parse_double(std::string_view text, bool& ok);
double parse_double_or_fail(std::string_view text, const std::string& context);

std::vector<std::string> split_csv_line(const std::string& line);

void append_csv_field(std::string& line, std::string_view field);
std::string join_csv_row(const std::vector<std::string>& fields);

// Reads one LF- or EOF-terminated line; strips a trailing CR. Returns false
// at end of stream.
bool read_csv_line(std::istream& in, std::string& line);

}  // namespace rockcluster
