#include "rockcluster/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <system_error>

#include "rockcluster/common.hpp"

namespace rockcluster {

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text, bool& ok) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto result = std::from_chars(begin, end, value);
    ok = result.ec == std::errc() && result.ptr == end && !text.empty();
    return value;
}

double parse_double_or_fail(std::string_view text, const std::string& context) {
    bool ok = false;
    const double value = parse_double(text, ok);
    if (!ok) fail(context + ": not a number: '" + std::string(text) + "'");
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

void append_csv_field(std::string& line, std::string_view field) {
    if (field.find_first_of(",\"\n\r") != std::string_view::npos)
        fail("csv field contains a separator or quote: '" + std::string(field) + "'");
    line.append(field);
}

std::string join_csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line.push_back(',');
        append_csv_field(line, fields[i]);
    }
    line.push_back('\n');
    return line;
}

bool read_csv_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace rockcluster
