#pragma once

#include <string>
#include <vector>

namespace selbench::csv {

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t cols() const { return header.size(); }
};

// Reads a UTF-8 CSV with a mandatory header row. Cells are split on commas
// (no quoting; the toolkit's schemas carry ids and numbers only) and trimmed.
// Every row must have the header's column count.
Table read(const std::string& path);

// Parses a numeric cell; errors name the file, 1-based data row, and column.
double parse_number(const Table& table, std::size_t row, std::size_t col);

// Shortest decimal form that round-trips the exact double ("%.17g").
std::string format_number(double v);

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

} // namespace selbench::csv
