#include "selbench/csv.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "selbench/errors.hpp"

namespace selbench::csv {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

std::string strip_bom(std::string s) {
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF &&
        static_cast<unsigned char>(s[1]) == 0xBB &&
        static_cast<unsigned char>(s[2]) == 0xBF) {
        s.erase(0, 3);
    }
    return s;
}

} // namespace

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);

    Table table;
    table.path = path;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            table.header = split_line(strip_bom(line));
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw ValidationError(path + ": row " + std::to_string(table.rows.size() + 1) +
                                  " has " + std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (!have_header || table.header.empty() ||
        (table.header.size() == 1 && table.header[0].empty())) {
        throw ValidationError(path + ": missing header row");
    }
    return table;
}

double parse_number(const Table& table, std::size_t row, std::size_t col) {
    const std::string& cell = table.rows[row][col];
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (cell.empty() || end != begin + cell.size()) {
        throw ValidationError(table.path + ": non-numeric cell '" + cell + "' at row " +
                              std::to_string(row + 1) + ", column '" + table.header[col] + "'");
    }
    return v;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    std::ostringstream buf;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) buf << ',';
        buf << header[c];
    }
    buf << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) buf << ',';
            buf << row[c];
        }
        buf << '\n';
    }
    out << buf.str();
    if (!out) throw IoError("write failed: " + path);
}

} // namespace selbench::csv
