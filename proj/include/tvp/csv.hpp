#pragma once

#include <tvp/common.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tvp {

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);
double parse_number(const std::string& text, std::size_t line, const std::string& column);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Comma-separated with a header row; no quoting. Errors carry 1-based line numbers.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");

// Numeric panel: optional leading date column (header "date", any case),
// remaining columns numeric.
struct Panel {
    std::vector<std::string> dates;
    std::vector<std::string> names;
    Matrix values;
    Index column(const std::string& name) const;  // throws ValidationError when absent
};
Panel read_panel(const std::string& path);
Panel panel_from_table(const CsvTable& table, const std::string& origin);

void write_text(const std::string& path, const std::string& text);
// Writes a matrix with header; dates, when given, become the first column.
void write_matrix_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
                      const std::vector<std::string>& dates = {});
std::string matrix_csv(const std::vector<std::string>& header, const Matrix& values,
                       const std::vector<std::string>& dates = {});

} // namespace tvp
