#include <tvp/csv.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tvp {

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(const std::string& text, std::size_t line, const std::string& column)
{
    std::string s = text;
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        std::ostringstream os;
        os << "line " << line << ", column '" << column << "': cannot parse '" << text << "' as a number";
        throw ValidationError(os.str());
    }
    return v;
}

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && (line.back() == ',')) out.emplace_back();
    return out;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin)
{
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size()) {
            std::ostringstream os;
            os << origin << ": line " << lineno << ": expected " << t.header.size() << " fields, found "
               << cells.size();
            throw ValidationError(os.str());
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw ValidationError(origin + ": empty file, no header row");
    return t;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path);
}

Index Panel::column(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<Index>(i);
    throw ValidationError("no column named '" + name + "'");
}

Panel panel_from_table(const CsvTable& table, const std::string& origin)
{
    Panel p;
    const bool dated = !table.header.empty() && lower(table.header.front()) == "date";
    const std::size_t first = dated ? 1 : 0;
    p.names.assign(table.header.begin() + static_cast<std::ptrdiff_t>(first), table.header.end());
    p.values.resize(static_cast<Index>(table.rows.size()), static_cast<Index>(p.names.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (dated) p.dates.push_back(table.rows[r][0]);
        for (std::size_t c = first; c < table.header.size(); ++c) {
            // Header is line 1; the first data row is line 2 (blank lines aside).
            const double v = parse_number(table.rows[r][c], r + 2, table.header[c]);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << origin << ": non-finite value at row " << r + 1 << ", column '" << table.header[c] << "'";
                throw ValidationError(os.str());
            }
            p.values(static_cast<Index>(r), static_cast<Index>(c - first)) = v;
        }
    }
    return p;
}

Panel read_panel(const std::string& path)
{
    return panel_from_table(read_csv(path), path);
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

std::string matrix_csv(const std::vector<std::string>& header, const Matrix& values,
                       const std::vector<std::string>& dates)
{
    if (static_cast<Index>(header.size()) != values.cols())
        throw DimensionError("matrix_csv: header length must equal column count");
    if (!dates.empty() && static_cast<Index>(dates.size()) != values.rows())
        throw DimensionError("matrix_csv: one date per row");
    std::string out;
    if (!dates.empty()) out += "date,";
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        if (!dates.empty()) {
            out += dates[static_cast<std::size_t>(r)];
            out += ',';
        }
        for (Index c = 0; c < values.cols(); ++c) {
            if (c) out += ',';
            out += format_number(values(r, c));
        }
        out += '\n';
    }
    return out;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
                      const std::vector<std::string>& dates)
{
    write_text(path, matrix_csv(header, values, dates));
}

} // namespace tvp
