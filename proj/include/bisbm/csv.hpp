#ifndef BISBM_CSV_HPP
#define BISBM_CSV_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "bisbm/model.hpp"

namespace bisbm {

enum class MatrixKind { z, adjacency, abundance };

/// Abundance file contents: header row of feature names, first column of
/// sample identifiers.
struct AbundanceTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_names;
    Matrix values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_cell(const std::string& cell, int row, int col) {
    double value;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("malformed cell at row " + std::to_string(row + 1) + ", column " +
                         std::to_string(col + 1) + ": '" + cell + "'");
    return value;
}

// shortest decimal that round-trips to the same double
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line != "\r") lines.push_back(line);
    if (lines.empty()) throw ParseError("empty file: " + path);
    return lines;
}

}  // namespace detail

/// Parse a comma-delimited numeric matrix and enforce the kind invariants:
/// finite for z, {0,1} for adjacency, nonnegative for abundance (whose
/// header row and ID column are stripped here; use read_abundance to keep
/// the names).
inline Matrix read_matrix(const std::string& path, MatrixKind kind) {
    const std::vector<std::string> lines = detail::read_lines(path);
    const int first_data = kind == MatrixKind::abundance ? 1 : 0;
    const int skip_cols = kind == MatrixKind::abundance ? 1 : 0;
    if (static_cast<int>(lines.size()) <= first_data) throw ParseError("no data rows in " + path);

    std::vector<std::vector<double>> rows;
    for (std::size_t r = static_cast<std::size_t>(first_data); r < lines.size(); ++r) {
        const std::vector<std::string> cells = detail::split_csv_line(lines[r]);
        if (static_cast<int>(cells.size()) <= skip_cols)
            throw ParseError("row " + std::to_string(r + 1) + " has no data cells");
        std::vector<double> row;
        for (std::size_t c = static_cast<std::size_t>(skip_cols); c < cells.size(); ++c)
            row.push_back(detail::parse_cell(cells[c], static_cast<int>(r), static_cast<int>(c)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row " + std::to_string(r + 1) + " has inconsistent width");
        rows.push_back(std::move(row));
    }

    Matrix out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) {
            const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            switch (kind) {
                case MatrixKind::z:
                    if (!std::isfinite(v))
                        throw ValidationError("non-finite z value at row " + std::to_string(i + 1) +
                                              ", column " + std::to_string(j + 1));
                    break;
                case MatrixKind::adjacency:
                    if (v != 0.0 && v != 1.0)
                        throw ValidationError("adjacency entry not 0/1 at row " + std::to_string(i + 1) +
                                              ", column " + std::to_string(j + 1));
                    break;
                case MatrixKind::abundance:
                    if (!std::isfinite(v) || v < 0.0)
                        throw ValidationError("abundance entry negative or non-finite at row " +
                                              std::to_string(i + 1) + ", column " + std::to_string(j + 1));
                    break;
            }
            out(i, j) = v;
        }
    return out;
}

/// Abundance file with its header and sample IDs preserved.
inline AbundanceTable read_abundance(const std::string& path) {
    const std::vector<std::string> lines = detail::read_lines(path);
    if (lines.size() < 2) throw ParseError("abundance file needs a header and data rows: " + path);

    AbundanceTable table;
    const std::vector<std::string> header = detail::split_csv_line(lines[0]);
    if (header.size() < 2) throw ParseError("abundance header needs an ID column plus features");
    table.feature_names.assign(header.begin() + 1, header.end());

    table.values = read_matrix(path, MatrixKind::abundance);
    for (std::size_t r = 1; r < lines.size(); ++r)
        table.sample_ids.push_back(detail::split_csv_line(lines[r]).front());
    if (table.values.cols() != static_cast<int>(table.feature_names.size()))
        throw ParseError("abundance header width does not match data rows");
    return table;
}

inline void write_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << '\n';
    }
}

inline void write_adjacency(const std::string& path, const IntMatrix& a) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            if (j) out << ',';
            out << a(i, j);
        }
        out << '\n';
    }
}

/// One 1-based label per line.
inline void write_labels(const std::string& path, const MembershipVector& m) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    for (int v : m.labels) out << v << '\n';
}

inline std::vector<int> read_labels(const std::string& path) {
    const std::vector<std::string> lines = detail::read_lines(path);
    std::vector<int> labels;
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const double v = detail::parse_cell(detail::split_csv_line(lines[r]).front(),
                                            static_cast<int>(r), 0);
        if (v != std::floor(v) || v < 1.0)
            throw ValidationError("label at row " + std::to_string(r + 1) + " is not a positive integer");
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

}  // namespace bisbm

#endif  // BISBM_CSV_HPP
