#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mib/common.hpp"

namespace mib {

/// N x d matrix of named real-valued features with optional per-row strata
/// labels. The universal input of the toolkit. The reserved column name
/// "strata" holds categorical labels and is kept out of the numeric block.
struct FeatureMatrix {
    std::vector<std::string> names;  // one per numeric column
    Matrix values;                   // N x d, finite after validation
    std::vector<std::string> strata; // empty or size N
    std::string provenance;

    std::size_t rows() const { return values.rows(); }
    std::size_t cols() const { return values.cols(); }
    bool has_strata() const { return !strata.empty(); }

    void validate() const {
        if (names.size() != values.cols())
            throw ShapeError("feature matrix: " + std::to_string(names.size()) +
                             " column names for " + std::to_string(values.cols()) +
                             " columns");
        if (!strata.empty() && strata.size() != values.rows())
            throw ShapeError("feature matrix: strata size " + std::to_string(strata.size()) +
                             " does not match row count " + std::to_string(values.rows()));
        for (std::size_t i = 0; i < values.rows(); ++i)
            for (std::size_t j = 0; j < values.cols(); ++j)
                if (!std::isfinite(values(i, j)))
                    throw DomainError("feature matrix: non-finite value at row " +
                                      std::to_string(i + 1) + ", column '" + names[j] + "'");
    }

    FeatureMatrix take_rows(const std::vector<std::size_t>& idx) const {
        FeatureMatrix out;
        out.names = names;
        out.values = values.take_rows(idx);
        if (!strata.empty()) {
            out.strata.reserve(idx.size());
            for (std::size_t i : idx) out.strata.push_back(strata[i]);
        }
        out.provenance = provenance;
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    // strip trailing CR from files with Windows line endings
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline char detect_delimiter(const std::string& header) {
    return header.find('\t') != std::string::npos ? '\t' : ',';
}

}  // namespace detail

/// Load a delimited feature file (comma default, tab accepted). First row is
/// the header; a column literally named "strata" is treated as row labels.
/// Throws ParseError with 1-based line numbers on malformed input.
inline FeatureMatrix load_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw ParseError(path + ": missing header row");
    const char delim = detail::detect_delimiter(line);

    FeatureMatrix fm;
    fm.provenance = path;
    std::vector<std::string> header = detail::split_line(line, delim);
    long strata_col = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "strata") {
            if (strata_col >= 0)
                throw ParseError(path + ":1: duplicate 'strata' column");
            strata_col = static_cast<long>(j);
        } else {
            if (header[j].empty())
                throw ParseError(path + ":1: empty column name at position " +
                                 std::to_string(j + 1));
            fm.names.push_back(header[j]);
        }
    }
    if (fm.names.empty())
        throw ParseError(path + ":1: no numeric columns in header");

    std::vector<double> flat;
    std::size_t n_rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = detail::split_line(line, delim);
        if (cells.size() != header.size())
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (static_cast<long>(j) == strata_col) {
                fm.strata.push_back(cells[j]);
                continue;
            }
            const std::string& cell = cells[j];
            double x = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(x))
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": non-numeric or non-finite cell '" + cell +
                                 "' in column '" + header[j] + "'");
            flat.push_back(x);
        }
        ++n_rows;
    }

    fm.values = Matrix(n_rows, fm.names.size());
    fm.values.data() = std::move(flat);
    fm.validate();
    return fm;
}

/// Save in the same format load_features reads; values round-trip exactly
/// (shortest representation that parses back to the identical double).
inline void save_features(const FeatureMatrix& fm, const std::string& path,
                          char delim = ',') {
    fm.validate();
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open file for writing");
    out << std::setprecision(17);
    for (std::size_t j = 0; j < fm.names.size(); ++j) {
        if (j) out << delim;
        out << fm.names[j];
    }
    if (fm.has_strata()) out << delim << "strata";
    out << "\n";
    for (std::size_t i = 0; i < fm.rows(); ++i) {
        for (std::size_t j = 0; j < fm.cols(); ++j) {
            if (j) out << delim;
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), fm.values(i, j));
            (void)ec;
            out.write(buf, p - buf);
        }
        if (fm.has_strata()) out << delim << fm.strata[i];
        out << "\n";
    }
    if (!out) throw ParseError(path + ": write failed");
}

}  // namespace mib
