#pragma once

// CSV and key=value file plumbing shared by the CLI and tests. Data files
// hold one observation per row; an optional single header row is detected by
// a non-numeric first token.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/geometry.hpp"

namespace ossmf::csv {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline bool parse_double(const std::string& token, double& out) {
    const std::string t = trim(token);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::string current;
    std::stringstream ss(line);
    while (std::getline(ss, current, ',')) tokens.push_back(current);
    if (!line.empty() && line.back() == ',') tokens.push_back("");
    return tokens;
}

}  // namespace detail

/// Reads a numeric matrix: R data rows by C columns, comma separated, with
/// an optional header row. Throws std::invalid_argument with the offending
/// line on ragged or non-numeric content.
inline Matrix read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto tokens = detail::split_line(stripped);
        std::vector<double> row(tokens.size());
        bool numeric = true;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (!detail::parse_double(tokens[i], row[i])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first_content_line) {  // header row
                first_content_line = false;
                continue;
            }
            throw std::invalid_argument(path + ": non-numeric value on line " +
                                        std::to_string(lineno));
        }
        first_content_line = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::invalid_argument(path + ": ragged row on line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(path + ": no data rows");

    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    return m;
}

/// Writes a matrix row-wise with full double round-trip precision.
inline void write_matrix(const std::string& path, const Matrix& m,
                         const std::string& header = {}) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open file for writing: " + path);
    if (!header.empty()) out << header << "\n";
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf;
            if (j + 1 < m.cols()) out << ',';
        }
        out << "\n";
    }
    if (!out) throw std::invalid_argument("write failed: " + path);
}

/// One run-log row; metric cells stay empty outside checkpoints.
struct LogRow {
    std::int64_t t = 0;
    bool updated = false;
    bool retained = false;
    std::int64_t relevant_count = 0;
    double step_seconds = 0.0;
    std::optional<double> asad_deg;
    std::optional<double> rmse;
};

inline constexpr const char* kLogHeader =
    "t,updated,retained,relevant_count,step_seconds,asad_deg,rmse";

class LogWriter {
public:
    explicit LogWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::invalid_argument("cannot open file for writing: " + path);
        out_ << kLogHeader << "\n";
    }

    void write(const LogRow& row) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9g", row.step_seconds);
        out_ << row.t << ',' << (row.updated ? 1 : 0) << ',' << (row.retained ? 1 : 0) << ','
             << row.relevant_count << ',' << buf << ',';
        if (row.asad_deg) {
            std::snprintf(buf, sizeof(buf), "%.12g", *row.asad_deg);
            out_ << buf;
        }
        out_ << ',';
        if (row.rmse) {
            std::snprintf(buf, sizeof(buf), "%.12g", *row.rmse);
            out_ << buf;
        }
        out_ << "\n";
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

/// Flat key = value file. Lines starting with '#' and blank lines are
/// ignored; later keys override earlier ones.
inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ": missing '=' on line " + std::to_string(lineno));
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(path + ": empty key on line " + std::to_string(lineno));
        kv[key] = value;
    }
    return kv;
}

inline void write_kv_file(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open file for writing: " + path);
    for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
}

}  // namespace ossmf::csv
