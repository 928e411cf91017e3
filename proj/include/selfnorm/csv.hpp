#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "selfnorm/estimating.hpp"
#include "selfnorm/matrix.hpp"

namespace selfnorm {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

inline bool parse_double(const std::string& field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Dataset CSV: header row x1,...,xp,y; decimal-point reals; missing or
// malformed values are rejected with the offending column named.
inline RegressionSample load_regression_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset is empty: " + path);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw Error("dataset header needs columns x1..xp,y");
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j) {
    const std::string expected = "x" + std::to_string(j + 1);
    if (header[j] != expected) {
      throw Error("dataset missing column " + expected + " (found '" + header[j] + "')");
    }
  }
  if (header.back() != "y") throw Error("dataset missing column y");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != p + 1) {
      throw Error("row " + std::to_string(rows + 2) + ": expected " + std::to_string(p + 1) +
                  " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j <= p; ++j) {
      double v = 0.0;
      if (!detail::parse_double(fields[j], v)) {
        throw Error("row " + std::to_string(rows + 2) + ": missing or invalid value in column " +
                    header[j]);
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error("dataset has no data rows: " + path);

  Matrix x(rows, p, 0.0);
  Vector y(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) x(i, j) = values[i * (p + 1) + j];
    y[i] = values[i * (p + 1) + p];
  }
  return RegressionSample(std::move(x), std::move(y));
}

inline void save_regression_csv(const std::string& path, const RegressionSample& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path);
  for (std::size_t j = 0; j < s.dim(); ++j) out << "x" << (j + 1) << ",";
  out << "y\n";
  for (std::size_t i = 0; i < s.n(); ++i) {
    for (std::size_t j = 0; j < s.dim(); ++j) out << detail::format_double(s.x(i, j)) << ",";
    out << detail::format_double(s.y[i]) << "\n";
  }
}

// Square or rectangular numeric matrix with header c1..cp.
inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("matrix file is empty: " + path);
  const auto header = detail::split_csv_line(line);
  const std::size_t cols = header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != cols) {
      throw Error("matrix row " + std::to_string(rows + 2) + ": expected " +
                  std::to_string(cols) + " fields");
    }
    for (const auto& f : fields) {
      double v = 0.0;
      if (!detail::parse_double(f, v)) {
        throw Error("matrix row " + std::to_string(rows + 2) + ": invalid value");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error("matrix file has no data rows: " + path);
  Matrix m(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  }
  return m;
}

inline void save_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write matrix file: " + path);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    out << "c" << (j + 1) << (j + 1 == m.cols() ? "\n" : ",");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out << detail::format_double(m(i, j)) << (j + 1 == m.cols() ? "\n" : ",");
    }
  }
}

// A candidate parameter vector: one numeric record, with an optional header
// line that is skipped when the first line does not parse as numbers.
inline Vector load_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vector file: " + path);
  std::string line;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields = detail::split_csv_line(line);
    double probe = 0.0;
    if (detail::parse_double(fields[0], probe)) break;
    fields.clear();
  }
  if (fields.empty()) throw Error("vector file has no numeric record: " + path);
  Vector v(fields.size(), 0.0);
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (!detail::parse_double(fields[j], v[j])) {
      throw Error("vector file: invalid value in field " + std::to_string(j + 1));
    }
  }
  return v;
}

}  // namespace selfnorm
