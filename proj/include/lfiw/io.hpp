#pragma once

#include <lfiw/types.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace lfiw::io {

using json = nlohmann::json;

/// Shortest round-trip decimal representation, so emitted numbers are
/// byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{})
    throw std::runtime_error("not a number: '" + std::string(s) + "'");
  return v;
}

/// Writes content to path atomically (temp file in the same directory, then
/// rename).
inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads a numeric matrix from CSV: one row per point, columns = features.
/// Lines starting with '#' and a single leading non-numeric header line are
/// skipped.
inline Matrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::size_t start = 0;
    bool parse_failed = false;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      std::string_view cell(line.data() + start, comma - start);
      try {
        row.push_back(parse_double(cell));
      } catch (const std::exception&) {
        parse_failed = true;
        break;
      }
      start = comma + 1;
    }
    if (parse_failed) {
      if (first_data_line) {  // header line
        first_data_line = false;
        continue;
      }
      throw std::runtime_error("non-numeric cell in " + path + ": " + line);
    }
    first_data_line = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!m.allFinite()) throw std::runtime_error("non-finite values in " + path);
  return m;
}

/// Loads points from JSONL: one {"features": [...]} object per line.
inline Matrix load_jsonl_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!j.contains("features"))
      throw std::runtime_error("JSONL line missing 'features' in " + path);
    rows.push_back(j.at("features").get<std::vector<double>>());
    if (rows.size() > 1 && rows.back().size() != rows.front().size())
      throw std::runtime_error("inconsistent feature dimension in " + path);
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!m.allFinite()) throw std::runtime_error("non-finite values in " + path);
  return m;
}

/// Dispatches on extension: .jsonl -> JSONL, anything else -> CSV.
inline Matrix load_points(const std::string& path) {
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl")
    return load_jsonl_matrix(path);
  return load_csv_matrix(path);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::string header) { out_ << header << '\n'; }

  template <class... Cell>
  void row(const Cell&... cells) {
    bool first = true;
    (write_cell(cells, first), ...);
    out_ << '\n';
  }

  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

  std::string str() const { return out_.str(); }

 private:
  void write_cell(double v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << format_double(v);
  }
  void write_cell(const std::string& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << v;
  }
  void write_cell(const char* v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << v;
  }
  template <class Int>
    requires std::is_integral_v<Int>
  void write_cell(Int v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << v;
  }

  std::ostringstream out_;
};

}  // namespace lfiw::io
