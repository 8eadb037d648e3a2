#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otchart/error.hpp"
#include "otchart/numeric_format.hpp"

namespace otchart::csv {

using Row = std::vector<std::string>;

inline Row split(std::string_view line) {
  Row out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads all non-blank lines. Lines starting with '#' are comments.
inline std::vector<Row> read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    rows.push_back(split(t));
  }
  return rows;
}

inline std::vector<double> parse_numbers(const Row& row) {
  std::vector<double> out;
  out.reserve(row.size());
  for (const auto& cell : row) out.push_back(parse_double(cell));
  return out;
}

/// Buffered writer; file is created on construction and flushed on close().
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  }

  Writer& cell(std::string_view text) {
    if (!first_) out_ << ',';
    out_ << text;
    first_ = false;
    return *this;
  }
  Writer& cell(double value) { return cell(format_double(value)); }
  Writer& cell(long long value) { return cell(std::to_string(value)); }
  Writer& cell(int value) { return cell(static_cast<long long>(value)); }
  Writer& cell(std::size_t value) { return cell(std::to_string(value)); }

  template <typename Range>
  Writer& cells(const Range& values) {
    for (const auto& v : values) cell(v);
    return *this;
  }

  Writer& end_row() {
    out_ << '\n';
    first_ = true;
    return *this;
  }

  void close() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::IoFailure, "write failed for " + path_.string());
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace otchart::csv
