#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "otchart/csv.hpp"
#include "otchart/dataset.hpp"

namespace otchart {

enum class MatrixLayout {
  GridHeader,    // first row holds the grid nodes
  SeparateGrid,  // grid nodes live in their own file (one row or one column)
};

/// Sidecar holding sample labels as (sample_index, key, value) rows.
inline std::filesystem::path labels_path_for(const std::filesystem::path& matrix_path) {
  auto p = matrix_path;
  p.replace_extension(".labels.csv");
  return p;
}

inline void save_matrix(const DataSet& ds, const std::filesystem::path& path) {
  if (!ds.grid) throw Error(ErrorCode::EmptyDataSet, "dataset has no grid");
  csv::Writer out(path);
  out.cells(ds.grid->nodes()).end_row();
  for (const auto& s : ds.samples) out.cells(s.values).end_row();
  out.close();

  bool any_label = false;
  for (const auto& s : ds.samples) any_label = any_label || !s.label.empty();
  if (!any_label) return;
  csv::Writer labels(labels_path_for(path));
  labels.cell("sample_index").cell("key").cell("value").end_row();
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    for (const auto& [key, value] : ds.samples[i].label) labels.cell(i).cell(key).cell(value).end_row();
  labels.close();
}

inline DataSet load_matrix(const std::filesystem::path& path, MatrixLayout layout = MatrixLayout::GridHeader,
                           const std::optional<std::filesystem::path>& grid_path = std::nullopt,
                           const NormalizeOptions& options = {}) {
  auto rows = csv::read(path);
  std::vector<double> nodes;
  std::size_t first_sample = 0;
  if (layout == MatrixLayout::GridHeader) {
    if (rows.empty()) throw Error(ErrorCode::ParseFailure, path.string() + " is empty");
    nodes = csv::parse_numbers(rows.front());
    first_sample = 1;
  } else {
    if (!grid_path) throw Error(ErrorCode::InvalidConfig, "separate-grid layout needs a grid file");
    for (const auto& row : csv::read(*grid_path))
      for (double v : csv::parse_numbers(row)) nodes.push_back(v);
  }

  DataSet ds;
  ds.grid = std::make_shared<const Grid>(Grid::from_nodes(nodes));
  for (std::size_t r = first_sample; r < rows.size(); ++r) {
    if (rows[r].size() != nodes.size())
      throw Error(ErrorCode::RaggedRows, path.string() + " row " + std::to_string(r + 1) + " has " +
                                             std::to_string(rows[r].size()) + " entries, expected " +
                                             std::to_string(nodes.size()));
    const auto values = csv::parse_numbers(rows[r]);
    ds.samples.push_back(normalize(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
                                   ds.grid, options));
  }

  const auto labels = labels_path_for(path);
  if (std::filesystem::exists(labels)) {
    auto label_rows = csv::read(labels);
    for (std::size_t r = 1; r < label_rows.size(); ++r) {
      const auto& row = label_rows[r];
      if (row.size() != 3) throw Error(ErrorCode::RaggedRows, labels.string() + " needs 3 columns");
      const auto index = parse_int(row[0]);
      if (index < 0 || static_cast<std::size_t>(index) >= ds.samples.size())
        throw Error(ErrorCode::IndexOutOfRange, "label for missing sample " + row[0]);
      ds.samples[static_cast<std::size_t>(index)].label[row[1]] = row[2];
    }
  }
  return ds;
}

}  // namespace otchart
