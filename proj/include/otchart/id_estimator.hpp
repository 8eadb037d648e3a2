#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otchart/csv.hpp"
#include "otchart/tangent.hpp"

namespace otchart {

enum class Aggregation { Mode, Max, Median };

inline std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mode: return "mode";
    case Aggregation::Max: return "max";
    case Aggregation::Median: return "median";
  }
  return "mode";
}
inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "mode") return Aggregation::Mode;
  if (s == "max") return Aggregation::Max;
  if (s == "median") return Aggregation::Median;
  throw Error(ErrorCode::InvalidConfig, "unknown aggregation '" + std::string(s) + "'");
}

struct SpectrumReport {
  std::size_t anchor_index = 0;
  std::vector<double> singular_values;  // nonincreasing
  int local_id = 0;
  // sigma_M / sigma_{M+1}; infinite when M equals the row count or sigma_{M+1} == 0,
  // zero when M == 0.
  double gap_ratio = 0.0;

  bool operator==(const SpectrumReport&) const = default;
};

struct IdEstimate {
  int global_id = 0;
  Aggregation aggregation = Aggregation::Mode;
  std::vector<SpectrumReport> per_point;
};

/// Singular values of the row-normalized bundle. Zero rows stay zero.
inline std::vector<double> normalized_spectrum(const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd unit = rows;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const double norm = unit.row(r).norm();
    if (norm > 0.0) unit.row(r) /= norm;
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(unit).singularValues();
  return {sv.data(), sv.data() + sv.size()};
}

inline int count_above(const std::vector<double>& sv, double rel_tol) {
  if (sv.empty() || !(sv.front() > 0.0)) return 0;
  int count = 0;
  for (double s : sv)
    if (s / sv.front() >= rel_tol) ++count;
  return count;
}

inline SpectrumReport spectrum_report(std::size_t anchor, std::vector<double> sv, double rel_tol) {
  SpectrumReport rep;
  rep.anchor_index = anchor;
  rep.singular_values = std::move(sv);
  rep.local_id = count_above(rep.singular_values, rel_tol);
  const auto m = static_cast<std::size_t>(rep.local_id);
  if (m == 0) {
    rep.gap_ratio = 0.0;
  } else if (m >= rep.singular_values.size() || rep.singular_values[m] == 0.0) {
    rep.gap_ratio = std::numeric_limits<double>::infinity();
  } else {
    rep.gap_ratio = rep.singular_values[m - 1] / rep.singular_values[m];
  }
  return rep;
}

/// Number of singular values with sigma_j / sigma_1 >= rel_tol after scaling
/// every row to unit length.
inline SpectrumReport local_id(const TangentBundle& bundle, double rel_tol = 0.05) {
  if (bundle.vectors.rows() == 0 || bundle.vectors.cols() == 0)
    throw Error(ErrorCode::EmptyBundle, "anchor " + std::to_string(bundle.anchor_index) + " has no tangents");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error(ErrorCode::ParameterOutOfRange, "rel_tol must lie in (0, 1)");
  return spectrum_report(bundle.anchor_index, normalized_spectrum(bundle.vectors), rel_tol);
}

inline int aggregate_ids(std::vector<int> ids, Aggregation aggregation) {
  if (ids.empty()) throw Error(ErrorCode::EmptyReports, "no local estimates to aggregate");
  switch (aggregation) {
    case Aggregation::Max: return *std::max_element(ids.begin(), ids.end());
    case Aggregation::Median: {
      // lower median for even counts
      std::sort(ids.begin(), ids.end());
      return ids[(ids.size() - 1) / 2];
    }
    case Aggregation::Mode: {
      std::map<int, int> counts;
      for (int id : ids) ++counts[id];
      int best = counts.begin()->first, best_count = 0;
      for (const auto& [id, c] : counts)  // ascending id: ties keep the smaller one
        if (c > best_count) best = id, best_count = c;
      return best;
    }
  }
  return 0;
}

inline IdEstimate global_id(std::vector<SpectrumReport> reports, Aggregation aggregation = Aggregation::Mode) {
  std::vector<int> ids;
  for (const auto& r : reports) ids.push_back(r.local_id);
  IdEstimate est;
  est.global_id = aggregate_ids(std::move(ids), aggregation);
  est.aggregation = aggregation;
  est.per_point = std::move(reports);
  return est;
}

inline IdEstimate estimate_id(const std::vector<TangentBundle>& bundles, double rel_tol = 0.05,
                              Aggregation aggregation = Aggregation::Mode) {
  std::vector<SpectrumReport> reports;
  reports.reserve(bundles.size());
  for (const auto& b : bundles) reports.push_back(local_id(b, rel_tol));
  return global_id(std::move(reports), aggregation);
}

/// anchor, sigma_1..sigma_k, local_id
inline void write_spectrum_csv(const std::vector<SpectrumReport>& reports, const std::filesystem::path& path) {
  std::size_t width = 0;
  for (const auto& r : reports) width = std::max(width, r.singular_values.size());
  csv::Writer out(path);
  out.cell("anchor");
  for (std::size_t j = 1; j <= width; ++j) out.cell("sigma_" + std::to_string(j));
  out.cell("local_id").end_row();
  for (const auto& r : reports) {
    out.cell(r.anchor_index).cells(r.singular_values);
    for (std::size_t j = r.singular_values.size(); j < width; ++j) out.cell(0.0);
    out.cell(r.local_id).end_row();
  }
  out.close();
}

inline std::vector<SpectrumReport> read_spectrum_csv(const std::filesystem::path& path, double rel_tol) {
  const auto rows = csv::read(path);
  std::vector<SpectrumReport> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows.front().size() || row.size() < 3)
      throw Error(ErrorCode::RaggedRows, path.string() + ": ragged spectrum rows");
    std::vector<double> sv;
    for (std::size_t c = 1; c + 1 < row.size(); ++c) sv.push_back(parse_double(row[c]));
    out.push_back(spectrum_report(static_cast<std::size_t>(parse_int(row[0])), std::move(sv), rel_tol));
  }
  return out;
}

}  // namespace otchart
