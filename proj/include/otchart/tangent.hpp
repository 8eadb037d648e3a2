#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otchart/csv.hpp"
#include "otchart/dataset.hpp"
#include "otchart/transport.hpp"

namespace otchart {

enum class Metric { Euclidean, Wasserstein2 };

/// Which sample plays the source role when solving the plan for edge (anchor, neighbor).
///
/// With NeighborSource the plan map is F_i^{-1} o F_0, which carries the
/// anchor's mass onto the neighbor, so the velocity is the t = 0 derivative of
/// the displacement geodesic leaving f0 (up to sign). AnchorSource uses the
/// inverse map F_0^{-1} o F_i; the two agree to first order for affine maps
/// but differ where a density is cut off by the grid boundary.
enum class PlanOrientation {
  AnchorSource,    // source = anchor f0, target = neighbor f_i
  NeighborSource,  // source = neighbor f_i, target = anchor f0
};

inline std::string to_string(Metric m) { return m == Metric::Euclidean ? "euclidean" : "wasserstein2"; }
inline Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "wasserstein2" || s == "w2") return Metric::Wasserstein2;
  throw Error(ErrorCode::InvalidConfig, "unknown metric '" + std::string(s) + "'");
}
inline std::string to_string(PlanOrientation o) {
  return o == PlanOrientation::AnchorSource ? "anchor-source" : "neighbor-source";
}
inline PlanOrientation parse_orientation(std::string_view s) {
  if (s == "anchor-source") return PlanOrientation::AnchorSource;
  if (s == "neighbor-source") return PlanOrientation::NeighborSource;
  throw Error(ErrorCode::InvalidConfig, "unknown plan orientation '" + std::string(s) + "'");
}

struct NeighborGraph {
  int k = 0;
  Metric metric = Metric::Wasserstein2;
  // edges[i] lists the k nearest neighbors of point i, nearest first.
  std::vector<std::vector<std::size_t>> edges;
  std::vector<std::vector<double>> distances;
};

inline Eigen::MatrixXd distance_matrix(const DataSet& ds, Metric metric, const TransportOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = ds.samples[static_cast<std::size_t>(i)];
      const auto& b = ds.samples[static_cast<std::size_t>(j)];
      d(i, j) = metric == Metric::Euclidean ? (a.values - b.values).norm()
                                            : std::sqrt(std::max(0.0, wasserstein2_squared(a, b, options)));
      d(j, i) = d(i, j);
    }
  }
  return d;
}

/// k-nearest-neighbor graph; distances within a relative 1e-9 count as ties
/// and are ordered by ascending index.
inline NeighborGraph build_graph(const DataSet& ds, int k, Metric metric, const TransportOptions& options = {}) {
  if (ds.size() == 0) throw Error(ErrorCode::EmptyDataSet, "cannot build a graph on an empty dataset");
  if (k < 1) throw Error(ErrorCode::ParameterOutOfRange, "k must be at least 1");
  if (static_cast<std::size_t>(k) > ds.size() - 1)
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " but dataset has only " +
                                          std::to_string(ds.size()) + " points");
  const Eigen::MatrixXd d = distance_matrix(ds, metric, options);
  constexpr double kTie = 1e-9;
  auto tied = [&](double a, double b) { return std::abs(a - b) <= kTie * std::max(std::abs(a), std::abs(b)); };

  NeighborGraph g;
  g.k = k;
  g.metric = metric;
  const auto n = ds.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    const auto row = static_cast<Eigen::Index>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d(row, static_cast<Eigen::Index>(a)) < d(row, static_cast<Eigen::Index>(b)); });
    for (bool swapped = true; swapped;) {
      swapped = false;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        const double da = d(row, static_cast<Eigen::Index>(order[p]));
        const double db = d(row, static_cast<Eigen::Index>(order[p + 1]));
        if (tied(da, db) && order[p] > order[p + 1]) {
          std::swap(order[p], order[p + 1]);
          swapped = true;
        }
      }
    }
    order.resize(static_cast<std::size_t>(k));
    std::vector<double> dist;
    for (auto j : order) dist.push_back(d(row, static_cast<Eigen::Index>(j)));
    g.edges.push_back(std::move(order));
    g.distances.push_back(std::move(dist));
  }
  return g;
}

/// The (source, target) pairs a bundle computation needs, anchor-major.
inline std::vector<IndexPair> edge_pairs(const NeighborGraph& g, PlanOrientation orientation) {
  std::vector<IndexPair> pairs;
  for (std::size_t a = 0; a < g.edges.size(); ++a)
    for (auto nb : g.edges[a])
      pairs.push_back(orientation == PlanOrientation::AnchorSource ? IndexPair{a, nb} : IndexPair{nb, a});
  return pairs;
}

using PlanSet = std::map<IndexPair, TransportPlan>;

inline PlanSet make_plan_set(std::vector<TransportPlan> plans) {
  PlanSet out;
  for (auto& p : plans) {
    const IndexPair key{p.source_index, p.target_index};
    out.insert_or_assign(key, std::move(p));
  }
  return out;
}

/// Velocity of the displacement curve leaving `anchor` at t = 0:
/// V = f0'(x) (T(x) - x) + f0(x) (T'(x) - 1).
inline Eigen::VectorXd velocity(const DensitySample& anchor, const TransportPlan& plan) {
  if (!anchor.grid || !plan.grid || !(*anchor.grid == *plan.grid) || plan.map.size() != anchor.values.size() ||
      plan.derivative.size() != anchor.values.size())
    throw Error(ErrorCode::GridMismatch, "anchor and plan live on different grids");
  if (!plan.map.allFinite() || !plan.derivative.allFinite())
    throw Error(ErrorCode::DegeneratePlan, "plan has non-finite entries");
  const double h = anchor.grid->spacing();
  const Eigen::VectorXd slope = detail::derivative(anchor.values, h);
  const auto& x = anchor.grid->nodes();
  return (slope.array() * (plan.map - x).array() + anchor.values.array() * (plan.derivative.array() - 1.0)).matrix();
}

struct TangentBundle {
  std::size_t anchor_index = 0;
  std::vector<std::size_t> neighbor_indices;
  Eigen::MatrixXd vectors;        // one row per neighbor
  std::vector<bool> degenerate;   // row is numerically zero
};

struct TangentOptions {
  PlanOrientation orientation = PlanOrientation::NeighborSource;
  double degenerate_tolerance = 1e-9;  // relative to ||f0||
};

inline TangentBundle bundle_at(const DataSet& ds, const NeighborGraph& graph, const PlanSet& plans,
                               std::size_t anchor_index, const TangentOptions& options = {}) {
  if (anchor_index >= ds.size() || anchor_index >= graph.edges.size())
    throw Error(ErrorCode::IndexOutOfRange, "anchor " + std::to_string(anchor_index));
  const auto& anchor = ds.samples[anchor_index];
  const auto& nbrs = graph.edges[anchor_index];

  TangentBundle b;
  b.anchor_index = anchor_index;
  b.neighbor_indices = nbrs;
  b.vectors.resize(static_cast<Eigen::Index>(nbrs.size()), ds.ambient_dim());
  const double scale = anchor.values.norm();
  for (std::size_t r = 0; r < nbrs.size(); ++r) {
    const IndexPair key = options.orientation == PlanOrientation::AnchorSource ? IndexPair{anchor_index, nbrs[r]}
                                                                               : IndexPair{nbrs[r], anchor_index};
    const auto it = plans.find(key);
    if (it == plans.end())
      throw Error(ErrorCode::MissingPlan, "no plan for (" + std::to_string(key.first) + "," +
                                              std::to_string(key.second) + ")");
    const auto row = static_cast<Eigen::Index>(r);
    b.vectors.row(row) = velocity(anchor, it->second).transpose();
    b.degenerate.push_back(b.vectors.row(row).norm() <= options.degenerate_tolerance * scale);
  }
  return b;
}

inline std::vector<TangentBundle> all_bundles(const DataSet& ds, const NeighborGraph& graph, const PlanSet& plans,
                                              const TangentOptions& options = {}) {
  std::vector<TangentBundle> out;
  out.reserve(ds.size());
  for (std::size_t a = 0; a < ds.size(); ++a) out.push_back(bundle_at(ds, graph, plans, a, options));
  return out;
}

/// Single indexed file: anchor, neighbor, degenerate flag, then the N vector entries.
inline void write_bundles_csv(const std::vector<TangentBundle>& bundles, const std::filesystem::path& path) {
  csv::Writer out(path);
  for (const auto& b : bundles) {
    for (Eigen::Index r = 0; r < b.vectors.rows(); ++r) {
      out.cell(b.anchor_index).cell(b.neighbor_indices[static_cast<std::size_t>(r)])
          .cell(b.degenerate[static_cast<std::size_t>(r)] ? 1 : 0);
      for (Eigen::Index c = 0; c < b.vectors.cols(); ++c) out.cell(b.vectors(r, c));
      out.end_row();
    }
  }
  out.close();
}

inline std::vector<TangentBundle> read_bundles_csv(const std::filesystem::path& path) {
  std::vector<TangentBundle> bundles;
  std::vector<std::vector<double>> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    auto& b = bundles.back();
    b.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        b.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    rows.clear();
  };
  std::size_t width = 0;
  for (const auto& row : csv::read(path)) {
    if (row.size() < 4) throw Error(ErrorCode::RaggedRows, path.string() + ": bundle row too short");
    if (width == 0) width = row.size();
    if (row.size() != width) throw Error(ErrorCode::RaggedRows, path.string() + ": ragged bundle rows");
    const auto anchor = static_cast<std::size_t>(parse_int(row[0]));
    if (bundles.empty() || bundles.back().anchor_index != anchor) {
      flush();
      bundles.push_back(TangentBundle{});
      bundles.back().anchor_index = anchor;
    }
    bundles.back().neighbor_indices.push_back(static_cast<std::size_t>(parse_int(row[1])));
    bundles.back().degenerate.push_back(parse_int(row[2]) != 0);
    rows.emplace_back();
    for (std::size_t c = 3; c < row.size(); ++c) rows.back().push_back(parse_double(row[c]));
  }
  flush();
  return bundles;
}

}  // namespace otchart
