#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otchart/error.hpp"
#include "otchart/numeric_format.hpp"

namespace otchart {

/// Uniformly spaced, strictly increasing abscissae shared by every sample.
class Grid {
 public:
  static constexpr double kUniformityTolerance = 1e-12;

  /// Nodes start, start + step, ... up to and including stop (within half a step).
  static Grid uniform(double start, double stop, double step) {
    if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop))
      throw Error(ErrorCode::NonIncreasingGrid, "grid step must be positive and bounds finite");
    const double span = (stop - start) / step;
    if (span < 1.0 - 1e-9) throw Error(ErrorCode::NonIncreasingGrid, "grid needs at least two nodes");
    const auto count = static_cast<Eigen::Index>(std::floor(span + 0.5)) + 1;
    Eigen::VectorXd nodes(count);
    for (Eigen::Index i = 0; i < count; ++i) nodes[i] = start + static_cast<double>(i) * step;
    return Grid(std::move(nodes), step);
  }

  static Grid from_nodes(std::span<const double> values) {
    if (values.size() < 2) throw Error(ErrorCode::NonIncreasingGrid, "grid needs at least two nodes");
    Eigen::VectorXd nodes(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      nodes[static_cast<Eigen::Index>(i)] = values[i];
      if (!std::isfinite(values[i])) throw Error(ErrorCode::NonIncreasingGrid, "non-finite grid node");
      if (i > 0 && !(values[i] > values[i - 1]))
        throw Error(ErrorCode::NonIncreasingGrid, "grid nodes must be strictly increasing");
    }
    const double spacing = (values.back() - values.front()) / static_cast<double>(values.size() - 1);
    return Grid(std::move(nodes), spacing);
  }

  const Eigen::VectorXd& nodes() const noexcept { return nodes_; }
  double spacing() const noexcept { return spacing_; }
  Eigen::Index size() const noexcept { return nodes_.size(); }
  double front() const noexcept { return nodes_[0]; }
  double back() const noexcept { return nodes_[nodes_.size() - 1]; }

  /// Largest relative deviation of a node gap from the nominal spacing.
  double uniformity_error() const {
    double worst = 0.0;
    for (Eigen::Index i = 1; i < nodes_.size(); ++i)
      worst = std::max(worst, std::abs((nodes_[i] - nodes_[i - 1]) - spacing_) / spacing_);
    return worst;
  }

  bool operator==(const Grid& other) const {
    return spacing_ == other.spacing_ && nodes_.size() == other.nodes_.size() && nodes_ == other.nodes_;
  }

 private:
  Grid(Eigen::VectorXd nodes, double spacing) : nodes_(std::move(nodes)), spacing_(spacing) {
    if (uniformity_error() >= kUniformityTolerance)
      throw Error(ErrorCode::NonUniformGrid, "grid spacing is not uniform");
  }

  Eigen::VectorXd nodes_;
  double spacing_;
};

using GridPtr = std::shared_ptr<const Grid>;
using Label = std::map<std::string, std::string>;

/// Composite trapezoidal rule on a uniform grid.
inline double trapezoid(const Eigen::Ref<const Eigen::VectorXd>& values, double spacing) {
  const Eigen::Index n = values.size();
  if (n == 0) return 0.0;
  if (n == 1) return 0.0;
  return spacing * (values.sum() - 0.5 * (values[0] + values[n - 1]));
}

/// A data point: a nonnegative function sampled on the shared grid, unit mass.
struct DensitySample {
  GridPtr grid;
  Eigen::VectorXd values;
  Label label;
  // Mass removed by clamping negative entries, as a fraction of total absolute mass.
  double clamped_fraction = 0.0;
  std::vector<std::string> warnings;

  double mass() const { return trapezoid(values, grid->spacing()); }
};

struct DataSet {
  GridPtr grid;
  std::vector<DensitySample> samples;

  Eigen::Index ambient_dim() const noexcept { return grid ? grid->size() : 0; }
  std::size_t size() const noexcept { return samples.size(); }

  /// Samples stacked as rows.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), ambient_dim());
    for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = samples[i].values.transpose();
    return out;
  }
};

struct NormalizeOptions {
  double max_clamped_fraction = 0.01;
};

/// Clamps negatives to zero and rescales to unit trapezoidal mass.
inline DensitySample normalize(const Eigen::Ref<const Eigen::VectorXd>& raw, GridPtr grid,
                               const NormalizeOptions& options = {}) {
  if (!grid) throw Error(ErrorCode::GridMismatch, "sample has no grid");
  if (raw.size() != grid->size())
    throw Error(ErrorCode::LengthMismatch, "sample length " + std::to_string(raw.size()) +
                                               " != grid size " + std::to_string(grid->size()));
  if (!raw.allFinite()) throw Error(ErrorCode::ParseFailure, "sample has non-finite entries");

  const double h = grid->spacing();
  const Eigen::VectorXd positive = raw.cwiseMax(0.0);
  const double total = trapezoid(raw.cwiseAbs(), h);
  const double kept = trapezoid(positive, h);
  if (!(kept > 0.0)) throw Error(ErrorCode::AllZeroInput, "sample has no positive mass");

  DensitySample out;
  out.grid = std::move(grid);
  out.clamped_fraction = (total - kept) / total;
  if (out.clamped_fraction > options.max_clamped_fraction)
    throw Error(ErrorCode::ClampedMassExceedsTolerance,
                "clamped " + format_double(out.clamped_fraction) + " of the sample mass");
  if ((raw.array() < 0.0).any())
    out.warnings.push_back("clamped negative entries (fraction " + format_double(out.clamped_fraction) + ")");
  out.values = positive / kept;
  return out;
}

inline double gaussian_density(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

/// One normalized Gaussian per (mean, sigma) pair, means varying slowest.
inline DataSet gaussian_family(std::span<const double> means, std::span<const double> sigmas, const Grid& grid) {
  if (means.empty() || sigmas.empty()) throw Error(ErrorCode::EmptyParameterList, "need at least one mean and sigma");
  for (double s : sigmas)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::NonPositiveSigma, "sigma " + format_double(s));

  DataSet ds;
  ds.grid = std::make_shared<const Grid>(grid);
  ds.samples.reserve(means.size() * sigmas.size());
  const auto& x = grid.nodes();
  for (double mean : means) {
    for (double sigma : sigmas) {
      Eigen::VectorXd raw(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) raw[i] = gaussian_density(x[i], mean, sigma);
      DensitySample sample = normalize(raw, ds.grid);
      sample.label = {{"mu", format_double(mean)}, {"sigma", format_double(sigma)}};
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

/// Arithmetic sequence first, first + step, ... up to last (inclusive, half-step slack).
inline std::vector<double> arithmetic_range(double first, double last, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "range step must be positive");
  std::vector<double> out;
  const auto count = static_cast<long long>(std::floor((last - first) / step + 0.5)) + 1;
  for (long long i = 0; i < count; ++i) out.push_back(first + static_cast<double>(i) * step);
  return out;
}

}  // namespace otchart
