#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <future>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "otchart/csv.hpp"
#include "otchart/dataset.hpp"

namespace otchart {

/// Monotone map T between two densities on a shared grid, oriented so that
/// f_target(x) = f_source(T(x)) * T'(x). T = F_source^{-1} o F_target.
struct TransportPlan {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  GridPtr grid;
  Eigen::VectorXd map;
  Eigen::VectorXd derivative;
  double cost = 0.0;  // squared-distance transport cost (W2^2)
  // Nodes [support_begin, support_end) where the target CDF is inside (eps, 1 - eps).
  Eigen::Index support_begin = 0;
  Eigen::Index support_end = 0;
  double residual = 0.0;  // push-forward residual relative to max f_target
};

struct TransportOptions {
  double support_epsilon = 1e-12;
  double mass_tolerance = 1e-6;
  double residual_tolerance = 5e-2;
};

namespace detail {

/// Cumulative trapezoid, rescaled so the last entry is exactly 1.
inline Eigen::VectorXd unit_cdf(const Eigen::VectorXd& values, double spacing) {
  Eigen::VectorXd cdf(values.size());
  cdf[0] = 0.0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    cdf[i] = cdf[i - 1] + 0.5 * spacing * (values[i - 1] + values[i]);
  const double total = cdf[values.size() - 1];
  cdf /= total;
  cdf[values.size() - 1] = 1.0;
  return cdf;
}

/// Piecewise-linear interpolation of grid values at x; zero outside the grid.
inline double sample_at(const Eigen::VectorXd& values, const Grid& grid, double x) {
  const double pos = (x - grid.front()) / grid.spacing();
  const Eigen::Index n = values.size();
  if (pos < 0.0 || pos > static_cast<double>(n - 1)) return 0.0;
  auto i = static_cast<Eigen::Index>(std::floor(pos));
  if (i >= n - 1) return values[n - 1];
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

/// Central differences, one-sided at both ends.
inline Eigen::VectorXd derivative(const Eigen::VectorXd& values, double spacing) {
  const Eigen::Index n = values.size();
  Eigen::VectorXd d(n);
  if (n < 2) return Eigen::VectorXd::Zero(n);
  d[0] = (values[1] - values[0]) / spacing;
  d[n - 1] = (values[n - 1] - values[n - 2]) / spacing;
  for (Eigen::Index i = 1; i + 1 < n; ++i) d[i] = (values[i + 1] - values[i - 1]) / (2.0 * spacing);
  return d;
}

/// Exact W2^2 between two piecewise-linear CDFs, integrating the quantile
/// difference over the merged u-breakpoints. Symmetric in its arguments.
inline double quantile_cost(const Eigen::VectorXd& cdf_a, const Eigen::VectorXd& cdf_b, const Eigen::VectorXd& nodes) {
  const Eigen::Index n = nodes.size();
  Eigen::Index ia = 0, ib = 0;  // active segment [i, i+1]
  auto skip_flat = [&](const Eigen::VectorXd& cdf, Eigen::Index& i, double u) {
    while (i + 1 < n && cdf[i + 1] <= u) ++i;
  };
  auto quantile_in = [&](const Eigen::VectorXd& cdf, Eigen::Index i, double u) {
    const double du = cdf[i + 1] - cdf[i];
    const double w = std::clamp((u - cdf[i]) / du, 0.0, 1.0);
    return nodes[i] + w * (nodes[i + 1] - nodes[i]);
  };
  double u = 0.0, total = 0.0;
  skip_flat(cdf_a, ia, u);
  skip_flat(cdf_b, ib, u);
  while (ia + 1 < n && ib + 1 < n) {
    const double next = std::min(cdf_a[ia + 1], cdf_b[ib + 1]);
    const double d0 = quantile_in(cdf_a, ia, u) - quantile_in(cdf_b, ib, u);
    const double d1 = quantile_in(cdf_a, ia, next) - quantile_in(cdf_b, ib, next);
    total += (next - u) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    u = next;
    if (u >= 1.0) break;
    skip_flat(cdf_a, ia, u);
    skip_flat(cdf_b, ib, u);
  }
  return total;
}

inline void check_pair(const DensitySample& a, const DensitySample& b, const TransportOptions& options) {
  if (!a.grid || !b.grid || !(*a.grid == *b.grid) || a.values.size() != a.grid->size() ||
      b.values.size() != b.grid->size())
    throw Error(ErrorCode::GridMismatch, "transport needs samples on the same grid");
  for (const auto* s : {&a, &b}) {
    if ((s->values.array() < 0.0).any() || std::abs(s->mass() - 1.0) > options.mass_tolerance)
      throw Error(ErrorCode::NotNormalized, "transport needs unit-mass nonnegative samples");
  }
}

}  // namespace detail

/// Largest |f_target(x) - f_source(T(x)) T'(x)| over nodes whose neighbors are
/// also inside the effective support, divided by max f_target.
inline double pushforward_residual(const TransportPlan& plan, const DensitySample& source, const DensitySample& target) {
  const Grid& grid = *plan.grid;
  const double peak = target.values.maxCoeff();
  double worst = 0.0;
  for (Eigen::Index j = plan.support_begin + 1; j + 1 < plan.support_end; ++j) {
    const double pulled = detail::sample_at(source.values, grid, plan.map[j]) * plan.derivative[j];
    worst = std::max(worst, std::abs(target.values[j] - pulled));
  }
  return worst / peak;
}

/// Squared 2-Wasserstein distance; exactly symmetric in its arguments.
inline double wasserstein2_squared(const DensitySample& a, const DensitySample& b, const TransportOptions& options = {}) {
  detail::check_pair(a, b, options);
  const double h = a.grid->spacing();
  return detail::quantile_cost(detail::unit_cdf(a.values, h), detail::unit_cdf(b.values, h), a.grid->nodes());
}

inline TransportPlan solve_monotone(const DensitySample& source, const DensitySample& target,
                                    const TransportOptions& options = {}) {
  detail::check_pair(source, target, options);
  const Grid& grid = *source.grid;
  const auto& x = grid.nodes();
  const double h = grid.spacing();
  const Eigen::Index n = grid.size();
  const Eigen::VectorXd cdf_src = detail::unit_cdf(source.values, h);
  const Eigen::VectorXd cdf_tgt = detail::unit_cdf(target.values, h);

  TransportPlan plan;
  plan.grid = source.grid;
  plan.map.resize(n);

  Eigen::Index begin = n, end = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (cdf_tgt[j] >= options.support_epsilon && cdf_tgt[j] <= 1.0 - options.support_epsilon) {
      begin = std::min(begin, j);
      end = j + 1;
    }
  }
  if (end - begin < 2) throw Error(ErrorCode::DegenerateSupport, "target mass concentrated on fewer than two nodes");

  // Leftmost preimage of u under the source CDF; queries are nondecreasing so
  // the bracket only moves forward.
  Eigen::Index bracket = 0;
  for (Eigen::Index j = begin; j < end; ++j) {
    const double u = cdf_tgt[j];
    while (bracket < n - 1 && cdf_src[bracket] < u) ++bracket;
    if (bracket == 0) {
      plan.map[j] = x[0];
    } else {
      const double lo = cdf_src[bracket - 1], hi = cdf_src[bracket];
      const double w = hi > lo ? std::clamp((u - lo) / (hi - lo), 0.0, 1.0) : 1.0;
      plan.map[j] = x[bracket - 1] + w * h;
    }
  }
  for (Eigen::Index j = 0; j < begin; ++j) plan.map[j] = plan.map[begin];
  for (Eigen::Index j = end; j < n; ++j) plan.map[j] = plan.map[end - 1];

  plan.derivative = detail::derivative(plan.map, h);
  plan.cost = detail::quantile_cost(cdf_src, cdf_tgt, x);
  plan.support_begin = begin;
  plan.support_end = end;
  plan.residual = pushforward_residual(plan, source, target);
  return plan;
}

/// Unnormalized curve density f_src((1-t)x + t T(x)) |(1-t) + t T'(x)|.
inline Eigen::VectorXd interpolate_raw(const TransportPlan& plan, const DensitySample& source, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::ParameterOutOfRange, "t must lie in [0, 1]");
  if (!source.grid || !(*source.grid == *plan.grid))
    throw Error(ErrorCode::GridMismatch, "source sample is not on the plan grid");
  const auto& x = plan.grid->nodes();
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double moved = (1.0 - t) * x[j] + t * plan.map[j];
    out[j] = detail::sample_at(source.values, *plan.grid, moved) * std::abs((1.0 - t) + t * plan.derivative[j]);
  }
  return out;
}

/// Point on the displacement curve, renormalized to unit mass.
inline DensitySample interpolate(const TransportPlan& plan, const DensitySample& source, double t) {
  const Eigen::VectorXd raw = interpolate_raw(plan, source, t);
  DensitySample out;
  out.grid = plan.grid;
  const double mass = trapezoid(raw, plan.grid->spacing());
  if (!(mass > 0.0)) throw Error(ErrorCode::DegeneratePlan, "interpolated density has no mass");
  out.values = raw / mass;
  return out;
}

/// A source sample paired with its plan; eval(0) is the source, eval(1) the target.
class DisplacementCurve {
 public:
  DisplacementCurve(TransportPlan plan, DensitySample source) : plan_(std::move(plan)), source_(std::move(source)) {}

  DensitySample eval(double t) const { return interpolate(plan_, source_, t); }
  const TransportPlan& plan() const noexcept { return plan_; }

 private:
  TransportPlan plan_;
  DensitySample source_;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Solves (source, target) = pairs[i] for every i; output order follows input
/// order regardless of how the work is split across threads.
inline std::vector<TransportPlan> pairwise_plans(const DataSet& ds, const std::vector<IndexPair>& pairs,
                                                 const TransportOptions& options = {}, unsigned threads = 0) {
  for (const auto& [s, t] : pairs)
    if (s >= ds.size() || t >= ds.size())
      throw Error(ErrorCode::IndexOutOfRange,
                  "pair (" + std::to_string(s) + "," + std::to_string(t) + ") outside dataset");

  std::vector<TransportPlan> plans(pairs.size());
  auto solve_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto [s, t] = pairs[i];
      try {
        plans[i] = solve_monotone(ds.samples[s], ds.samples[t], options);
      } catch (const Error& e) {
        throw Error(e.code(), "pair (" + std::to_string(s) + "," + std::to_string(t) + "): " + e.what());
      }
      plans[i].source_index = s;
      plans[i].target_index = t;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, pairs.size())));
  if (threads <= 1) {
    solve_range(0, pairs.size());
    return plans;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (pairs.size() + threads - 1) / threads;
  for (std::size_t lo = 0; lo < pairs.size(); lo += chunk)
    jobs.push_back(std::async(std::launch::async, solve_range, lo, std::min(pairs.size(), lo + chunk)));
  // get() in order so the first failing pair (by input order) is reported
  for (auto& job : jobs) job.get();
  return plans;
}

inline void write_plan_csv(const TransportPlan& plan, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.cell("x").cell("T").cell("T_prime").end_row();
  const auto& x = plan.grid->nodes();
  for (Eigen::Index j = 0; j < x.size(); ++j) out.cell(x[j]).cell(plan.map[j]).cell(plan.derivative[j]).end_row();
  out.close();
}

}  // namespace otchart
