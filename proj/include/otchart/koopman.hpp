#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otchart/coordinate_model.hpp"
#include "otchart/dataset.hpp"
#include "otchart/error.hpp"
#include "otchart/tangent.hpp"

namespace otchart {

/// Samples (x, P(x)) of a vector field.
struct VectorFieldSamples {
  Eigen::MatrixXd points;      // one point per row
  Eigen::MatrixXd velocities;  // P(x) per row

  Eigen::Index size() const noexcept { return points.rows(); }
};

/// Tangent rows of all bundles flattened, with the data point each is anchored at.
struct TangentRows {
  std::vector<std::size_t> anchor;
  std::vector<std::size_t> neighbor;
  Eigen::MatrixXd vectors;       // one tangent per row
  std::vector<bool> active;      // false when ||V|| < 1e-12 (excluded from the loss)
  std::size_t active_count = 0;

  static TangentRows from_bundles(const std::vector<TangentBundle>& bundles) {
    TangentRows rows;
    Eigen::Index total = 0, width = 0;
    for (const auto& b : bundles) {
      total += b.vectors.rows();
      if (b.vectors.rows() > 0) width = b.vectors.cols();
    }
    rows.vectors.resize(total, width);
    Eigen::Index r = 0;
    for (const auto& b : bundles) {
      if (b.vectors.rows() > 0 && b.vectors.cols() != width)
        throw Error(ErrorCode::DimensionMismatch, "bundles have different ambient dimensions");
      for (Eigen::Index i = 0; i < b.vectors.rows(); ++i, ++r) {
        rows.vectors.row(r) = b.vectors.row(i);
        rows.anchor.push_back(b.anchor_index);
        rows.neighbor.push_back(b.neighbor_indices[static_cast<std::size_t>(i)]);
        const bool active = b.vectors.row(i).norm() >= 1e-12;
        rows.active.push_back(active);
        rows.active_count += active ? 1 : 0;
      }
    }
    return rows;
  }

  Eigen::Index size() const noexcept { return vectors.rows(); }
};

/// One M-vector of coefficients per tangent row: V ~ sum_i alpha_i grad phi_i(f0).
using AlphaTable = Eigen::MatrixXd;

struct ParameterGradient {
  double value = 0.0;
  Eigen::VectorXd params;
  Eigen::MatrixXd alphas;  // empty unless the loss depends on alpha
};

namespace detail {

/// Accumulates d(loss)/d(theta) from per-point upstream gradients dL/dJ (M x N).
/// Each point adds a rank M+1 update to dW1; the factors are collected and
/// multiplied out once in take().
class JacobianBackprop {
 public:
  explicit JacobianBackprop(const CoordinateModel& model)
      : model_(model),
        folded_(model.folded_w1()),
        inv_scale_(model.standardization().scale.cwiseInverse()),
        grad_(Eigen::VectorXd::Zero(model.parameters().size())) {}

  const Eigen::MatrixXd& folded() const noexcept { return folded_; }

  void add(const CoordinateModel::Activations& act, const Eigen::MatrixXd& upstream) {
    const auto& arch = model_.architecture();
    const Eigen::Index n = arch.input_dim, rows = model_.first_rows();
    if (arch.linear()) {
      Eigen::Map<Eigen::MatrixXd> d_w(grad_.data(), rows, n);
      d_w += upstream * inv_scale_.asDiagonal();
      return;
    }
    const Eigen::Index m = arch.output_dim, h = arch.hidden_width;
    Eigen::Map<Eigen::VectorXd> d_b1(grad_.data() + rows * n, h);
    Eigen::Map<Eigen::MatrixXd> d_w2(grad_.data() + model_.w2_offset(), m, h);
    // J = W2 diag(s) A with A = W1 diag(1/scale)
    const Eigen::MatrixXd ua = upstream * folded_.transpose();  // M x H
    d_w2 += ua * act.slope.asDiagonal();
    const Eigen::VectorXd d_slope = model_.w2().cwiseProduct(ua).colwise().sum().transpose();
    const Eigen::VectorXd d_pre = (d_slope.array() * (-2.0) * act.hidden.array() * act.slope.array()).matrix();
    d_b1 += d_pre;

    // dW1 += diag(s) W2^T upstream diag(1/scale) + d_pre z^T
    Eigen::MatrixXd left(h, m + 1), right(m + 1, n);
    left.leftCols(m) = act.slope.asDiagonal() * model_.w2().transpose();
    left.col(m) = d_pre;
    right.topRows(m) = upstream * inv_scale_.asDiagonal();
    right.row(m) = act.z.transpose();
    factors_.emplace_back(std::move(left), std::move(right));
  }

  Eigen::VectorXd take() {
    if (!factors_.empty()) {
      Eigen::Index width = 0;
      for (const auto& f : factors_) width += f.first.cols();
      Eigen::MatrixXd left(model_.first_rows(), width), right(width, model_.input_dim());
      Eigen::Index col = 0;
      for (const auto& f : factors_) {
        left.middleCols(col, f.first.cols()) = f.first;
        right.middleRows(col, f.first.cols()) = f.second;
        col += f.first.cols();
      }
      Eigen::Map<Eigen::MatrixXd> d_w1(grad_.data(), model_.first_rows(), model_.input_dim());
      d_w1.noalias() += left * right;
      factors_.clear();
    }
    return std::move(grad_);
  }

 private:
  const CoordinateModel& model_;
  Eigen::MatrixXd folded_;
  Eigen::VectorXd inv_scale_;
  Eigen::VectorXd grad_;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> factors_;
};

inline void require_rows(const Eigen::MatrixXd& m, Eigen::Index cols, const char* what) {
  if (m.cols() != cols)
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(m.cols()) +
                                                  " columns, expected " + std::to_string(cols));
}

/// Activations and Jacobians of the model at a set of points (one per row).
struct PointJacobians {
  std::vector<CoordinateModel::Activations> activations;
  std::vector<Eigen::MatrixXd> jacobians;
};

inline PointJacobians point_jacobians(const CoordinateModel& model, const Eigen::MatrixXd& folded,
                                      const Eigen::MatrixXd& points) {
  PointJacobians out;
  out.activations.reserve(static_cast<std::size_t>(points.rows()));
  out.jacobians.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    out.activations.push_back(model.activations(points.row(p).transpose()));
    out.jacobians.push_back(model.jacobian(out.activations.back(), folded));
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> zero_upstream(const PointJacobians& pj) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(pj.jacobians.size());
  for (const auto& j : pj.jacobians) out.push_back(Eigen::MatrixXd::Zero(j.rows(), j.cols()));
  return out;
}

inline Eigen::VectorXd backpropagate(const CoordinateModel& model, const PointJacobians& pj,
                                     const std::vector<Eigen::MatrixXd>& upstream) {
  JacobianBackprop backprop(model);
  for (std::size_t p = 0; p < upstream.size(); ++p) backprop.add(pj.activations[p], upstream[p]);
  return backprop.take();
}

/// Mean ||J P - 1||^2; adds dL/dJ to `upstream` when given.
inline double unit_velocity_terms(const PointJacobians& pj, const Eigen::MatrixXd& velocities,
                                  std::vector<Eigen::MatrixXd>* upstream) {
  const double inv_count = 1.0 / static_cast<double>(velocities.rows());
  double total = 0.0;
  for (std::size_t p = 0; p < pj.jacobians.size(); ++p) {
    const Eigen::VectorXd vel = velocities.row(static_cast<Eigen::Index>(p)).transpose();
    const Eigen::MatrixXd& jac = pj.jacobians[p];
    const Eigen::VectorXd err = jac * vel - Eigen::VectorXd::Ones(jac.rows());
    total += err.squaredNorm();
    if (upstream) (*upstream)[p] += (2.0 * inv_count) * err * vel.transpose();
  }
  return total * inv_count;
}

/// Mean relative residual over active rows; adds dL/dJ (per anchor) and dL/dalpha when given.
inline double coordinate_terms(const PointJacobians& pj, const AlphaTable& alphas, const TangentRows& rows,
                               std::vector<Eigen::MatrixXd>* upstream, Eigen::MatrixXd* alpha_grad) {
  const double inv_count = 1.0 / static_cast<double>(rows.active_count);
  if (alpha_grad) *alpha_grad = Eigen::MatrixXd::Zero(alphas.rows(), alphas.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (!rows.active[i]) continue;
    const Eigen::MatrixXd& jac = pj.jacobians[rows.anchor[i]];
    const Eigen::VectorXd v = rows.vectors.row(r).transpose();
    const Eigen::VectorXd alpha = alphas.row(r).transpose();
    const Eigen::VectorXd resid = v - jac.transpose() * alpha;
    const double inv_norm = 1.0 / v.squaredNorm();
    total += resid.squaredNorm() * inv_norm;
    const Eigen::VectorXd rho = (2.0 * inv_count * inv_norm) * resid;  // dL/d(resid)
    if (upstream) (*upstream)[rows.anchor[i]] -= alpha * rho.transpose();
    if (alpha_grad) alpha_grad->row(r) = -(jac * rho).transpose();
  }
  return total * inv_count;
}

struct BarrierValue {
  double value = 0.0;
  bool near_singular = false;  // det(J J^T + eps I) <= eps^M at some point
};

/// -beta * sum log det(J J^T + eps I); adds dB/dJ to `upstream` when given.
inline BarrierValue barrier_terms(const PointJacobians& pj, double eps, double beta,
                                  std::vector<Eigen::MatrixXd>* upstream) {
  BarrierValue out;
  if (beta == 0.0) return out;
  for (std::size_t p = 0; p < pj.jacobians.size(); ++p) {
    const Eigen::MatrixXd& jac = pj.jacobians[p];
    const Eigen::Index m = jac.rows();
    const Eigen::MatrixXd gram = jac * jac.transpose() + eps * Eigen::MatrixXd::Identity(m, m);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const double logdet = ldlt.vectorD().array().log().sum();
    if (logdet <= static_cast<double>(m) * std::log(eps)) out.near_singular = true;
    out.value -= beta * logdet;
    if (upstream) (*upstream)[p] += (-2.0 * beta) * ldlt.solve(jac);
  }
  return out;
}

/// Least-squares alpha for every row against the gradients at its anchor.
inline AlphaTable alphas_for(const PointJacobians& pj, const TangentRows& rows, Eigen::Index m) {
  AlphaTable alphas = Eigen::MatrixXd::Zero(rows.size(), m);
  Eigen::Index r = 0;
  while (r < rows.size()) {
    const std::size_t anchor = rows.anchor[static_cast<std::size_t>(r)];
    Eigen::Index end = r;
    while (end < rows.size() && rows.anchor[static_cast<std::size_t>(end)] == anchor) ++end;
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver(pj.jacobians[anchor].transpose());
    const Eigen::MatrixXd targets = rows.vectors.middleRows(r, end - r).transpose();
    alphas.middleRows(r, end - r) = solver.solve(targets).transpose();
    r = end;
  }
  return alphas;
}

inline void check_barrier(const CoordinateModel& model, const Eigen::MatrixXd& points, double eps, double beta) {
  if (!(eps > 0.0) || beta < 0.0) throw Error(ErrorCode::ParameterOutOfRange, "barrier needs eps > 0 and beta >= 0");
  require_rows(points, model.input_dim(), "barrier points");
}

}  // namespace detail

using detail::BarrierValue;

// ---------------------------------------------------------------------------
// Unit-velocity form: find m with J_m(x) P(x) = 1.

inline void check_unit_velocity(const CoordinateModel& model, const VectorFieldSamples& samples) {
  if (model.output_dim() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "unit-velocity model must be square");
  detail::require_rows(samples.points, model.input_dim(), "points");
  detail::require_rows(samples.velocities, model.input_dim(), "velocities");
  if (samples.points.rows() != samples.velocities.rows() || samples.points.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "need the same positive number of points and velocities");
}

/// Mean over samples of ||J_m(x) P(x) - 1||^2.
inline double loss_unit_velocity(const CoordinateModel& model, const VectorFieldSamples& samples) {
  check_unit_velocity(model, samples);
  const auto pj = detail::point_jacobians(model, model.folded_w1(), samples.points);
  return detail::unit_velocity_terms(pj, samples.velocities, nullptr);
}

inline ParameterGradient loss_unit_velocity_gradient(const CoordinateModel& model, const VectorFieldSamples& samples) {
  check_unit_velocity(model, samples);
  const auto pj = detail::point_jacobians(model, model.folded_w1(), samples.points);
  auto upstream = detail::zero_upstream(pj);
  ParameterGradient out;
  out.value = detail::unit_velocity_terms(pj, samples.velocities, &upstream);
  out.params = detail::backpropagate(model, pj, upstream);
  return out;
}

/// P(x) = J_m(x)^{-1} 1.
inline Eigen::VectorXd reconstruct_field(const CoordinateModel& model, const Eigen::Ref<const Eigen::VectorXd>& point,
                                         double min_singular_value = 1e-8) {
  if (model.output_dim() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "reconstruction needs a square Jacobian");
  const Eigen::MatrixXd jac = model.jacobian(point);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > min_singular_value))
    throw Error(ErrorCode::SingularJacobian, "smallest singular value " + format_double(sv[sv.size() - 1]));
  return svd.solve(Eigen::VectorXd::Ones(model.output_dim()));
}

// ---------------------------------------------------------------------------
// Intrinsic-coordinate form: V = sum_i alpha_i grad phi_i(f0) for every tangent V at f0.

inline void check_coordinates(const CoordinateModel& model, const AlphaTable& alphas, const TangentRows& rows,
                              const DataSet& ds) {
  if (rows.size() == 0 || rows.active_count == 0) throw Error(ErrorCode::EmptyBundles, "no tangent rows to fit");
  if (alphas.rows() != rows.size() || alphas.cols() != model.output_dim())
    throw Error(ErrorCode::DimensionMismatch, "alpha table must be rows x M");
  if (rows.vectors.cols() != model.input_dim() || ds.ambient_dim() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "tangent/model/dataset dimensions disagree");
  for (auto a : rows.anchor)
    if (a >= ds.size()) throw Error(ErrorCode::IndexOutOfRange, "tangent anchored at missing sample");
}

/// Per-row relative residuals ||V - J^T alpha||^2 / ||V||^2 (zero for inactive rows).
inline Eigen::VectorXd coordinate_residuals(const CoordinateModel& model, const AlphaTable& alphas,
                                            const TangentRows& rows, const DataSet& ds) {
  check_coordinates(model, alphas, rows, ds);
  const Eigen::MatrixXd folded = model.folded_w1();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows.size());
  std::optional<std::size_t> cached;
  Eigen::MatrixXd jac;
  for (Eigen::Index r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (!rows.active[i]) continue;
    if (cached != rows.anchor[i]) {
      jac = model.jacobian(model.activations(ds.samples[rows.anchor[i]].values), folded);
      cached = rows.anchor[i];
    }
    const Eigen::VectorXd v = rows.vectors.row(r).transpose();
    out[r] = (v - jac.transpose() * alphas.row(r).transpose()).squaredNorm() / v.squaredNorm();
  }
  return out;
}

/// Mean relative squared residual over active tangent rows.
inline double loss_coordinates(const CoordinateModel& model, const AlphaTable& alphas, const TangentRows& rows,
                               const DataSet& ds) {
  return coordinate_residuals(model, alphas, rows, ds).sum() / static_cast<double>(rows.active_count);
}

inline double loss_coordinates(const CoordinateModel& model, const AlphaTable& alphas,
                               const std::vector<TangentBundle>& bundles, const DataSet& ds) {
  return loss_coordinates(model, alphas, TangentRows::from_bundles(bundles), ds);
}

inline ParameterGradient loss_coordinates_gradient(const CoordinateModel& model, const AlphaTable& alphas,
                                                   const TangentRows& rows, const DataSet& ds) {
  check_coordinates(model, alphas, rows, ds);
  const auto pj = detail::point_jacobians(model, model.folded_w1(), ds.matrix());
  auto upstream = detail::zero_upstream(pj);
  ParameterGradient out;
  out.value = detail::coordinate_terms(pj, alphas, rows, &upstream, &out.alphas);
  out.params = detail::backpropagate(model, pj, upstream);
  return out;
}

/// Least-squares alpha for every row against the current gradients.
inline AlphaTable fit_alphas(const CoordinateModel& model, const TangentRows& rows, const DataSet& ds) {
  if (rows.vectors.cols() != model.input_dim() || ds.ambient_dim() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "tangent/model/dataset dimensions disagree");
  for (auto a : rows.anchor)
    if (a >= ds.size()) throw Error(ErrorCode::IndexOutOfRange, "tangent anchored at missing sample");
  const auto pj = detail::point_jacobians(model, model.folded_w1(), ds.matrix());
  return detail::alphas_for(pj, rows, model.output_dim());
}

// ---------------------------------------------------------------------------
// Barrier keeping the stacked Jacobian at full row rank.

/// -beta * sum_points log det(J J^T + eps I).
inline BarrierValue barrier(const CoordinateModel& model, const Eigen::MatrixXd& points, double eps, double beta) {
  detail::check_barrier(model, points, eps, beta);
  if (beta == 0.0) return {};
  const auto pj = detail::point_jacobians(model, model.folded_w1(), points);
  return detail::barrier_terms(pj, eps, beta, nullptr);
}

inline ParameterGradient barrier_gradient(const CoordinateModel& model, const Eigen::MatrixXd& points, double eps,
                                          double beta) {
  detail::check_barrier(model, points, eps, beta);
  ParameterGradient out;
  if (beta == 0.0) {
    out.params = Eigen::VectorXd::Zero(model.parameters().size());
    return out;
  }
  const auto pj = detail::point_jacobians(model, model.folded_w1(), points);
  auto upstream = detail::zero_upstream(pj);
  out.value = detail::barrier_terms(pj, eps, beta, &upstream).value;
  out.params = detail::backpropagate(model, pj, upstream);
  return out;
}

/// Smallest singular value of J_phi over the given points (one per row).
inline double min_jacobian_singular_value(const CoordinateModel& model, const Eigen::MatrixXd& points) {
  double worst = std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd folded = model.folded_w1();
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const Eigen::MatrixXd jac = model.jacobian(model.activations(points.row(p).transpose()), folded);
    const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(jac).singularValues();
    worst = std::min(worst, sv[sv.size() - 1]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Optimizer.

enum class Objective { UnitVelocity, Coordinates };
enum class AlphaUpdate { LeastSquares, Gradient };

inline std::string to_string(Objective o) { return o == Objective::UnitVelocity ? "unit_velocity" : "coordinates"; }
inline std::string to_string(AlphaUpdate a) { return a == AlphaUpdate::LeastSquares ? "least-squares" : "gradient"; }
inline AlphaUpdate parse_alpha_update(std::string_view s) {
  if (s == "least-squares") return AlphaUpdate::LeastSquares;
  if (s == "gradient") return AlphaUpdate::Gradient;
  throw Error(ErrorCode::InvalidConfig, "unknown alpha update '" + std::string(s) + "'");
}

struct ModelConfig {
  Eigen::Index output_dim = 2;
  Eigen::Index hidden_width = 64;  // 0 selects an affine model
  std::string activation = "tanh";
  double scale_floor = 1.0;        // see Standardization::fit
};

struct OptimizerConfig {
  std::uint64_t seed = 0;
  int steps = 5000;
  double step_size = 3e-3;
  double final_step_fraction = 0.05;  // cosine decay down to this fraction of step_size
  double beta = 1e-4;
  double beta_decay = 0.5;
  int beta_interval = 0;               // 0 means steps / 10
  double eps = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  AlphaUpdate alpha_update = AlphaUpdate::LeastSquares;
};

struct FitReport {
  Objective objective = Objective::Coordinates;
  std::vector<double> loss_history;      // objective loss (without barrier) at each iterate
  std::vector<double> best_history;      // best loss so far, nonincreasing
  std::vector<double> barrier_weights;   // beta used at each iterate
  int best_step = 0;
  double final_residual = 0.0;           // loss of the returned iterate, recomputed
  double min_jacobian_sv = 0.0;          // over all data points
  bool success = false;                  // finite fit with min_jacobian_sv > sqrt(eps)
  std::vector<std::string> warnings;
};

struct FitResult {
  CoordinateModel model;
  AlphaTable alphas;  // empty for the unit-velocity form
  FitReport report;
};

namespace detail {

class Adam {
 public:
  Adam(Eigen::Index size, const OptimizerConfig& config)
      : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), config_(config) {}

  void step(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = config_.adam_beta1 * m_ + (1.0 - config_.adam_beta1) * grad;
    v_ = config_.adam_beta2 * v_ + (1.0 - config_.adam_beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(config_.adam_beta2, t_);
    x.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.adam_eps);
  }

 private:
  Eigen::VectorXd m_, v_;
  OptimizerConfig config_;
  int t_ = 0;
};

inline void check_config(const OptimizerConfig& c) {
  if (c.steps < 1) throw Error(ErrorCode::InvalidConfig, "steps must be at least 1");
  if (!(c.step_size > 0.0) || !(c.eps > 0.0) || c.beta < 0.0 || !(c.beta_decay > 0.0) || c.beta_interval < 0 ||
      !(c.final_step_fraction > 0.0 && c.final_step_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "optimizer constants out of range");
}

inline double scheduled_step(const OptimizerConfig& c, int step) {
  const double progress = c.steps > 1 ? static_cast<double>(step) / static_cast<double>(c.steps - 1) : 0.0;
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return c.step_size * (c.final_step_fraction + (1.0 - c.final_step_fraction) * cosine);
}

inline double scheduled_beta(const OptimizerConfig& c, int step) {
  const int interval = c.beta_interval > 0 ? c.beta_interval : std::max(1, c.steps / 10);
  return c.beta * std::pow(c.beta_decay, step / interval);
}

/// Objective plus barrier at one iterate. `loss` excludes the barrier;
/// `params` is the gradient of both.
struct StepGradient {
  double loss = 0.0;
  Eigen::VectorXd params;
  Eigen::MatrixXd alphas;
  bool near_singular = false;
};

/// Shared loop. `evaluate(model, alphas, beta)` may refit alphas in place and
/// returns the objective and barrier gradient at the resulting iterate.
template <typename Evaluate>
FitResult descend(CoordinateModel model, AlphaTable alphas, const OptimizerConfig& config, Objective objective,
                  bool optimize_alphas, Evaluate evaluate) {
  check_config(config);
  FitResult best{model, alphas, {}};
  FitReport& report = best.report;
  report.objective = objective;
  Adam model_opt(model.parameters().size(), config);
  Adam alpha_opt(alphas.size(), config);
  double best_loss = std::numeric_limits<double>::infinity();
  bool warned_barrier = false;

  for (int step = 0; step < config.steps; ++step) {
    const double beta = scheduled_beta(config, step);
    const StepGradient g = evaluate(model, alphas, beta);
    if (!std::isfinite(g.loss))
      throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at step " + std::to_string(step));
    report.loss_history.push_back(g.loss);
    report.barrier_weights.push_back(beta);
    if (g.loss < best_loss) {
      best_loss = g.loss;
      best.model = model;
      best.alphas = alphas;
      report.best_step = step;
    }
    report.best_history.push_back(best_loss);
    if (!warned_barrier && g.near_singular) {
      report.warnings.push_back("Jacobian Gram determinant fell below eps^M at step " + std::to_string(step));
      warned_barrier = true;
    }
    if (!g.params.allFinite())
      throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient at step " + std::to_string(step));
    const double lr = scheduled_step(config, step);
    model_opt.step(model.parameters(), g.params, lr);
    if (optimize_alphas && g.alphas.size() == alphas.size()) {
      Eigen::Map<Eigen::VectorXd> flat(alphas.data(), alphas.size());
      alpha_opt.step(flat, Eigen::Map<const Eigen::VectorXd>(g.alphas.data(), g.alphas.size()), lr);
    }
    if (!model.parameters().allFinite() || !alphas.allFinite())
      throw Error(ErrorCode::NonFiniteLoss, "parameters became non-finite at step " + std::to_string(step));
  }
  if (config.steps > 1 && report.best_step == 0) report.warnings.push_back("NoImprovement: initial iterate was best");
  return best;
}

}  // namespace detail

inline FitResult optimize_unit_velocity(const VectorFieldSamples& samples, const ModelConfig& model_config,
                                        const OptimizerConfig& config) {
  const Eigen::Index n = samples.points.cols();
  if (samples.size() == 0 || samples.velocities.rows() != samples.size() || samples.velocities.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "points and velocities must have equal shapes");
  if (!samples.points.allFinite() || !samples.velocities.allFinite())
    throw Error(ErrorCode::ParseFailure, "vector field samples must be finite");
  std::mt19937_64 rng(config.seed);
  Architecture arch{n, n, model_config.hidden_width, model_config.activation};
  auto model = CoordinateModel::random(arch, Standardization::fit(samples.points, model_config.scale_floor), rng);

  auto result = detail::descend(std::move(model), AlphaTable{}, config, Objective::UnitVelocity, false,
                                [&](const CoordinateModel& m, AlphaTable&, double beta) {
                                  const auto pj = detail::point_jacobians(m, m.folded_w1(), samples.points);
                                  auto upstream = detail::zero_upstream(pj);
                                  detail::StepGradient g;
                                  g.loss = detail::unit_velocity_terms(pj, samples.velocities, &upstream);
                                  g.near_singular = detail::barrier_terms(pj, config.eps, beta, &upstream).near_singular;
                                  g.params = detail::backpropagate(m, pj, upstream);
                                  return g;
                                });
  auto& report = result.report;
  report.final_residual = loss_unit_velocity(result.model, samples);
  report.min_jacobian_sv = min_jacobian_singular_value(result.model, samples.points);
  report.success = report.min_jacobian_sv > std::sqrt(config.eps);
  return result;
}

inline FitResult optimize_coordinates(const DataSet& ds, const std::vector<TangentBundle>& bundles,
                                      const ModelConfig& model_config, const OptimizerConfig& config) {
  const TangentRows rows = TangentRows::from_bundles(bundles);
  if (rows.size() == 0 || rows.active_count == 0) throw Error(ErrorCode::EmptyBundles, "no tangent rows to fit");
  if (model_config.output_dim < 1 || model_config.output_dim > ds.ambient_dim())
    throw Error(ErrorCode::DimensionMismatch, "coordinate count must lie in [1, N]");
  const Eigen::MatrixXd points = ds.matrix();
  std::mt19937_64 rng(config.seed);
  Architecture arch{ds.ambient_dim(), model_config.output_dim, model_config.hidden_width, model_config.activation};
  auto model = CoordinateModel::random(arch, Standardization::fit(points, model_config.scale_floor), rng);
  AlphaTable alphas = fit_alphas(model, rows, ds);
  check_coordinates(model, alphas, rows, ds);

  const bool least_squares = config.alpha_update == AlphaUpdate::LeastSquares;
  auto result = detail::descend(
      std::move(model), std::move(alphas), config, Objective::Coordinates, !least_squares,
      [&](const CoordinateModel& m, AlphaTable& a, double beta) {
        const auto pj = detail::point_jacobians(m, m.folded_w1(), points);
        if (least_squares) a = detail::alphas_for(pj, rows, m.output_dim());
        auto upstream = detail::zero_upstream(pj);
        detail::StepGradient g;
        g.loss = detail::coordinate_terms(pj, a, rows, &upstream, least_squares ? nullptr : &g.alphas);
        g.near_singular = detail::barrier_terms(pj, config.eps, beta, &upstream).near_singular;
        g.params = detail::backpropagate(m, pj, upstream);
        return g;
      });
  auto& report = result.report;
  report.final_residual = loss_coordinates(result.model, result.alphas, rows, ds);
  report.min_jacobian_sv = min_jacobian_singular_value(result.model, points);
  report.success = report.min_jacobian_sv > std::sqrt(config.eps);
  return result;
}

/// phi applied to every sample.
inline std::vector<Eigen::VectorXd> embed(const CoordinateModel& model, const DataSet& ds) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(model.forward(s.values));
  return out;
}

/// Smallest distance between two embedded points; infinity for fewer than two.
inline double min_pairwise_distance(const std::vector<Eigen::VectorXd>& points) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, (points[i] - points[j]).norm());
  return best;
}

/// True when all embedded points are pairwise farther apart than `min_distance`.
inline bool is_injective(const std::vector<Eigen::VectorXd>& points, double min_distance = 1e-6) {
  return min_pairwise_distance(points) > min_distance;
}

}  // namespace otchart
