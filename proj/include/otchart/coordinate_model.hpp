#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "otchart/error.hpp"

namespace otchart {

/// Per-coordinate affine map z = (f - mean) / scale.
///
/// The scale is the per-coordinate standard deviation, floored at
/// `floor_fraction` times the root-mean-square deviation over all coordinates,
/// so nearly constant coordinates (density tails) are not blown up to unit
/// variance.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardization identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
  }

  /// `points` holds one sample per row.
  static Standardization fit(const Eigen::MatrixXd& points, double floor_fraction = 1.0) {
    const Eigen::Index n = points.cols();
    Standardization s;
    s.mean = points.colwise().mean().transpose();
    s.scale.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double var = (points.col(j).array() - s.mean[j]).square().mean();
      s.scale[j] = std::sqrt(var);
    }
    const double rms = std::sqrt(s.scale.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, n)));
    // Each scale is floored at floor_fraction * rms; constant coordinates fall back to rms (or 1).
    const double fallback = rms > 0.0 ? rms : 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      s.scale[j] = std::max(s.scale[j], floor_fraction * rms);
      if (!(s.scale[j] > 0.0)) s.scale[j] = fallback;
    }
    return s;
  }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& f) const {
    return ((f - mean).array() / scale.array()).matrix();
  }
};

/// Smooth map phi: R^N -> R^M. Either affine (hidden_width == 0) or a single
/// tanh hidden layer with a linear read-out, both acting on standardized input.
struct Architecture {
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  Eigen::Index hidden_width = 64;
  std::string activation = "tanh";

  bool linear() const noexcept { return hidden_width == 0; }

  Eigen::Index parameter_count() const noexcept {
    if (linear()) return output_dim * input_dim + output_dim;
    return hidden_width * input_dim + hidden_width + output_dim * hidden_width + output_dim;
  }

  bool operator==(const Architecture&) const = default;
};

class CoordinateModel {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  CoordinateModel() = default;

  CoordinateModel(Architecture arch, Standardization standardization, Vector params)
      : arch_(std::move(arch)), standardization_(std::move(standardization)), params_(std::move(params)) {
    if (arch_.activation != "tanh")
      throw Error(ErrorCode::InvalidConfig, "unsupported activation '" + arch_.activation + "'");
    if (arch_.input_dim <= 0 || arch_.output_dim <= 0 || arch_.hidden_width < 0)
      throw Error(ErrorCode::DimensionMismatch, "model dimensions must be positive");
    if (params_.size() != arch_.parameter_count())
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(arch_.parameter_count()) +
                                                    " parameters, got " + std::to_string(params_.size()));
    if (standardization_.mean.size() != arch_.input_dim || standardization_.scale.size() != arch_.input_dim)
      throw Error(ErrorCode::DimensionMismatch, "standardization does not match input dimension");
  }

  /// Seeded uniform initialization in +-1/sqrt(fan_in).
  static CoordinateModel random(Architecture arch, Standardization standardization, std::mt19937_64& rng) {
    Vector params(arch.parameter_count());
    auto fill = [&](Eigen::Index offset, Eigen::Index count, Eigen::Index fan_in) {
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < count; ++i) params[offset + i] = bound * dist(rng);
    };
    const Eigen::Index n = arch.input_dim, m = arch.output_dim, h = arch.hidden_width;
    if (arch.linear()) {
      fill(0, m * n + m, n);
    } else {
      fill(0, h * n + h, n);
      fill(h * n + h, m * h + m, h);
    }
    return CoordinateModel(std::move(arch), std::move(standardization), std::move(params));
  }

  /// phi(f) = W f + b on raw (unstandardized) input.
  static CoordinateModel affine(const Matrix& weights, const Vector& bias) {
    Architecture arch{weights.cols(), weights.rows(), 0, "tanh"};
    Vector params(arch.parameter_count());
    params.head(weights.size()) = Eigen::Map<const Vector>(weights.data(), weights.size());
    params.tail(bias.size()) = bias;
    return CoordinateModel(arch, Standardization::identity(weights.cols()), std::move(params));
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const Standardization& standardization() const noexcept { return standardization_; }
  const Vector& parameters() const noexcept { return params_; }
  Vector& parameters() noexcept { return params_; }
  Eigen::Index input_dim() const noexcept { return arch_.input_dim; }
  Eigen::Index output_dim() const noexcept { return arch_.output_dim; }

  // Parameter blocks. Linear models expose only weights()/bias() via W1/b1 slots.
  ConstMatrixMap w1() const { return {params_.data(), first_rows(), arch_.input_dim}; }
  Eigen::Map<const Vector> b1() const { return {params_.data() + first_rows() * arch_.input_dim, first_rows()}; }
  ConstMatrixMap w2() const { return {params_.data() + w2_offset(), arch_.output_dim, arch_.hidden_width}; }
  Eigen::Map<const Vector> b2() const { return {params_.data() + w2_offset() + arch_.output_dim * arch_.hidden_width, arch_.output_dim}; }

  Eigen::Index first_rows() const noexcept { return arch_.linear() ? arch_.output_dim : arch_.hidden_width; }
  Eigen::Index w2_offset() const noexcept { return first_rows() * arch_.input_dim + first_rows(); }

  /// First-layer weights with the standardization folded in: W1 diag(1/scale).
  Matrix folded_w1() const { return w1() * standardization_.scale.cwiseInverse().asDiagonal(); }

  struct Activations {
    Vector z;       // standardized input
    Vector hidden;  // tanh(W1 z + b1); empty for linear models
    Vector slope;   // 1 - hidden^2
  };

  Activations activations(const Eigen::Ref<const Vector>& f) const {
    check_input(f);
    Activations act;
    act.z = standardization_.apply(f);
    if (!arch_.linear()) {
      act.hidden = (w1() * act.z + b1()).array().tanh().matrix();
      act.slope = (1.0 - act.hidden.array().square()).matrix();
    }
    return act;
  }

  Vector forward(const Eigen::Ref<const Vector>& f) const {
    const auto act = activations(f);
    if (arch_.linear()) return w1() * act.z + b1();
    return w2() * act.hidden + b2();
  }

  /// M x N Jacobian with respect to the raw input.
  Matrix jacobian(const Eigen::Ref<const Vector>& f) const { return jacobian(activations(f), folded_w1()); }

  Matrix jacobian(const Activations& act, const Matrix& folded) const {
    if (arch_.linear()) return folded;
    const Matrix scaled = w2() * act.slope.asDiagonal();
    return scaled * folded;
  }

 private:
  void check_input(const Eigen::Ref<const Vector>& f) const {
    if (f.size() != arch_.input_dim)
      throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(f.size()) + " entries, model expects " +
                                                    std::to_string(arch_.input_dim));
  }

  Architecture arch_;
  Standardization standardization_;
  Vector params_;
};

}  // namespace otchart
