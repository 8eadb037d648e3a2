#pragma once

// Reference computations for the test suite. Each one is written independently
// of the library code path it checks (closed forms, brute-force loops, finite
// differences, eigen-decomposition instead of SVD).

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_pdf_prime(double x, double mu, double sigma) {
  return -(x - mu) / (sigma * sigma) * normal_pdf(x, mu, sigma);
}

inline double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

/// Quantile of N(mu, sigma) by bisection on the closed-form CDF.
inline double normal_quantile(double u, double mu, double sigma) {
  double lo = mu - 40.0 * sigma, hi = mu + 40.0 * sigma;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid, mu, sigma) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Monotone map pushing N(mu_t, s_t) onto N(mu_s, s_s): T(x) = mu_s + s_s (x - mu_t) / s_t.
inline double gaussian_map(double x, double mu_src, double s_src, double mu_tgt, double s_tgt) {
  return mu_src + s_src * (x - mu_tgt) / s_tgt;
}

struct Moments {
  double mass = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

/// Rectangle-rule moments of a sampled density.
inline Moments moments(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
  const double h = x[1] - x[0];
  Moments m;
  double first = 0.0, second = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    m.mass += f[i] * h;
    first += x[i] * f[i] * h;
  }
  m.mean = first / m.mass;
  for (Eigen::Index i = 0; i < x.size(); ++i) second += (x[i] - m.mean) * (x[i] - m.mean) * f[i] * h;
  m.sd = std::sqrt(second / m.mass);
  return m;
}

/// Numerical rank from the Gram matrix of unit-normalized rows: sqrt(lambda_j / lambda_1) >= rel_tol.
inline int gram_rank(const Eigen::MatrixXd& rows, double rel_tol) {
  Eigen::MatrixXd unit = rows;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const double n = unit.row(r).norm();
    if (n > 0.0) unit.row(r) /= n;
  }
  const Eigen::MatrixXd gram = unit * unit.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
  if (!(lambda[0] > 0.0)) return 0;
  int rank = 0;
  for (Eigen::Index j = 0; j < lambda.size(); ++j)
    if (lambda[j] > 0.0 && std::sqrt(lambda[j] / lambda[0]) >= rel_tol) ++rank;
  return rank;
}

/// Determinant of the Gram matrix of the first d rows.
inline double gram_determinant(const Eigen::MatrixXd& rows) {
  return (rows * rows.transpose()).determinant();
}

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Central finite-difference Jacobian of a vector function, step h per input coordinate.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   Eigen::VectorXd x, const Eigen::VectorXd& h) {
  const Eigen::Index m = f(x).size();
  Eigen::MatrixXd jac(m, x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h[i];
    const Eigen::VectorXd up = f(x);
    x[i] = keep - h[i];
    const Eigen::VectorXd down = f(x);
    x[i] = keep;
    jac.col(i) = (up - down) / (2.0 * h[i]);
  }
  return jac;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

/// phi(x) = W2 tanh(W1 (x - mean)/scale + b1) + b2, evaluated entry by entry.
inline Eigen::VectorXd tanh_network(const Eigen::MatrixXd& w1, const Eigen::VectorXd& b1, const Eigen::MatrixXd& w2,
                                    const Eigen::VectorXd& b2, const Eigen::VectorXd& mean,
                                    const Eigen::VectorXd& scale, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = b2;
  for (Eigen::Index h = 0; h < w1.rows(); ++h) {
    double pre = b1[h];
    for (Eigen::Index n = 0; n < x.size(); ++n) pre += w1(h, n) * (x[n] - mean[n]) / scale[n];
    const double a = std::tanh(pre);
    for (Eigen::Index m = 0; m < w2.rows(); ++m) out[m] += w2(m, h) * a;
  }
  return out;
}

/// k rows spanning a random d-dimensional subspace of R^n, plus isotropic noise
/// of relative size `noise` (1e-3 keeps the spectral gap above 40 dB).
inline Eigen::MatrixXd synthetic_bundle(std::mt19937_64& rng, int d, Eigen::Index n, Eigen::Index k,
                                        double noise = 1e-3) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(draw(n, d)).householderQ() *
                                Eigen::MatrixXd::Identity(n, d);
  Eigen::MatrixXd rows = draw(k, d) * basis.transpose();
  for (Eigen::Index r = 0; r < k; ++r) rows.row(r) /= rows.row(r).norm();
  return rows + (noise / std::sqrt(static_cast<double>(n))) * draw(k, n);
}

}  // namespace oracle
