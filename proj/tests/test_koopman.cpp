#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "otchart/checkpoint.hpp"
#include "otchart/koopman.hpp"
#include "otchart/tangent.hpp"

using namespace otchart;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an otchart::Error";
  return ErrorCode::InvalidConfig;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

/// Network with a nontrivial standardization fitted to random points.
CoordinateModel random_network(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, Eigen::Index h) {
  Eigen::MatrixXd points = random_matrix(rng, 12, n);
  for (Eigen::Index j = 0; j < n; ++j) points.col(j) = points.col(j) * (0.5 + static_cast<double>(j)) + Eigen::VectorXd::Constant(12, 0.3 * static_cast<double>(j));
  auto model = CoordinateModel::random({n, m, h, "tanh"}, Standardization::fit(points, 0.5), rng);
  model.parameters() *= 1.5;
  return model;
}

/// Small dataset with k tangent rows per anchor, independent of any transport.
struct CoordinateProblem {
  DataSet ds;
  TangentRows rows;
};

CoordinateProblem random_problem(std::mt19937_64& rng, Eigen::Index n, std::size_t count, Eigen::Index k) {
  CoordinateProblem p;
  std::vector<double> nodes;
  for (Eigen::Index j = 0; j < n; ++j) nodes.push_back(static_cast<double>(j));
  p.ds.grid = std::make_shared<const Grid>(Grid::from_nodes(nodes));
  std::vector<TangentBundle> bundles;
  for (std::size_t i = 0; i < count; ++i) {
    DensitySample s;
    s.grid = p.ds.grid;
    s.values = random_matrix(rng, n, 1).col(0);
    p.ds.samples.push_back(s);
    TangentBundle b;
    b.anchor_index = i;
    b.vectors = random_matrix(rng, k, n);
    for (Eigen::Index r = 0; r < k; ++r) {
      b.neighbor_indices.push_back((i + static_cast<std::size_t>(r) + 1) % count);
      b.degenerate.push_back(false);
    }
    bundles.push_back(b);
  }
  p.rows = TangentRows::from_bundles(bundles);
  return p;
}

/// Residuals recomputed with finite-difference Jacobians and explicit loops.
double brute_force_coordinate_loss(const CoordinateModel& model, const AlphaTable& alphas, const TangentRows& rows,
                                   const DataSet& ds) {
  double total = 0.0;
  std::size_t active = 0;
  for (Eigen::Index r = 0; r < rows.size(); ++r) {
    if (!rows.active[static_cast<std::size_t>(r)]) continue;
    const Eigen::VectorXd x = ds.samples[rows.anchor[static_cast<std::size_t>(r)]].values;
    const Eigen::VectorXd h = 1e-5 * model.standardization().scale;
    const Eigen::MatrixXd jac =
        oracle::fd_jacobian([&](const Eigen::VectorXd& f) { return model.forward(f); }, x, h);
    double num = 0.0, den = 0.0;
    for (Eigen::Index c = 0; c < jac.cols(); ++c) {
      double fit = 0.0;
      for (Eigen::Index m = 0; m < jac.rows(); ++m) fit += alphas(r, m) * jac(m, c);
      num += (rows.vectors(r, c) - fit) * (rows.vectors(r, c) - fit);
      den += rows.vectors(r, c) * rows.vectors(r, c);
    }
    total += num / den;
    ++active;
  }
  return total / static_cast<double>(active);
}

VectorFieldSamples constant_field(std::mt19937_64& rng, Eigen::Index count, const Eigen::Vector2d& p) {
  VectorFieldSamples s;
  s.points = random_matrix(rng, count, 2, 2.0);
  s.velocities = p.transpose().replicate(count, 1);
  return s;
}

}  // namespace

TEST(CoordinateModel, ForwardMatchesExplicitNetwork) {
  std::mt19937_64 rng(1);
  const auto model = random_network(rng, 5, 3, 7);
  const Eigen::VectorXd x = random_matrix(rng, 5, 1).col(0);
  const auto& st = model.standardization();
  const Eigen::VectorXd expect = oracle::tanh_network(model.w1(), model.b1(), model.w2(), model.b2(), st.mean, st.scale, x);
  EXPECT_LE((model.forward(x) - expect).norm(), 1e-12);
}

TEST(CoordinateModel, JacobianMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    for (const Eigen::Index hidden : {Eigen::Index{0}, Eigen::Index{6}}) {
      const auto model = random_network(rng, 4, 3, hidden);
      const Eigen::VectorXd x = random_matrix(rng, 4, 1).col(0);
      const Eigen::VectorXd h = 1e-4 * model.standardization().scale;
      const Eigen::MatrixXd fd = oracle::fd_jacobian([&](const Eigen::VectorXd& f) { return model.forward(f); }, x, h);
      const Eigen::MatrixXd jac = model.jacobian(x);
      EXPECT_LE((jac - fd).norm() / jac.norm(), 1e-5) << "seed " << seed << " hidden " << hidden;
    }
  }
}

TEST(CoordinateModel, ValidatesShapes) {
  EXPECT_EQ(code_of([] { CoordinateModel({3, 2, 4, "tanh"}, Standardization::identity(3), Eigen::VectorXd::Zero(5)); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { CoordinateModel({3, 2, 0, "relu"}, Standardization::identity(3), Eigen::VectorXd::Zero(8)); }),
            ErrorCode::InvalidConfig);
  const auto model = CoordinateModel::affine(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(code_of([&] { model.forward(Eigen::VectorXd::Zero(3)); }), ErrorCode::DimensionMismatch);
}

TEST(Standardization, FloorLimitsTailAmplification) {
  Eigen::MatrixXd points(4, 3);
  points << 0, 1, 5, 0, 3, 5, 0, 5, 5, 1e-9, 7, 5;
  const auto pure = Standardization::fit(points, 0.0);
  EXPECT_NEAR(pure.scale[1], std::sqrt(5.0), 1e-12);
  EXPECT_GT(pure.scale[0], 0.0);
  EXPECT_LT(pure.scale[0], 1e-8);
  EXPECT_GT(pure.scale[2], 0.0);
  const auto floored = Standardization::fit(points, 1.0);
  EXPECT_GT(floored.scale[0], 1.0);
  EXPECT_EQ(floored.scale[1], floored.scale.maxCoeff());
}

TEST(UnitVelocityLoss, IdentityModelExamples) {
  const auto identity = CoordinateModel::affine(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  std::mt19937_64 rng(4);
  EXPECT_NEAR(loss_unit_velocity(identity, constant_field(rng, 10, {1, 1})), 0.0, 1e-15);
  EXPECT_NEAR(loss_unit_velocity(identity, constant_field(rng, 10, {2, 0})), 2.0, 1e-12);
}

TEST(UnitVelocityLoss, RandomLinearModelMatchesMatrixArithmetic) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd w = random_matrix(rng, 3, 3);
  const auto model = CoordinateModel::affine(w, random_matrix(rng, 3, 1).col(0));
  VectorFieldSamples s;
  s.points = random_matrix(rng, 20, 3);
  s.velocities = random_matrix(rng, 20, 3);
  double expect = 0.0;
  for (Eigen::Index p = 0; p < 20; ++p) {
    for (Eigen::Index i = 0; i < 3; ++i) {
      double wp = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) wp += w(i, j) * s.velocities(p, j);
      expect += (wp - 1.0) * (wp - 1.0);
    }
  }
  EXPECT_NEAR(loss_unit_velocity(model, s), expect / 20.0, 1e-10);
}

TEST(ReconstructField, InvertsTheJacobian) {
  const auto identity = CoordinateModel::affine(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  EXPECT_LE((reconstruct_field(identity, Eigen::Vector2d(0.3, -1)) - Eigen::Vector2d(1, 1)).norm(), 1e-14);
  const auto diag = CoordinateModel::affine(Eigen::Vector2d(0.5, 1.0 / 3.0).asDiagonal(), Eigen::VectorXd::Zero(2));
  EXPECT_LE((reconstruct_field(diag, Eigen::Vector2d(4, 2)) - Eigen::Vector2d(2, 3)).norm(), 1e-12);
  Eigen::MatrixXd singular(2, 2);
  singular << 1, 1, 1, 1;
  EXPECT_EQ(code_of([&] { reconstruct_field(CoordinateModel::affine(singular, Eigen::VectorXd::Zero(2)), Eigen::Vector2d(0, 0)); }),
            ErrorCode::SingularJacobian);
}

TEST(ReconstructField, ZeroLossImpliesExactReconstruction) {
  Eigen::MatrixXd w(2, 2);
  w << 2, -1, 0.5, 0.5;  // w * (1, 1) = (1, 1)
  const auto model = CoordinateModel::affine(w, Eigen::Vector2d(3, -2));
  std::mt19937_64 rng(6);
  const auto s = constant_field(rng, 15, {1, 1});
  ASSERT_NEAR(loss_unit_velocity(model, s), 0.0, 1e-20);
  for (Eigen::Index p = 0; p < s.size(); ++p)
    EXPECT_LE((reconstruct_field(model, s.points.row(p).transpose()) - Eigen::Vector2d(1, 1)).norm(), 1e-8);
}

TEST(CoordinateLoss, ExactDecompositionAndZeroAlpha) {
  std::mt19937_64 rng(12);
  auto p = random_problem(rng, 4, 3, 2);
  const auto identity = CoordinateModel::affine(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4));
  EXPECT_NEAR(loss_coordinates(identity, p.rows.vectors, p.rows, p.ds), 0.0, 1e-15);
  const AlphaTable zero = AlphaTable::Zero(p.rows.size(), 4);
  EXPECT_NEAR(loss_coordinates(identity, zero, p.rows, p.ds), 1.0, 1e-15);
}

TEST(CoordinateLoss, MatchesBruteForceRecomputation) {
  std::mt19937_64 rng(13);
  auto p = random_problem(rng, 6, 4, 3);
  const auto model = random_network(rng, 6, 2, 5);
  const AlphaTable alphas = random_matrix(rng, p.rows.size(), 2);
  EXPECT_NEAR(loss_coordinates(model, alphas, p.rows, p.ds), brute_force_coordinate_loss(model, alphas, p.rows, p.ds), 1e-7);
  const AlphaTable fitted = fit_alphas(model, p.rows, p.ds);
  EXPECT_LE(loss_coordinates(model, fitted, p.rows, p.ds), loss_coordinates(model, alphas, p.rows, p.ds));
}

TEST(CoordinateLoss, ZeroTangentRowsAreInactive) {
  std::mt19937_64 rng(14);
  auto p = random_problem(rng, 4, 3, 2);
  p.rows.vectors.row(1).setZero();
  p.rows.active[1] = false;
  p.rows.active_count -= 1;
  const auto identity = CoordinateModel::affine(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4));
  const AlphaTable zero = AlphaTable::Zero(p.rows.size(), 4);
  EXPECT_NEAR(loss_coordinates(identity, zero, p.rows, p.ds), 1.0, 1e-15);
  EXPECT_EQ(code_of([&] { loss_coordinates(identity, AlphaTable::Zero(2, 4), p.rows, p.ds); }), ErrorCode::DimensionMismatch);
}

TEST(Barrier, OrthonormalRowsContributeNothing) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 3);
  w(0, 0) = 1.0;
  w(1, 2) = 1.0;
  const auto model = CoordinateModel::affine(w, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd points = Eigen::MatrixXd::Random(5, 3);
  const auto b = barrier(model, points, 1e-12, 0.01);
  EXPECT_NEAR(b.value, 0.0, 1e-12);
  EXPECT_FALSE(b.near_singular);
}

TEST(Barrier, IdenticalRowsGiveTheRankDeficientPenalty) {
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 2, 1, 2, 2;  // |row|^2 = 9
  const auto model = CoordinateModel::affine(w, Eigen::VectorXd::Zero(2));
  const double eps = 1e-6, beta = 0.01;
  const Eigen::MatrixXd points = Eigen::MatrixXd::Random(4, 3);
  const double per_point = -beta * std::log(eps * 9.0 * 2.0);
  EXPECT_NEAR(barrier(model, points, eps, beta).value / 4.0, per_point, 1e-6 * std::abs(per_point));
  EXPECT_TRUE(barrier(CoordinateModel::affine(Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2)), points, eps, beta)
                  .near_singular);
}

TEST(Barrier, ZeroWeightIsExactlyZero) {
  std::mt19937_64 rng(3);
  const auto model = random_network(rng, 4, 2, 5);
  const Eigen::MatrixXd points = random_matrix(rng, 6, 4);
  EXPECT_EQ(barrier(model, points, 1e-8, 0.0).value, 0.0);
  const auto g = barrier_gradient(model, points, 1e-8, 0.0);
  EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(g.params.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(code_of([&] { barrier(model, points, 0.0, 1.0); }), ErrorCode::ParameterOutOfRange);
}

TEST(GradientCheck, UnitVelocityLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    auto model = random_network(rng, 3, 3, 4);
    VectorFieldSamples s;
    s.points = random_matrix(rng, 7, 3);
    s.velocities = random_matrix(rng, 7, 3);
    const Eigen::VectorXd theta = model.parameters();
    const auto g = loss_unit_velocity_gradient(model, s);
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& t) {
          model.parameters() = t;
          return loss_unit_velocity(model, s);
        },
        theta, 1e-6);
    model.parameters() = theta;
    EXPECT_LE(oracle::relative_error(g.params, fd), 1e-4) << "seed " << seed;
    EXPECT_NEAR(g.value, loss_unit_velocity(model, s), 1e-12);
  }
}

TEST(GradientCheck, CoordinateLossParametersAndAlphas) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(200 + seed);
    auto p = random_problem(rng, 5, 4, 3);
    auto model = random_network(rng, 5, 2, seed % 2 == 0 ? 4 : 0);
    AlphaTable alphas = random_matrix(rng, p.rows.size(), 2);
    const Eigen::VectorXd theta = model.parameters();
    const auto g = loss_coordinates_gradient(model, alphas, p.rows, p.ds);

    const Eigen::VectorXd fd_theta = oracle::fd_gradient(
        [&](const Eigen::VectorXd& t) {
          model.parameters() = t;
          return loss_coordinates(model, alphas, p.rows, p.ds);
        },
        theta, 1e-6);
    model.parameters() = theta;
    EXPECT_LE(oracle::relative_error(g.params, fd_theta), 1e-4) << "seed " << seed;

    const Eigen::VectorXd a0 = Eigen::Map<const Eigen::VectorXd>(alphas.data(), alphas.size());
    const Eigen::VectorXd fd_alpha = oracle::fd_gradient(
        [&](const Eigen::VectorXd& a) {
          AlphaTable trial = Eigen::Map<const Eigen::MatrixXd>(a.data(), alphas.rows(), alphas.cols());
          return loss_coordinates(model, trial, p.rows, p.ds);
        },
        a0, 1e-6);
    const Eigen::VectorXd analytic_alpha = Eigen::Map<const Eigen::VectorXd>(g.alphas.data(), g.alphas.size());
    EXPECT_LE(oracle::relative_error(analytic_alpha, fd_alpha), 1e-4) << "seed " << seed;
  }
}

TEST(GradientCheck, BarrierAndCombinedObjective) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(300 + seed);
    auto p = random_problem(rng, 5, 4, 2);
    auto model = random_network(rng, 5, 2, 4);
    const AlphaTable alphas = random_matrix(rng, p.rows.size(), 2);
    const Eigen::MatrixXd points = p.ds.matrix();
    const double eps = 1e-3, beta = 0.05;
    const Eigen::VectorXd theta = model.parameters();

    const auto gb = barrier_gradient(model, points, eps, beta);
    const Eigen::VectorXd fd_b = oracle::fd_gradient(
        [&](const Eigen::VectorXd& t) {
          model.parameters() = t;
          return barrier(model, points, eps, beta).value;
        },
        theta, 1e-6);
    model.parameters() = theta;
    EXPECT_LE(oracle::relative_error(gb.params, fd_b), 1e-4) << "seed " << seed;

    const Eigen::VectorXd total = loss_coordinates_gradient(model, alphas, p.rows, p.ds).params + gb.params;
    const Eigen::VectorXd fd_total = oracle::fd_gradient(
        [&](const Eigen::VectorXd& t) {
          model.parameters() = t;
          return loss_coordinates(model, alphas, p.rows, p.ds) + barrier(model, points, eps, beta).value;
        },
        theta, 1e-6);
    model.parameters() = theta;
    EXPECT_LE(oracle::relative_error(total, fd_total), 1e-4) << "seed " << seed;
  }
}

TEST(Optimize, StepsOneContract) {
  std::mt19937_64 rng(15);
  auto p = random_problem(rng, 6, 5, 2);
  std::vector<TangentBundle> bundles;
  for (std::size_t a = 0; a < p.ds.size(); ++a) {
    TangentBundle b;
    b.anchor_index = a;
    b.vectors = p.rows.vectors.middleRows(static_cast<Eigen::Index>(2 * a), 2);
    b.neighbor_indices = {p.rows.neighbor[2 * a], p.rows.neighbor[2 * a + 1]};
    b.degenerate = {false, false};
    bundles.push_back(b);
  }
  OptimizerConfig opt;
  opt.steps = 1;
  opt.seed = 42;
  ModelConfig mc;
  mc.hidden_width = 8;
  const auto fit = optimize_coordinates(p.ds, bundles, mc, opt);
  EXPECT_EQ(fit.report.loss_history.size(), 1u);
  EXPECT_EQ(fit.report.best_step, 0);
  std::mt19937_64 init_rng(42);
  const auto initial = CoordinateModel::random({6, 2, 8, "tanh"}, Standardization::fit(p.ds.matrix(), mc.scale_floor), init_rng);
  EXPECT_EQ(fit.model.parameters(), initial.parameters());
  EXPECT_EQ(code_of([&] {
              OptimizerConfig bad;
              bad.steps = 0;
              optimize_coordinates(p.ds, bundles, mc, bad);
            }),
            ErrorCode::InvalidConfig);
}

namespace {

struct GaussianProblem {
  DataSet ds;
  std::vector<TangentBundle> bundles;
};

GaussianProblem small_gaussian_problem() {
  GaussianProblem p;
  p.ds = gaussian_family(arithmetic_range(80, 120, 20), arithmetic_range(8, 16, 4), Grid::uniform(0, 200, 2));
  const auto graph = build_graph(p.ds, 4, Metric::Wasserstein2);
  const auto plans = make_plan_set(pairwise_plans(p.ds, edge_pairs(graph, PlanOrientation::NeighborSource)));
  p.bundles = all_bundles(p.ds, graph, plans);
  return p;
}

}  // namespace

TEST(Optimize, CoordinateFitReportContracts) {
  const auto p = small_gaussian_problem();
  ModelConfig mc;
  mc.hidden_width = 16;
  OptimizerConfig opt;
  opt.steps = 400;
  opt.seed = 3;
  const auto fit = optimize_coordinates(p.ds, p.bundles, mc, opt);
  const auto& r = fit.report;
  ASSERT_EQ(r.loss_history.size(), 400u);
  ASSERT_EQ(r.best_history.size(), 400u);
  ASSERT_EQ(r.barrier_weights.size(), 400u);
  for (std::size_t i = 1; i < r.best_history.size(); ++i) EXPECT_LE(r.best_history[i], r.best_history[i - 1]);
  EXPECT_EQ(r.best_history.back(), r.loss_history[static_cast<std::size_t>(r.best_step)]);
  EXPECT_LT(r.best_history.back(), r.loss_history.front());
  EXPECT_TRUE(fit.model.parameters().allFinite());
  EXPECT_TRUE(fit.alphas.allFinite());

  // final_residual against an explicit row-by-row recomputation
  const auto rows = TangentRows::from_bundles(p.bundles);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    const Eigen::MatrixXd jac = fit.model.jacobian(p.ds.samples[rows.anchor[static_cast<std::size_t>(i)]].values);
    const Eigen::VectorXd v = rows.vectors.row(i).transpose();
    total += (v - jac.transpose() * fit.alphas.row(i).transpose()).squaredNorm() / v.squaredNorm();
  }
  EXPECT_NEAR(r.final_residual, total / static_cast<double>(rows.size()), 1e-12);
  EXPECT_NEAR(r.final_residual, r.best_history.back(), 1e-12);

  EXPECT_TRUE(r.success);
  EXPECT_GT(r.min_jacobian_sv, std::sqrt(opt.eps));
  EXPECT_EQ(r.min_jacobian_sv, min_jacobian_singular_value(fit.model, p.ds.matrix()));
  EXPECT_TRUE(is_injective(embed(fit.model, p.ds)));
}

TEST(Optimize, GradientAlphaUpdateAlsoDescends) {
  const auto p = small_gaussian_problem();
  ModelConfig mc;
  mc.hidden_width = 8;
  OptimizerConfig opt;
  opt.steps = 200;
  opt.alpha_update = AlphaUpdate::Gradient;
  const auto fit = optimize_coordinates(p.ds, p.bundles, mc, opt);
  EXPECT_LT(fit.report.final_residual, fit.report.loss_history.front());
  EXPECT_NEAR(fit.report.final_residual, loss_coordinates(fit.model, fit.alphas, p.bundles, p.ds), 1e-12);
}

TEST(Optimize, SameSeedSameResult) {
  const auto p = small_gaussian_problem();
  ModelConfig mc;
  mc.hidden_width = 8;
  OptimizerConfig opt;
  opt.steps = 50;
  opt.seed = 9;
  const auto a = optimize_coordinates(p.ds, p.bundles, mc, opt);
  const auto b = optimize_coordinates(p.ds, p.bundles, mc, opt);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  EXPECT_EQ(a.report.loss_history, b.report.loss_history);
  opt.seed = 10;
  const auto c = optimize_coordinates(p.ds, p.bundles, mc, opt);
  EXPECT_NE(a.model.parameters(), c.model.parameters());
}

TEST(Optimize, UnitVelocityLinearModelRecoversConstantField) {
  std::mt19937_64 rng(0);
  const auto samples = constant_field(rng, 100, {1, 1});
  ModelConfig mc;
  mc.hidden_width = 0;
  OptimizerConfig opt;
  opt.steps = 500;
  opt.step_size = 5e-2;
  const auto fit = optimize_unit_velocity(samples, mc, opt);
  EXPECT_LE(fit.report.final_residual, 1e-4);
  EXPECT_TRUE(fit.report.success);
  for (Eigen::Index i = 0; i < samples.size(); ++i)
    EXPECT_LE((reconstruct_field(fit.model, samples.points.row(i).transpose()) - Eigen::Vector2d(1, 1)).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Optimize, NonFiniteLossIsReported) {
  std::mt19937_64 rng(1);
  auto samples = constant_field(rng, 10, {1e300, 1e300});
  ModelConfig mc;
  mc.hidden_width = 0;
  OptimizerConfig opt;
  opt.steps = 5;
  EXPECT_EQ(code_of([&] { optimize_unit_velocity(samples, mc, opt); }), ErrorCode::NonFiniteLoss);
  EXPECT_TRUE(is_numerical(ErrorCode::NonFiniteLoss));
}

TEST(Embed, IdentityModelReturnsTheData) {
  std::mt19937_64 rng(2);
  auto p = random_problem(rng, 4, 5, 1);
  const auto identity = CoordinateModel::affine(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4));
  const auto points = embed(identity, p.ds);
  ASSERT_EQ(points.size(), 5u);
  for (std::size_t i = 0; i < points.size(); ++i) EXPECT_EQ(points[i], p.ds.samples[i].values);
  EXPECT_TRUE(is_injective(points));
}

TEST(Embed, ConstantModelIsFlaggedAsNotInjective) {
  std::mt19937_64 rng(2);
  auto p = random_problem(rng, 4, 5, 1);
  const auto constant = CoordinateModel::affine(Eigen::MatrixXd::Zero(2, 4), Eigen::Vector2d(0.5, -1));
  const auto points = embed(constant, p.ds);
  for (const auto& q : points) EXPECT_EQ(q, Eigen::Vector2d(0.5, -1));
  EXPECT_EQ(min_pairwise_distance(points), 0.0);
  EXPECT_FALSE(is_injective(points));
}

TEST(Checkpoint, RoundTripReproducesTheModel) {
  std::mt19937_64 rng(5);
  const auto model = random_network(rng, 6, 2, 5);
  const auto path = std::filesystem::temp_directory_path() / "otchart_test_checkpoint.json";
  save_model(model, path);
  const auto back = load_model(path);
  EXPECT_EQ(back.architecture(), model.architecture());
  EXPECT_EQ(back.parameters(), model.parameters());
  EXPECT_EQ(back.standardization().scale, model.standardization().scale);
  const Eigen::VectorXd x = random_matrix(rng, 6, 1).col(0);
  EXPECT_EQ(back.forward(x), model.forward(x));
  nlohmann::json bad = model_to_json(model);
  bad["format"] = "something-else";
  EXPECT_EQ(code_of([&] { model_from_json(bad); }), ErrorCode::ParseFailure);
}
