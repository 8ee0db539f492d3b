#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "hsiscale/candidates.hpp"
#include "hsiscale/correction.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/metrics.hpp"
#include "hsiscale/pso.hpp"
#include "hsiscale/sphere_descent.hpp"
#include "hsiscale/synth.hpp"
#include "test_util.hpp"

using namespace hsiscale;

namespace {

PixelMatrix three_pixels() {
  PixelMatrix y(2, 3);
  y << 3, 0, 1, 0, 1, 1;
  return y;
}

SynthConfig small_scene(std::size_t k, double sigma, std::uint64_t seed, std::size_t side = 32,
                        std::size_t bands = 20) {
  SynthConfig c;
  c.height = c.width = side;
  c.bands = bands;
  c.endmembers = k;
  c.scale_std = sigma;
  c.seed = seed;
  return c;
}

// Normal of the hyperplane through the reduced endmembers: (B M)^T n = 1.
Eigen::VectorXd true_normal(const ReducedData& r, const Eigen::MatrixXd& endmembers) {
  const Eigen::MatrixXd reduced_m = r.basis * endmembers;
  Eigen::VectorXd n = reduced_m.transpose().fullPivLu().solve(Eigen::VectorXd::Ones(reduced_m.cols()));
  return n.normalized();
}

Eigen::VectorXd at_angle(double t) { return Eigen::Vector2d(std::cos(t), std::sin(t)); }

// Exhaustive search over n = (cos t, sin t), t in [0, pi), at `step`, then
// golden-section refinement inside the winning cell.
struct GridOracle {
  double theta;
  double psi_grid;
  double psi;
};

GridOracle grid_oracle(const PsiObjective& obj, double step = 0.0005) {
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (double t = 0.0; t < std::numbers::pi; t += step) {
    const double v = obj.value(at_angle(t)).psi;
    if (v < best) {
      best = v;
      arg = t;
    }
  }
  double a = arg - step, b = arg + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200 && b - a > 1e-13; ++i) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (obj.value(at_angle(c)).psi < obj.value(at_angle(d)).psi)
      b = d;
    else
      a = c;
  }
  const double t = 0.5 * (a + b);
  return {t, best, std::min(best, obj.value(at_angle(t)).psi)};
}

// Angle between two lines through the origin (sign-free).
double line_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd u = a.normalized(), v = b.normalized();
  const double c = u.dot(v);
  return std::atan2((u - c * v).norm(), std::abs(c));
}

}  // namespace

// ---------------------------------------------------------------- mean point / model

TEST(MeanPoint, SmallExample) {
  const Eigen::VectorXd c = mean_point(three_pixels());
  EXPECT_NEAR(c[0], 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(c[1], 2.0 / 3.0, 1e-15);
}

TEST(MeanPoint, IdenticalAndSymmetricPixels) {
  const Eigen::Vector3d p(0.1, 0.7, 0.3);
  EXPECT_EQ(mean_point(PixelMatrix(p.replicate(1, 1000))), Eigen::VectorXd(p));
  PixelMatrix sym(2, 4);
  sym << 1, -1, 2, -2, 3, -3, 0.5, -0.5;
  EXPECT_EQ(mean_point(sym).norm(), 0.0);
  EXPECT_THROW(mean_point(PixelMatrix(2, 0)), DimensionError);
  // Zero c* leaves no admissible normal.
  EXPECT_THROW(HyperplaneModel(mean_point(sym), Eigen::Vector2d(1, 0), denom_floor(sym)), NearOrthogonalNormalError);
}

TEST(HyperplaneModel, NormalizesAndOrients) {
  const HyperplaneModel m(Eigen::Vector2d(1, 2), Eigen::Vector2d(-3, -4));
  EXPECT_NEAR(m.normal().norm(), 1.0, 1e-15);
  EXPECT_GT(m.denom(), 0.0);
  EXPECT_NEAR(m.normal()[0], 0.6, 1e-15);
  EXPECT_THROW(HyperplaneModel(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), 1e-9), NearOrthogonalNormalError);
  EXPECT_THROW(HyperplaneModel(Eigen::Vector2d(1, 0), Eigen::Vector3d(0, 1, 0)), DimensionError);
  EXPECT_THROW(HyperplaneModel(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0)), ValidationError);
}

// ---------------------------------------------------------------- scaling estimate

TEST(EstimateScaling, SmallExample) {
  const PixelMatrix y = three_pixels();
  const HyperplaneModel m(mean_point(y), Eigen::Vector2d(1, 1));
  const Eigen::VectorXd mu = raw_scaling(y, m);
  EXPECT_NEAR(mu[0], 1.5, 1e-15);
  EXPECT_NEAR(mu[1], 0.5, 1e-15);
  EXPECT_NEAR(mu[2], 1.0, 1e-15);
  ReducedData r{Eigen::MatrixXd::Identity(2, 2), y, Eigen::Vector2d(1, 1)};
  const ScalingField f = estimate_scaling(r, m);
  EXPECT_EQ(f.clamped, 0u);
  EXPECT_NEAR(f.values[0], 1.5, 1e-15);
}

TEST(EstimateScaling, DataOnHyperplaneGivesOnes) {
  // Points on x + y = 2.
  PixelMatrix y(2, 5);
  y << 0.5, 1, 1.5, 0.2, 1.8, 1.5, 1, 0.5, 1.8, 0.2;
  const HyperplaneModel m(mean_point(y), Eigen::Vector2d(1, 1));
  EXPECT_LT((raw_scaling(y, m).array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(EstimateScaling, MeanIsOneBeforeClamping) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PixelMatrix y = test::uniform_matrix(4, 500, seed, 0.0, 1.0);
    const Eigen::VectorXd c = mean_point(y);
    const Eigen::VectorXd n = c + 0.3 * test::uniform_matrix(4, 1, seed + 100, -1.0, 1.0).col(0);
    const HyperplaneModel m(c, n);
    EXPECT_NEAR(raw_scaling(y, m).mean(), 1.0, 1e-12);
  }
}

TEST(ScalingFieldNormalization, ClampsCountsAndRenormalizes) {
  Eigen::VectorXd raw(4);
  raw << -0.5, 0.0005, 1.5, 2.0;
  const ScalingField f = ScalingField::normalized(raw, 1e-3);
  EXPECT_EQ(f.clamped, 2u);
  EXPECT_NEAR(f.mean(), 1.0, 1e-12);
  EXPECT_GE(f.values.minCoeff(), 1e-3);
}

// ---------------------------------------------------------------- objective

TEST(Psi, SmallExample) {
  const PixelMatrix y = three_pixels();
  const ReducedData r{Eigen::MatrixXd::Identity(2, 2), y, Eigen::Vector2d(1, 1)};
  EXPECT_NEAR(objective_psi(Eigen::Vector2d(1, 1) / std::sqrt(2.0), r, mean_point(y)), 2.0, 1e-14);
}

TEST(Psi, ZeroOnHyperplane) {
  PixelMatrix y(3, 50);
  const Eigen::MatrixXd w = test::uniform_matrix(3, 50, 3, 0.01, 1.0);
  // Convex combinations of the unit vectors lie on x + y + z = 1.
  for (Eigen::Index i = 0; i < 50; ++i) y.col(i) = w.col(i) / w.col(i).sum();
  const PsiObjective obj(y, mean_point(y));
  EXPECT_LE(obj(Eigen::Vector3d(1, 1, 1)), 1e-18 * y.squaredNorm());
}

TEST(Psi, ScaleAndSignInvariance) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PixelMatrix y = test::uniform_matrix(4, 200, seed, 0.1, 1.0);
    const PsiObjective obj(y, mean_point(y));
    const Eigen::VectorXd n = mean_point(y) + 0.2 * test::uniform_matrix(4, 1, seed + 7, -1, 1).col(0);
    const double base = obj(n);
    for (double alpha : {-2.0, 0.5, 10.0}) EXPECT_LE(test::relative_error(obj(alpha * n), base), 1e-13);
  }
}

TEST(Psi, NearOrthogonalNormalIsInfiniteInsideAndAnErrorOutside) {
  PixelMatrix y(2, 3);
  y << 1, 2, 3, 0, 0.1, -0.1;
  const PsiObjective obj(y, mean_point(y));
  const Eigen::Vector2d n(0, 1);
  EXPECT_FALSE(obj.value(n).valid);
  EXPECT_TRUE(std::isinf(obj.value(n).psi));
  EXPECT_THROW(obj(n), NearOrthogonalNormalError);
}

TEST(Psi, ClampedPixelsAreCounted) {
  PixelMatrix y(2, 3);
  y << 1, 1, 0, 0, 1, 1;  // third pixel is orthogonal to n = (1, 0)
  const PsiObjective obj(y, mean_point(y));
  const auto v = obj.value(Eigen::Vector2d(1, 0));
  EXPECT_EQ(v.clamped, 1u);
  const double r = 1.0 - 1.0 / kMuFloor;
  EXPECT_GT(v.psi, r * r * 1.0 - 1e-6);
}

TEST(Psi, GradientMatchesCentralDifferences) {
  double worst = 0.0;
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(draw % 4);
    const PixelMatrix y = test::uniform_matrix(k, 300, 1000 + draw, 0.05, 1.0);
    const PsiObjective obj(y, mean_point(y));
    Eigen::VectorXd n = mean_point(y).normalized() + 0.15 * test::uniform_matrix(k, 1, 2000 + draw, -1, 1).col(0);
    n.normalize();
    const auto vg = obj.value_gradient(n);
    ASSERT_TRUE(vg.valid);
    ASSERT_EQ(vg.clamped, 0u);
    Eigen::VectorXd fd(k);
    const double h = 1e-6;
    for (Eigen::Index d = 0; d < k; ++d) {
      Eigen::VectorXd a = n, b = n;
      a[d] += h;
      b[d] -= h;
      fd[d] = (obj(a) - obj(b)) / (2 * h);
    }
    const double err = (fd - vg.gradient).norm() / vg.gradient.norm();
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Psi, GradientOverflowReportsPixel) {
  PixelMatrix y(2, 3);
  y << 1, 1, 1e200, 1, 2, 1e200;
  const PsiObjective obj(y, mean_point(y));
  try {
    obj.value_gradient(Eigen::Vector2d(1, 1));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.pixel(), 2u);
  }
}

// ---------------------------------------------------------------- candidates

TEST(Candidates, SolvesThroughTwoPixels) {
  Eigen::Matrix2d b;
  b << 2, 0, 0, 2;
  const auto n = normal_through(b);
  ASSERT_TRUE(n);
  EXPECT_NEAR((*n)[0], 0.5, 1e-15);
  EXPECT_NEAR((*n)[1], 0.5, 1e-15);

  const ReducedData r{Eigen::MatrixXd::Identity(2, 2), PixelMatrix(b), Eigen::Vector2d(2, 2)};
  const auto cands = candidate_normals(r, 5, 1);
  ASSERT_FALSE(cands.empty());
  for (const auto& c : cands) {
    EXPECT_NEAR(c[0], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c[1], 1.0 / std::sqrt(2.0), 1e-15);
  }
}

TEST(Candidates, IdenticalPixelsAreDegenerate) {
  const Eigen::Vector3d p(0.2, 0.3, 0.4);
  const ReducedData r{Eigen::MatrixXd::Identity(3, 3), PixelMatrix(p.replicate(1, 50)), Eigen::Vector3d(1, 0, 0)};
  EXPECT_THROW(candidate_normals(r, 4, 0), DegenerateDataError);
}

TEST(Candidates, UnscaledDataGivesTheTrueNormal) {
  const SynthScene s = gen_scene(small_scene(3, 0.0, 5));
  const ReducedData r = svd_reduce(s.clean_cube, 3);
  const Eigen::VectorXd truth = true_normal(r, s.truth.endmembers);
  const auto cands = candidate_normals(r, 50, 9);
  EXPECT_GT(cands.size(), 40u);
  for (const auto& c : cands) {
    EXPECT_NEAR(c.norm(), 1.0, 1e-12);
    EXPECT_GT(c.dot(mean_point(r)), 0.0);
    EXPECT_LT(line_angle(c, truth), 1e-8);
  }
}

TEST(Candidates, PixelsSharingOneScaleGiveTheTrueNormal) {
  const SynthScene s = gen_scene(small_scene(4, 0.0, 6));
  const ReducedData r = svd_reduce(s.clean_cube, 4);
  const Eigen::VectorXd truth = true_normal(r, s.truth.endmembers);
  for (double mu : {0.3, 1.0, 1.7}) {
    Eigen::MatrixXd b(4, 4);
    for (Eigen::Index j = 0; j < 4; ++j) b.col(j) = mu * r.pixels.col(100 * j + 17);
    const auto n = normal_through(b);
    ASSERT_TRUE(n);
    EXPECT_LT(line_angle(*n, truth), 1e-8);
  }
}

TEST(Candidates, DeterministicAcrossThreadCounts) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 7));
  const ReducedData r = svd_reduce(s.scaled_cube, 3);
  set_thread_count(1);
  const auto a = candidate_normals(r, 30, 4);
  set_thread_count(4);
  const auto b = candidate_normals(r, 30, 4);
  set_thread_count(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

// ---------------------------------------------------------------- PSO

TEST(Pso, ParticleAtZeroOptimumStaysPut) {
  const SynthScene s = gen_scene(small_scene(3, 0.0, 8));
  const ReducedData r = svd_reduce(s.clean_cube, 3);
  const PsiObjective obj(r.pixels, mean_point(r));
  const Eigen::VectorXd opt = obj.canonical(true_normal(r, s.truth.endmembers));
  const std::vector<Eigen::VectorXd> init{opt};
  PsoConfig cfg;
  cfg.swarm_size = 2;
  cfg.iterations = 20;
  const PsoResult res = pso_minimize(obj, init, cfg);
  EXPECT_EQ(res.normal, opt);
  EXPECT_EQ(res.psi, obj(opt));
}

TEST(Pso, NeverWorseThanAnySuppliedNormalAndHistoryMonotone) {
  const SynthScene s = gen_scene(small_scene(4, 0.3, 9));
  const ReducedData r = svd_reduce(s.scaled_cube, 4);
  const PsiObjective obj(r.pixels, mean_point(r));
  const auto init = random_normals(r, 10, 3);
  PsoConfig cfg;
  cfg.iterations = 40;
  const PsoResult res = pso_minimize(obj, init, cfg);
  for (const auto& n : init) EXPECT_LE(res.psi, obj.value(n).psi);
  EXPECT_EQ(res.psi, obj(res.normal));
  for (std::size_t i = 1; i < res.best_history.size(); ++i) EXPECT_LE(res.best_history[i], res.best_history[i - 1]);
}

TEST(Pso, MatchesGridOracleOnTwoEndmemberScene) {
  const SynthScene s = gen_scene(small_scene(2, 0.3, 10));
  const ReducedData r = svd_reduce(s.scaled_cube, 2);
  const PsiObjective obj(r.pixels, mean_point(r));
  const GridOracle oracle = grid_oracle(obj);
  const auto init = candidate_normals(r, 50, 1);
  PsoConfig cfg;
  cfg.seed = 2;
  const PsoResult res = pso_minimize(obj, init, cfg);
  EXPECT_LE(res.psi, oracle.psi_grid * (1.0 + 1e-6));
  EXPECT_LE(test::relative_error(res.psi, oracle.psi), 1e-6);
}

TEST(Pso, DeterministicAcrossThreadCounts) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 11));
  const ReducedData r = svd_reduce(s.scaled_cube, 3);
  const PsiObjective obj(r.pixels, mean_point(r));
  const auto init = random_normals(r, 20, 5);
  PsoConfig cfg;
  cfg.iterations = 30;
  cfg.seed = 77;
  set_thread_count(1);
  const PsoResult a = pso_minimize(obj, init, cfg);
  set_thread_count(4);
  const PsoResult b = pso_minimize(obj, init, cfg);
  set_thread_count(0);
  EXPECT_EQ(a.normal, b.normal);
  EXPECT_EQ(a.best_history, b.best_history);
}

TEST(Pso, RejectsInvalidConfigurationsAndStarts) {
  const PixelMatrix y = test::uniform_matrix(2, 20, 1, 0.1, 1.0);
  const PsiObjective obj(y, mean_point(y));
  const Eigen::VectorXd c = mean_point(y);
  const std::vector<Eigen::VectorXd> orthogonal{Eigen::Vector2d(-c[1], c[0])};
  EXPECT_THROW(pso_minimize(obj, orthogonal, PsoConfig{}), OptimizationFailedError);
  EXPECT_THROW(pso_minimize(obj, std::vector<Eigen::VectorXd>{}, PsoConfig{}), ValidationError);
  PsoConfig bad;
  bad.swarm_size = 1;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = PsoConfig{};
  bad.inertia = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = PsoConfig{};
  bad.social = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

// ---------------------------------------------------------------- gradient descent

TEST(GradientDescent, StationaryStartIsReturned) {
  const SynthScene s = gen_scene(small_scene(3, 0.0, 12));
  const ReducedData r = svd_reduce(s.clean_cube, 3);
  const PsiObjective obj(r.pixels, mean_point(r));
  const Eigen::VectorXd opt = obj.canonical(true_normal(r, s.truth.endmembers));
  const GdResult res = gd_refine(obj, opt, GdConfig{});
  EXPECT_LT((res.normal - opt).norm(), 1e-12);
  EXPECT_LE(res.psi, obj(opt));
  EXPECT_NE(res.stop, GdStop::iterations);
}

TEST(GradientDescent, ConvergesToGridOptimumFromPerturbedStart) {
  for (std::uint64_t seed : {13u, 14u, 15u}) {
    const SynthScene s = gen_scene(small_scene(2, 0.3, seed));
    const ReducedData r = svd_reduce(s.scaled_cube, 2);
    const PsiObjective obj(r.pixels, mean_point(r));
    const GridOracle oracle = grid_oracle(obj);
    for (double offset : {-0.01, 0.01}) {
      const GdResult res = gd_refine(obj, at_angle(oracle.theta + offset), GdConfig{});
      EXPECT_LT(line_angle(res.normal, at_angle(oracle.theta)), 1e-4) << "seed " << seed;
      EXPECT_LE(res.psi, res.initial_psi);
    }
  }
}

TEST(GradientDescent, NeverIncreasesPsi) {
  const SynthScene s = gen_scene(small_scene(4, 0.3, 16));
  const ReducedData r = svd_reduce(s.scaled_cube, 4);
  const PsiObjective obj(r.pixels, mean_point(r));
  for (const auto& start : random_normals(r, 5, 1)) {
    GdConfig cfg;
    cfg.max_iters = 25;
    const GdResult res = gd_refine(obj, start, cfg);
    EXPECT_LE(res.psi, obj(start));
    EXPECT_NEAR(res.normal.norm(), 1.0, 1e-12);
  }
}

TEST(GradientDescent, ConfigValidation) {
  GdConfig c;
  c.backtrack_factor = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = GdConfig{};
  c.initial_step = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

// ---------------------------------------------------------------- correction of pixels

TEST(CorrectPixels, UnitFieldIsIdentity) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 17, 8));
  ScalingField ones;
  ones.values = Eigen::VectorXd::Ones(64);
  EXPECT_EQ(correct_pixels(s.scaled_cube, ones), s.scaled_cube);
}

TEST(CorrectPixels, SinglePixelDivision) {
  const HsiCube cube(3, 1, 1, {2, 4, 6});
  ScalingField f;
  f.values = Eigen::VectorXd::Constant(1, 2.0);
  const HsiCube out = correct_pixels(cube, f);
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), (std::vector<double>{1, 2, 3}));
  f.values = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(correct_pixels(cube, f), DimensionError);
}

TEST(CorrectPixels, InvertsApplyScaling) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 18, 16));
  const HsiCube back = correct_pixels(apply_scaling(s.clean_cube, s.mu_true.values), s.mu_true);
  for (std::size_t p = 0; p < back.pixel_count(); ++p) {
    const Eigen::VectorXd a = back.pixel(p), b = s.clean_cube.pixel(p);
    EXPECT_LE((a - b).norm(), 1e-6 * b.norm());
  }
}

// ---------------------------------------------------------------- full pipeline

TEST(RunCorrection, UnscaledSceneIsAFixedPoint) {
  const SynthScene s = gen_scene(small_scene(3, 0.0, 19));
  const CorrectionResult r = run_correction(s.scaled_cube, 3, PsoConfig{.swarm_size = 0}, GdConfig{}, 50, 1);
  EXPECT_LT((r.report.mu_hat.values.array() - 1.0).abs().maxCoeff(), 1e-6);
  const auto a = r.corrected.data(), b = s.scaled_cube.data();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6 * std::max(1.0, b[i]));
}

TEST(RunCorrection, ReportInvariants) {
  const SynthScene s = gen_scene(small_scene(4, 0.3, 20, 64, 40));
  CorrectionOptions o;
  o.endmembers = 4;
  o.seed = 3;
  const CorrectionResult r = run_correction(s.scaled_cube, o);
  const CorrectionReport& rep = r.report;
  EXPECT_LE(rep.psi_final, rep.psi_after_pso);
  EXPECT_LE(rep.psi_after_pso, rep.psi_initial);
  EXPECT_NEAR(rep.model.normal().norm(), 1.0, 1e-12);
  EXPECT_GT(rep.model.denom(), 0.0);
  EXPECT_NEAR(rep.mu_hat.mean(), 1.0, 1e-9);
  EXPECT_GE(rep.mu_hat.values.minCoeff(), kMuFloor);
  EXPECT_GT(rep.candidate_count, 0u);
  EXPECT_LE(rep.candidate_count, 200u);
  EXPECT_FALSE(rep.degenerate);
  EXPECT_EQ(rep.model.c_star(), mean_point(r.reduced));
  // Accuracy on a 4096-pixel scene.
  EXPECT_LT(rmse_mu(rep.mu_hat, s.mu_true), 0.1);
}

TEST(RunCorrection, CorrectedPixelsLieOnTheHyperplane) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 21));
  const CorrectionResult r = run_correction(s.scaled_cube, 3, PsoConfig{.swarm_size = 0}, GdConfig{}, 50, 2);
  const PixelMatrix corrected = project(r.reduced, r.corrected.pixel_matrix());
  const HyperplaneModel& m = r.report.model;
  for (Eigen::Index i = 0; i < corrected.cols(); ++i) {
    const double residual = std::abs((corrected.col(i) - m.c_star()).dot(m.normal()));
    EXPECT_LE(residual, 1e-9 * r.reduced.pixels.col(i).norm()) << "pixel " << i;
  }
}

TEST(RunCorrection, SecondPassFindsNothingToCorrect) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 22, 48, 30));
  CorrectionOptions o;
  o.endmembers = 3;
  o.candidate_count = 60;
  const CorrectionResult first = run_correction(s.scaled_cube, o);
  const CorrectionResult second = run_correction(first.corrected, o);
  EXPECT_LT(std::sqrt(variance(second.report.mu_hat.values)), 0.02);
}

TEST(RunCorrection, DeterministicAcrossRunsAndThreadCounts) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 23));
  CorrectionOptions o;
  o.endmembers = 3;
  o.candidate_count = 40;
  o.seed = 99;
  set_thread_count(1);
  const CorrectionResult a = run_correction(s.scaled_cube, o);
  set_thread_count(4);
  const CorrectionResult b = run_correction(s.scaled_cube, o);
  set_thread_count(0);
  EXPECT_EQ(a.corrected, b.corrected);
  EXPECT_EQ(a.report.mu_hat.values, b.report.mu_hat.values);
  EXPECT_EQ(a.report.psi_final, b.report.psi_final);
  EXPECT_EQ(a.report.model.normal(), b.report.model.normal());
}

TEST(RunCorrection, RankArgumentsAndDegenerateMode) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 24, 8, 5));
  CorrectionOptions o;
  o.endmembers = 0;
  EXPECT_THROW(run_correction(s.scaled_cube, o), DimensionError);
  o.endmembers = 6;
  EXPECT_THROW(run_correction(s.scaled_cube, o), DimensionError);
  o.endmembers = 1;
  const CorrectionResult r = run_correction(s.scaled_cube, o);
  EXPECT_TRUE(r.report.degenerate);
  // mu_i is the pixel norm over the mean reduced coordinate, then mean-normalized.
  const Eigen::VectorXd raw = r.reduced.pixels.row(0).transpose() / mean_point(r.reduced)[0];
  EXPECT_LT((r.report.mu_hat.values - raw / raw.mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RunCorrection, StageSwitchesStillProduceValidReports) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 25));
  for (PipelineStages st : {PipelineStages{false, false, true}, PipelineStages{false, true, true},
                            PipelineStages{true, true, false}, PipelineStages{true, false, false}}) {
    CorrectionOptions o;
    o.endmembers = 3;
    o.candidate_count = 30;
    o.stages = st;
    const CorrectionResult r = run_correction(s.scaled_cube, o);
    EXPECT_LE(r.report.psi_final, r.report.psi_after_pso);
    EXPECT_LE(r.report.psi_after_pso, r.report.psi_initial);
    if (!st.pso) {
      EXPECT_EQ(r.report.psi_after_pso, r.report.psi_initial);
    }
    if (!st.gd) {
      EXPECT_EQ(r.report.psi_final, r.report.psi_after_pso);
    }
  }
}

TEST(RunCorrection, ErrorBelowPlacementBound) {
  // 64 x 64 scene, sigma 0.3: compare the measured error with the bound
  // evaluated from the true field and the clean-cube norm ratio.
  const SynthScene s = gen_scene(small_scene(4, 0.3, 26, 64, 40));
  CorrectionOptions o;
  o.endmembers = 4;
  const CorrectionResult r = run_correction(s.scaled_cube, o);
  const double bound = bound_check(s.mu_true, s.mu_true.values.size(), norm_ratio(s.clean_cube.pixel_matrix()));
  EXPECT_LT(rmse_mu(r.report.mu_hat, s.mu_true), bound);
}

TEST(Landscape, PolarGridMatchesObjective) {
  const SynthScene s = gen_scene(small_scene(3, 0.3, 27, 16));
  const ReducedData r = svd_reduce(s.scaled_cube, 3);
  const PsiObjective obj(r.pixels, mean_point(r));
  const auto samples = psi_landscape(obj, 7, 12);
  ASSERT_EQ(samples.size(), 84u);
  for (const auto& smp : samples) {
    const Eigen::Vector3d n(std::sin(smp.theta) * std::cos(smp.phi), std::sin(smp.theta) * std::sin(smp.phi),
                            std::cos(smp.theta));
    EXPECT_EQ(smp.psi, obj.value(n).psi);
  }
  const PixelMatrix planar = r.pixels.topRows(2);
  EXPECT_THROW(psi_landscape(PsiObjective(planar, mean_point(planar)), 3, 3), DimensionError);
}
