#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "hsiscale/candidates.hpp"
#include "hsiscale/cube.hpp"
#include "hsiscale/error.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/pso.hpp"
#include "hsiscale/random.hpp"
#include "hsiscale/sphere_descent.hpp"
#include "hsiscale/subspace.hpp"

namespace hsiscale {

/// Which optimization stages run. Disabling `candidates` seeds the search
/// with uniformly random unit normals instead (one normal when PSO is also
/// off, `candidate_count` otherwise).
struct PipelineStages {
  bool candidates = true;
  bool pso = true;
  bool gd = true;
};

struct CorrectionOptions {
  Eigen::Index endmembers = 0;
  std::size_t candidate_count = 200;
  std::uint64_t seed = 0;
  PsoConfig pso{.swarm_size = 0};  ///< swarm_size 0 selects max(64, candidate_count); seed is derived
  GdConfig gd{};
  CandidateConfig candidates{};
  PipelineStages stages{};
  double mu_floor = kMuFloor;
};

struct CorrectionReport {
  ScalingField mu_hat;
  HyperplaneModel model;
  double psi_initial = 0.0;    ///< best Psi over the initial normals
  double psi_after_pso = 0.0;
  double psi_final = 0.0;
  std::size_t clamped_pixels = 0;
  std::size_t candidate_count = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;     ///< K = 1: the "hyperplane" is a single point
};

struct CorrectionResult {
  HsiCube corrected;
  CorrectionReport report;
  ReducedData reduced;
};

/// Estimates per-pixel scaling factors and divides them out:
/// reduce to K dimensions, take c* as the mean reduced pixel, seed the search
/// with candidate normals, minimize Psi with PSO, polish with gradient
/// descent, then divide every original L-band pixel by its estimated factor.
///
/// K = 1 runs a degenerate mode (mu_i = y_i / c*) flagged in the report.
inline CorrectionResult run_correction(const HsiCube& cube, const CorrectionOptions& options) {
  const Eigen::Index k = options.endmembers;
  if (k < 1) throw DimensionError("endmember count must be at least 1");
  ReducedData reduced = svd_reduce(cube, k);
  const Eigen::VectorXd c_star = mean_point(reduced);
  const PsiObjective objective(reduced.pixels, c_star, options.mu_floor);
  if (!(c_star.norm() > objective.floor()))
    throw DegenerateDataError("mean reduced pixel is at the origin");

  auto finish = [&](const Eigen::VectorXd& normal, double psi_initial, double psi_after_pso, double psi_final,
                    std::size_t candidates, bool degenerate) {
    HyperplaneModel model(c_star, normal, objective.floor());
    ScalingField mu_hat = estimate_scaling(reduced, model, options.mu_floor);
    HsiCube corrected = correct_pixels(cube, mu_hat);
    const std::size_t clamped = mu_hat.clamped;
    return CorrectionResult{
        std::move(corrected),
        CorrectionReport{std::move(mu_hat), std::move(model), psi_initial, psi_after_pso, psi_final, clamped,
                         candidates, options.seed, degenerate},
        std::move(reduced)};
  };

  if (k == 1) {
    const Eigen::VectorXd normal = Eigen::VectorXd::Ones(1);
    const double psi = objective(normal);
    return finish(normal, psi, psi, psi, 0, true);
  }

  std::vector<Eigen::VectorXd> initial;
  if (options.stages.candidates) {
    initial = candidate_normals(reduced, options.candidate_count, derive_seed(options.seed, 1), options.candidates);
  } else {
    initial = random_normals(reduced, options.stages.pso ? options.candidate_count : 1, derive_seed(options.seed, 2));
  }

  std::size_t best = 0;
  double psi_initial = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < initial.size(); ++j) {
    const double v = objective.value(initial[j]).psi;
    if (v < psi_initial) {
      psi_initial = v;
      best = j;
    }
  }
  if (!std::isfinite(psi_initial)) throw OptimizationFailedError("no initial normal has a finite objective");

  Eigen::VectorXd normal = objective.canonical(initial[best]);
  double psi_after_pso = psi_initial;
  if (options.stages.pso) {
    PsoConfig pso = options.pso;
    if (pso.swarm_size == 0) pso.swarm_size = std::max<std::size_t>(64, options.candidate_count);
    pso.seed = derive_seed(options.seed, 3);
    PsoResult r = pso_minimize(objective, initial, pso);
    normal = r.normal;
    psi_after_pso = r.psi;
  }

  double psi_final = psi_after_pso;
  if (options.stages.gd) {
    GdResult r = gd_refine(objective, normal, options.gd);
    normal = r.normal;
    psi_final = r.psi;
  }
  return finish(normal, psi_initial, psi_after_pso, psi_final, initial.size(), false);
}

inline CorrectionResult run_correction(const HsiCube& cube, Eigen::Index k, const PsoConfig& pso, const GdConfig& gd,
                                       std::size_t candidate_count, std::uint64_t seed) {
  CorrectionOptions options;
  options.endmembers = k;
  options.pso = pso;
  options.gd = gd;
  options.candidate_count = candidate_count;
  options.seed = seed;
  return run_correction(cube, options);
}

/// One (theta, phi, Psi) sample of the K = 3 objective landscape.
struct LandscapeSample {
  double theta;
  double phi;
  double psi;
};

/// Psi over a polar grid of unit normals n = (sin t cos p, sin t sin p, cos t),
/// t in [0, pi], p in [0, 2 pi). Invalid normals report +inf.
inline std::vector<LandscapeSample> psi_landscape(const PsiObjective& objective, std::size_t n_theta,
                                                  std::size_t n_phi) {
  if (objective.dim() != 3) throw DimensionError("landscape export is defined for K = 3 only");
  std::vector<LandscapeSample> out;
  out.reserve(n_theta * n_phi);
  for (std::size_t a = 0; a < n_theta; ++a) {
    const double t = n_theta > 1 ? M_PI * static_cast<double>(a) / static_cast<double>(n_theta - 1) : 0.0;
    for (std::size_t b = 0; b < n_phi; ++b) {
      const double p = 2.0 * M_PI * static_cast<double>(b) / static_cast<double>(n_phi);
      Eigen::Vector3d n(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t));
      out.push_back({t, p, objective.value(n).psi});
    }
  }
  return out;
}

}  // namespace hsiscale
