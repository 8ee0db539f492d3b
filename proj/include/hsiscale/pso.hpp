#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/parallel.hpp"
#include "hsiscale/random.hpp"

namespace hsiscale {

struct PsoConfig {
  std::size_t swarm_size = 64;
  std::size_t iterations = 150;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  std::uint64_t seed = 0;
  double velocity_clamp = 0.2;  ///< fraction of the unit-sphere diameter
  double init_jitter = 0.05;    ///< spread of extra particles around the supplied normals

  void validate() const {
    if (swarm_size < 2) throw ValidationError("swarm_size must be at least 2");
    if (iterations < 1) throw ValidationError("iterations must be at least 1");
    if (!(inertia > 0.0 && inertia < 1.0)) throw ValidationError("inertia must lie in (0, 1)");
    if (!(cognitive > 0.0) || !(social > 0.0)) throw ValidationError("acceleration coefficients must be positive");
    if (!(velocity_clamp > 0.0)) throw ValidationError("velocity_clamp must be positive");
  }
};

struct PsoResult {
  Eigen::VectorXd normal;
  double psi = std::numeric_limits<double>::infinity();
  double initial_psi = std::numeric_limits<double>::infinity();  ///< best over supplied normals
  std::vector<double> best_history;                              ///< global best after each generation
};

/// Global-best particle swarm on the unit sphere of R^K.
///
/// Particles move in R^K and are projected back to the sphere (and to the
/// c*.n > 0 hemisphere) after every step. Extra particles beyond the supplied
/// normals are jittered copies of them; if fewer particles than normals are
/// requested the lowest-Psi normals are kept. Velocities start at zero.
/// Each particle owns an RNG stream derived from the seed and its index, and
/// ties on Psi go to the lower particle index, so the outcome is identical
/// for any thread count.
inline PsoResult pso_minimize(const PsiObjective& objective, std::span<const Eigen::VectorXd> initial,
                              const PsoConfig& config) {
  config.validate();
  if (initial.empty()) throw ValidationError("PSO needs at least one initial normal");
  const Eigen::Index k = objective.dim();
  const std::size_t m = initial.size();

  std::vector<double> initial_psi(m);
  parallel_for(m, [&](std::size_t j) { initial_psi[j] = objective.value(initial[j]).psi; });
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return initial_psi[a] < initial_psi[b]; });
  if (!std::isfinite(initial_psi[order[0]]))
    throw OptimizationFailedError("every initial normal is (near) orthogonal to c*");

  PsoResult result;
  result.initial_psi = initial_psi[order[0]];
  result.psi = result.initial_psi;
  result.normal = objective.canonical(initial[order[0]]);

  const std::size_t swarm = config.swarm_size;
  std::vector<Eigen::VectorXd> position(swarm), velocity(swarm), best(swarm);
  std::vector<double> best_psi(swarm);
  std::vector<Rng> rngs;
  rngs.reserve(swarm);
  for (std::size_t p = 0; p < swarm; ++p) rngs.push_back(make_rng(config.seed, 0x50534f00u + p));

  parallel_for(swarm, [&](std::size_t p) {
    const std::size_t source = swarm <= m ? order[p] : (p < m ? p : p % m);
    Eigen::VectorXd x = objective.canonical(initial[source]);
    if (x.size() == 0) x = initial[source].normalized();
    if (swarm > m && p >= m) {
      Eigen::VectorXd jittered = x;
      for (Eigen::Index d = 0; d < k; ++d) jittered[d] += config.init_jitter * standard_normal(rngs[p]);
      const Eigen::VectorXd c = objective.canonical(jittered);
      if (c.size()) x = c;
    }
    position[p] = x;
    velocity[p] = Eigen::VectorXd::Zero(k);
    best[p] = x;
    best_psi[p] = objective.value(x).psi;
  });

  auto global = [&](std::size_t& arg) {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < swarm; ++p)
      if (best_psi[p] < v) {
        v = best_psi[p];
        arg = p;
      }
    return v;
  };
  std::size_t g = 0;
  double g_psi = global(g);
  if (g_psi < result.psi) {
    result.psi = g_psi;
    result.normal = best[g];
  }

  const double vmax = 2.0 * config.velocity_clamp;
  const Eigen::VectorXd c_star = objective.c_star();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd leader = result.normal;
    parallel_for(swarm, [&](std::size_t p) {
      Rng& rng = rngs[p];
      Eigen::VectorXd& x = position[p];
      Eigen::VectorXd& v = velocity[p];
      for (Eigen::Index d = 0; d < k; ++d) {
        const double r1 = uniform01(rng), r2 = uniform01(rng);
        v[d] = config.inertia * v[d] + config.cognitive * r1 * (best[p][d] - x[d]) +
               config.social * r2 * (leader[d] - x[d]);
      }
      const double speed = v.norm();
      if (speed > vmax) v *= vmax / speed;
      Eigen::VectorXd moved = x + v;
      const double len = moved.norm();
      if (!(len > 0.0)) return;
      moved /= len;
      if (c_star.dot(moved) < 0.0) {
        moved = -moved;
        v = -v;
      }
      x = moved;
      const double psi = objective.value(x).psi;
      if (psi < best_psi[p]) {
        best_psi[p] = psi;
        best[p] = x;
      }
    });
    g_psi = global(g);
    if (g_psi < result.psi) {
      result.psi = g_psi;
      result.normal = best[g];
    }
    result.best_history.push_back(result.psi);
  }
  return result;
}

inline PsoResult pso_minimize(const ReducedData& reduced, const Eigen::VectorXd& c_star,
                              std::span<const Eigen::VectorXd> initial, const PsoConfig& config) {
  return pso_minimize(PsiObjective(reduced.pixels, c_star), initial, config);
}

}  // namespace hsiscale
