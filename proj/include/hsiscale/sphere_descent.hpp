#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "hsiscale/error.hpp"
#include "hsiscale/hyperplane.hpp"

namespace hsiscale {

struct GdConfig {
  std::size_t max_iters = 500;
  double initial_step = 1e-2;     ///< radians along the descent direction
  double backtrack_factor = 0.5;
  double grad_tol = 1e-10;        ///< relative to Psi at the start point
  double step_tol = 1e-14;        ///< line search gives up below this step
  double max_step = 0.5;

  void validate() const {
    if (max_iters < 1) throw ValidationError("max_iters must be positive");
    if (!(initial_step > 0.0) || !(grad_tol > 0.0) || !(step_tol > 0.0) || !(max_step > 0.0))
      throw ValidationError("step sizes and tolerances must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw ValidationError("backtrack_factor must lie in (0, 1)");
  }
};

enum class GdStop { gradient, step, iterations };

inline const char* to_string(GdStop s) {
  switch (s) {
    case GdStop::gradient: return "gradient";
    case GdStop::step: return "step";
    case GdStop::iterations: return "iterations";
  }
  return "?";
}

struct GdResult {
  Eigen::VectorXd normal;
  double psi = 0.0;
  double initial_psi = 0.0;
  std::size_t iterations = 0;
  GdStop stop = GdStop::iterations;
};

/// Riemannian gradient of Psi at unit n: the Euclidean gradient with its
/// radial component removed.
inline Eigen::VectorXd tangent_gradient(const Eigen::VectorXd& n, const Eigen::VectorXd& gradient) {
  return gradient - gradient.dot(n) * n;
}

/// Projected gradient descent on the unit sphere with Armijo backtracking.
///
/// Each step moves along the normalized tangent gradient by t radians and
/// renormalizes. An accepted step doubles t (up to max_step) for the next
/// iteration; a rejected one shrinks it by backtrack_factor. Psi never
/// increases.
inline GdResult gd_refine(const PsiObjective& objective, const Eigen::VectorXd& start, const GdConfig& config) {
  config.validate();
  auto current = objective.value_gradient(start);
  if (!current.valid || !std::isfinite(current.psi))
    throw ValidationError("gradient descent start point has no finite objective");

  GdResult out;
  out.normal = objective.canonical(start);
  out.psi = current.psi;
  out.initial_psi = current.psi;
  const double threshold = config.grad_tol * current.psi;
  double step = config.initial_step;

  for (out.iterations = 0; out.iterations < config.max_iters; ++out.iterations) {
    const Eigen::VectorXd g = tangent_gradient(out.normal, current.gradient);
    const double gnorm = g.norm();
    if (gnorm <= threshold) {
      out.stop = GdStop::gradient;
      return out;
    }
    const Eigen::VectorXd dir = -g / gnorm;
    bool accepted = false;
    while (step >= config.step_tol) {
      const Eigen::VectorXd trial = (out.normal + step * dir).normalized();
      const auto v = objective.value(trial);
      if (v.valid && v.psi <= out.psi - 1e-4 * step * gnorm) {
        out.normal = objective.canonical(trial);
        current = objective.value_gradient(out.normal);
        out.psi = current.psi;
        accepted = true;
        break;
      }
      step *= config.backtrack_factor;
    }
    if (!accepted) {
      out.stop = GdStop::step;
      return out;
    }
    step = std::min(config.max_step, step / config.backtrack_factor);
  }
  out.stop = GdStop::iterations;
  return out;
}

inline GdResult gd_refine(const Eigen::VectorXd& start, const ReducedData& reduced, const Eigen::VectorXd& c_star,
                          const GdConfig& config) {
  return gd_refine(PsiObjective(reduced.pixels, c_star), start, config);
}

}  // namespace hsiscale
