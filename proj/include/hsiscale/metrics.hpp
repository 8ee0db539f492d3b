#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/synth.hpp"

namespace hsiscale {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3) with potentials). Returns assignment[row] = column.
inline std::vector<Eigen::Index> hungarian(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw DimensionError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> p(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Eigen::Index i0 = p[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return assignment;
}

/// sqrt(mean((pred - truth)^2)).
inline double rmse_mu(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw DimensionError("scaling fields differ in length: " + std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()));
  if (pred.size() == 0) throw DimensionError("empty scaling field");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

inline double rmse_mu(const ScalingField& pred, const ScalingField& truth) { return rmse_mu(pred.values, truth.values); }

struct SadResult {
  double mean = 0.0;
  Eigen::VectorXd per_endmember;         ///< indexed by the columns of the reference
  std::vector<Eigen::Index> permutation; ///< permutation[j] = matched column of the estimate
};

/// Spectral angle distance between matched columns. Columns are paired by a
/// minimum-total-angle assignment, so the estimate may come in any order.
inline SadResult sad_error(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    throw DimensionError("endmember matrices differ in shape");
  const Eigen::Index k = reference.cols();
  if (k == 0) throw DimensionError("no endmembers to compare");
  Eigen::MatrixXd angles(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) angles(a, b) = spectral_angle(reference.col(a), estimate.col(b));
  SadResult out;
  out.permutation = hungarian(angles);
  out.per_endmember.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) out.per_endmember[a] = angles(a, out.permutation[static_cast<std::size_t>(a)]);
  out.mean = out.per_endmember.mean();
  return out;
}

struct AbundanceRmse {
  double total = 0.0;
  Eigen::VectorXd per_endmember;
  std::vector<Eigen::Index> permutation;  ///< row of the estimate matched to each reference row
};

/// total = sqrt(mean_i ||a_i - a_hat_i||^2); per-endmember values are row-wise
/// RMSEs. Rows of the estimate are matched through `permutation` (typically
/// from sad_error on the endmembers); without one they are matched by a
/// minimum-RMSE assignment.
inline AbundanceRmse abundance_rmse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate,
                                    std::optional<std::vector<Eigen::Index>> permutation = std::nullopt) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    throw DimensionError("abundance matrices differ in shape");
  const Eigen::Index k = reference.rows();
  const double n = static_cast<double>(reference.cols());
  if (reference.cols() == 0) throw DimensionError("no pixels to compare");
  if (!permutation) {
    Eigen::MatrixXd cost(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) cost(a, b) = (reference.row(a) - estimate.row(b)).squaredNorm();
    permutation = hungarian(cost);
  }
  if (static_cast<Eigen::Index>(permutation->size()) != k) throw DimensionError("permutation size mismatch");
  AbundanceRmse out;
  out.per_endmember.resize(k);
  double total = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double sq = (reference.row(a) - estimate.row((*permutation)[static_cast<std::size_t>(a)])).squaredNorm();
    total += sq;
    out.per_endmember[a] = std::sqrt(sq / n);
  }
  out.total = std::sqrt(total / n);
  out.permutation = std::move(*permutation);
  return out;
}

/// (mean ||y||)^2 / mean ||y||^2 over pixel columns; in (0, 1].
inline double norm_ratio(const PixelMatrix& pixels) {
  const Eigen::VectorXd norms = pixels.colwise().norm().transpose();
  const double ms = norms.squaredNorm() / static_cast<double>(norms.size());
  return ms > 0.0 ? norms.mean() * norms.mean() / ms : 1.0;
}

inline double variance(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

/// Ceiling on the relative RMS hyperplane placement error:
/// sqrt((s_max^2 - s_min^2 * ratio) / N), with s_max^2 = s_min^2 = Var(mu)
/// and ratio = (mean ||y*||)^2 / mean ||y*||^2 of the unscaled pixels.
inline double bound_check(const Eigen::VectorXd& mu_true, std::size_t n_pixels, double ratio = 1.0) {
  if (n_pixels == 0) throw DimensionError("pixel count must be positive");
  const double var = variance(mu_true);
  if (var == 0.0) return 0.0;
  return std::sqrt(std::max(0.0, var - var * ratio) / static_cast<double>(n_pixels));
}

inline double bound_check(const ScalingField& mu_true, std::size_t n_pixels, double ratio = 1.0) {
  return bound_check(mu_true.values, n_pixels, ratio);
}

/// Relative RMS distance between the unscaled pixels y*_i and the estimated
/// hyperplane, measured along their rays:
///   delta_i = (mean(y*).n / y*_i.n - 1) ||y*_i||,  result = rms(delta) / sqrt(mean ||y*||^2).
inline double relative_placement_error(const PixelMatrix& unscaled, const Eigen::VectorXd& normal) {
  const Eigen::VectorXd centre = unscaled.rowwise().mean();
  const Eigen::VectorXd proj = unscaled.transpose() * normal;
  const Eigen::VectorXd norms = unscaled.colwise().norm().transpose();
  const double c = centre.dot(normal);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    const double d = (c / proj[i] - 1.0) * norms[i];
    sq += d * d;
  }
  const double n = static_cast<double>(proj.size());
  return std::sqrt(sq / n) / std::sqrt(norms.squaredNorm() / n);
}

/// Evaluation summary. Fields not computed by a given mode stay empty.
struct EvalReport {
  std::optional<double> rmse_mu;
  std::optional<double> abundance_rmse_total;
  std::optional<Eigen::VectorXd> abundance_rmse_per_endmember;
  std::optional<double> sad_mean;
  std::optional<Eigen::VectorXd> sad_per_endmember;
  std::optional<double> bound_rhs;
  std::size_t n_pixels = 0;
  std::optional<double> sigma_max;
  std::optional<double> sigma_min;
  std::optional<std::vector<Eigen::Index>> permutation;
};

}  // namespace hsiscale
