#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/parallel.hpp"
#include "hsiscale/random.hpp"
#include "hsiscale/subspace.hpp"

namespace hsiscale {

struct UnmixResult {
  Eigen::MatrixXd endmembers;            ///< L x K
  Eigen::MatrixXd abundances;            ///< K x N
  Eigen::VectorXd per_pixel_residual;    ///< ||y_i - M a_i||
};

/// Weight of the sum-to-one row, relative to the mean endmember norm.
inline constexpr double kAscWeight = 1e3;

namespace detail {

// Least squares on the columns of `a` listed in `passive`, via Householder QR.
inline Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                     const std::vector<Eigen::Index>& passive) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t j = 0; j < passive.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(passive[j]);
  Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t j = 0; j < passive.size(); ++j) full[passive[j]] = s[static_cast<Eigen::Index>(j)];
  return full;
}

}  // namespace detail

/// Lawson-Hanson active-set solution of min ||a x - b|| subject to x >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index k = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  std::vector<bool> in_passive(static_cast<std::size_t>(k), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.norm() * std::max(1.0, b.norm()) *
                     static_cast<double>(std::max(a.rows(), k));
  Eigen::VectorXd w = a.transpose() * (b - a * x);

  for (Eigen::Index outer = 0; outer < 3 * k + 10; ++outer) {
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!in_passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        best = j;
      }
    if (best < 0) break;
    in_passive[static_cast<std::size_t>(best)] = true;

    for (Eigen::Index inner = 0; inner < 3 * k + 10; ++inner) {
      std::vector<Eigen::Index> passive;
      for (Eigen::Index j = 0; j < k; ++j)
        if (in_passive[static_cast<std::size_t>(j)]) passive.push_back(j);
      const Eigen::VectorXd s = detail::solve_passive(a, b, passive);
      bool feasible = true;
      for (Eigen::Index j : passive) feasible = feasible && s[j] > 0.0;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j : passive)
        if (s[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      x += alpha * (s - x);
      for (Eigen::Index j : passive)
        if (x[j] <= tol) {
          x[j] = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        }
    }
    w = a.transpose() * (b - a * x);
  }
  return x.cwiseMax(0.0);
}

/// ASC-augmented system [w 1^T; M] used by fcls.
inline Eigen::MatrixXd fcls_system(const Eigen::MatrixXd& endmembers) {
  const double weight = kAscWeight * endmembers.colwise().norm().mean();
  Eigen::MatrixXd a(endmembers.rows() + 1, endmembers.cols());
  a.row(0).setConstant(weight);
  a.bottomRows(endmembers.rows()) = endmembers;
  return a;
}

/// Fully constrained least squares abundances (a >= 0, sum a = 1) for every
/// pixel column. Solves the ASC-augmented NNLS problem, then rescales each
/// column to sum exactly to one.
inline Eigen::MatrixXd fcls(const Eigen::MatrixXd& pixels, const Eigen::MatrixXd& endmembers) {
  if (pixels.rows() != endmembers.rows())
    throw DimensionError("pixels have " + std::to_string(pixels.rows()) + " bands, endmembers " +
                         std::to_string(endmembers.rows()));
  if (endmembers.cols() < 1) throw DimensionError("no endmembers");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(endmembers);
  const auto& sv = svd.singularValues();
  if (sv.size() < endmembers.cols() || !(sv[sv.size() - 1] > 1e-12 * sv[0]))
    throw DimensionError("endmember matrix is rank-deficient");

  const Eigen::MatrixXd a = fcls_system(endmembers);
  const double weight = a(0, 0);
  Eigen::MatrixXd out(endmembers.cols(), pixels.cols());
  parallel_for(static_cast<std::size_t>(pixels.cols()), [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    Eigen::VectorXd b(a.rows());
    b[0] = weight;
    b.tail(pixels.rows()) = pixels.col(col);
    Eigen::VectorXd x = nnls(a, b);
    const double s = x.sum();
    if (s > 0.0)
      x /= s;
    else
      x.setConstant(1.0 / static_cast<double>(x.size()));
    out.col(col) = x;
  });
  return out;
}

inline UnmixResult unmix_with(const Eigen::MatrixXd& pixels, const Eigen::MatrixXd& endmembers) {
  UnmixResult r;
  r.endmembers = endmembers;
  r.abundances = fcls(pixels, endmembers);
  r.per_pixel_residual = (pixels - endmembers * r.abundances).colwise().norm().transpose();
  return r;
}

// ---------------------------------------------------------------------------

/// Volume of the simplex spanned by the given columns, up to the constant
/// 1/(k-1)!: sqrt(det(E^T E)) with E the edges from the first vertex,
/// evaluated as |prod diag(R)| from a QR of E to keep thin simplices accurate.
inline double simplex_volume(const Eigen::MatrixXd& vertices) {
  const Eigen::Index k = vertices.cols();
  if (k < 2) return 0.0;
  const Eigen::MatrixXd edges = vertices.rightCols(k - 1).colwise() - vertices.col(0);
  if (edges.rows() < edges.cols()) return 0.0;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(edges);
  return std::abs(qr.matrixQR().diagonal().prod());
}

struct NfindrResult {
  Eigen::MatrixXd endmembers;             ///< L x K, basis^T times the chosen reduced pixels
  std::vector<Eigen::Index> indices;      ///< chosen pixel per endmember
  double volume = 0.0;
  std::vector<double> volume_history;     ///< volume after each sweep of the winning start
};

/// N-FINDR: pick k pixels whose simplex in the reduced space has locally
/// maximal volume under single-vertex swaps. Runs `starts` seeded random
/// initializations and keeps the largest final volume (first start on ties).
inline NfindrResult nfindr_extract(const ReducedData& reduced, Eigen::Index k, std::uint64_t seed,
                                   std::size_t max_sweeps = 50, std::size_t starts = 3) {
  const PixelMatrix& y = reduced.pixels;
  const Eigen::Index n = y.cols();
  if (k < 2) throw DimensionError("N-FINDR needs at least two endmembers");
  if (n < k) throw DimensionError("fewer pixels than endmembers");
  if (starts == 0) starts = 1;

  NfindrResult best;
  best.volume = -1.0;
  for (std::size_t start = 0; start < starts; ++start) {
    Rng rng = make_rng(seed, 0x4e46 + start);
    std::vector<Eigen::Index> idx;
    while (static_cast<Eigen::Index>(idx.size()) < k) {
      const auto c = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
    }
    Eigen::MatrixXd verts(y.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) verts.col(j) = y.col(idx[static_cast<std::size_t>(j)]);
    double volume = simplex_volume(verts);
    std::vector<double> history;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      bool changed = false;
      for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index arg = -1;
        double top = volume;
        Eigen::MatrixXd trial = verts;
        for (Eigen::Index i = 0; i < n; ++i) {
          trial.col(j) = y.col(i);
          const double v = simplex_volume(trial);
          if (v > top * (1.0 + 1e-12) && v > top) {
            top = v;
            arg = i;
          }
        }
        if (arg >= 0) {
          verts.col(j) = y.col(arg);
          idx[static_cast<std::size_t>(j)] = arg;
          volume = top;
          changed = true;
        }
      }
      history.push_back(volume);
      if (!changed) break;
    }
    if (volume > best.volume) {
      best.volume = volume;
      best.indices = idx;
      best.volume_history = std::move(history);
      best.endmembers = reduced.basis.transpose() * verts;
    }
  }
  const double scale = y.colwise().norm().maxCoeff();
  if (!(best.volume > 1e-12 * std::pow(scale, static_cast<double>(k - 1))))
    throw ExtractionError("simplex volume is degenerate; the data may be coplanar");
  return best;
}

}  // namespace hsiscale
