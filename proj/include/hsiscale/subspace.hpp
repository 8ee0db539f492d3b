#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "hsiscale/cube.hpp"
#include "hsiscale/error.hpp"

namespace hsiscale {

/// Pixels expressed in the dominant K-dimensional subspace of the raw data.
struct ReducedData {
  Eigen::MatrixXd basis;            ///< K x L, orthonormal rows
  PixelMatrix pixels;               ///< K x N, pixels = basis * Y0
  Eigen::VectorXd singular_values;  ///< K values, descending

  Eigen::Index dim() const noexcept { return pixels.rows(); }
  Eigen::Index pixel_count() const noexcept { return pixels.cols(); }
};

// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-12;

/// Top-k subspace of the uncentered L x N pixel matrix.
///
/// The subspace is anchored at the origin: no mean is subtracted, because
/// the perspective correction rescales pixels along rays from the origin.
/// An initial basis comes from the eigenvectors of the smaller Gram matrix
/// (Y Y^T when L <= N, otherwise Y^T Y); one subspace-iteration step against
/// Y itself followed by a Rayleigh-Ritz rotation then restores accuracy lost
/// to squaring the condition number. Each basis row is signed so that its
/// dot product with the mean pixel is nonnegative.
inline ReducedData svd_reduce(const PixelMatrix& y, Eigen::Index k) {
  const Eigen::Index l = y.rows();
  const Eigen::Index n = y.cols();
  if (k < 1 || k > std::min(l, n))
    throw DimensionError("endmember count " + std::to_string(k) + " outside [1, min(L, N) = " +
                         std::to_string(std::min(l, n)) + "]");
  if (!y.allFinite()) throw ValidationError("pixel matrix contains non-finite values");

  Eigen::MatrixXd start(l, k);
  if (l <= n) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(l, l);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(y);
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    start = eig.eigenvectors().rightCols(k).rowwise().reverse();
  } else {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    start = y * eig.eigenvectors().rightCols(k).rowwise().reverse();
  }

  // One step of subspace iteration, then orthonormalize.
  const Eigen::MatrixXd iterated = y * (y.transpose() * start);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(iterated);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(l, k);

  // Rayleigh-Ritz: rotate within span(q) onto the singular directions.
  const Eigen::MatrixXd projected = q.transpose() * y;
  Eigen::MatrixXd small = Eigen::MatrixXd::Zero(k, k);
  small.selfadjointView<Eigen::Lower>().rankUpdate(projected);
  small = small.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(small);
  const Eigen::MatrixXd rotation = ritz.eigenvectors().rowwise().reverse();
  const Eigen::VectorXd lambda = ritz.eigenvalues().reverse();

  ReducedData out;
  out.basis = (q * rotation).transpose();
  out.singular_values = lambda.cwiseMax(0.0).cwiseSqrt();
  const double top = out.singular_values.size() ? out.singular_values[0] : 0.0;
  for (Eigen::Index j = 0; j < k; ++j)
    if (out.singular_values[j] < kRankTolerance * top) out.singular_values[j] = 0.0;

  const Eigen::VectorXd mean_pixel = y.rowwise().mean();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double d = out.basis.row(j).dot(mean_pixel);
    bool flip = d < 0.0;
    if (std::abs(d) <= 1e-14 * mean_pixel.norm()) {
      Eigen::Index arg = 0;
      out.basis.row(j).cwiseAbs().maxCoeff(&arg);
      flip = out.basis(j, arg) < 0.0;
    }
    if (flip) out.basis.row(j) *= -1.0;
  }
  out.pixels = out.basis * y;
  return out;
}

inline ReducedData svd_reduce(const HsiCube& cube, Eigen::Index k) {
  return svd_reduce(cube.pixel_matrix(), k);
}

/// basis^T * pixels, the L x N projection of the data onto its subspace.
inline PixelMatrix reconstruct(const ReducedData& reduced) {
  if (reduced.basis.rows() != reduced.pixels.rows())
    throw DimensionError("basis and reduced pixels disagree on K");
  return reduced.basis.transpose() * reduced.pixels;
}

/// Projects new L-band pixels with an existing basis.
inline PixelMatrix project(const ReducedData& reduced, const PixelMatrix& y) {
  if (y.rows() != reduced.basis.cols())
    throw DimensionError("pixel band count does not match the basis");
  return reduced.basis * y;
}

}  // namespace hsiscale
