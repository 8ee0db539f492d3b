#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/parallel.hpp"
#include "hsiscale/random.hpp"
#include "hsiscale/subspace.hpp"

namespace hsiscale {

struct CandidateConfig {
  std::size_t max_retries = 20;         ///< K-set draws per requested candidate
  double separation_fraction = 0.5;     ///< of the median pairwise distance
  std::size_t distance_sample = 512;    ///< pixels used to estimate that median
  double max_condition = 1e6;           ///< on the K x K pixel matrix B
};

/// Normal n of the hyperplane through the columns of B, i.e. B^T n = 1.
/// Empty when B is singular.
inline std::optional<Eigen::VectorXd> normal_through(const Eigen::MatrixXd& columns) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(columns.transpose());
  if (!lu.isInvertible()) return std::nullopt;
  Eigen::VectorXd n = lu.solve(Eigen::VectorXd::Ones(columns.cols()));
  if (!n.allFinite()) return std::nullopt;
  return n;
}

/// Median Euclidean distance over all pairs of a seeded subsample of pixels.
inline double median_pairwise_distance(const PixelMatrix& pixels, std::size_t sample, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(pixels.cols());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t m = std::min(sample, n);
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  std::vector<double> d;
  d.reserve(m * (m - 1) / 2);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      d.push_back((pixels.col(static_cast<Eigen::Index>(idx[a])) -
                   pixels.col(static_cast<Eigen::Index>(idx[b])))
                      .norm());
  if (d.empty()) return 0.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

/// Candidate hyperplane normals, each through K randomly drawn reduced pixels.
///
/// A K-set is accepted when its closest pair is at least
/// `separation_fraction` times the median pairwise distance apart and the
/// condition number of B stays below `max_condition`. Each candidate is
/// unit length with c*.n > 0. Candidate j draws from its own RNG stream, so
/// the result does not depend on the thread schedule. Returns between 1 and
/// `count` normals.
inline std::vector<Eigen::VectorXd> candidate_normals(const ReducedData& reduced, std::size_t count,
                                                      std::uint64_t seed, const CandidateConfig& config = {}) {
  const PixelMatrix& y = reduced.pixels;
  const Eigen::Index k = y.rows();
  const std::size_t n = static_cast<std::size_t>(y.cols());
  if (count == 0) throw DimensionError("candidate count must be at least 1");
  if (n < static_cast<std::size_t>(k))
    throw DimensionError("need at least K = " + std::to_string(k) + " pixels, have " + std::to_string(n));

  const Eigen::VectorXd c_star = mean_point(y);
  const double floor = denom_floor(y);
  Rng sampler = make_rng(seed, 0);
  const double min_separation =
      config.separation_fraction * median_pairwise_distance(y, config.distance_sample, sampler);

  std::vector<std::optional<Eigen::VectorXd>> slots(count);
  parallel_for(count, [&](std::size_t j) {
    Rng rng = make_rng(seed, j + 1);
    std::vector<Eigen::Index> pick(static_cast<std::size_t>(k));
    Eigen::MatrixXd b(k, k);
    for (std::size_t attempt = 0; attempt < config.max_retries; ++attempt) {
      for (Eigen::Index a = 0; a < k; ++a) {
        Eigen::Index candidate;
        do {
          candidate = static_cast<Eigen::Index>(uniform_index(rng, n));
        } while (std::find(pick.begin(), pick.begin() + a, candidate) != pick.begin() + a);
        pick[static_cast<std::size_t>(a)] = candidate;
        b.col(a) = y.col(candidate);
      }
      bool separated = true;
      for (Eigen::Index a = 0; a < k && separated; ++a)
        for (Eigen::Index c = a + 1; c < k && separated; ++c)
          separated = (b.col(a) - b.col(c)).norm() >= min_separation;
      if (!separated) continue;

      Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
      const auto& s = svd.singularValues();
      if (!(s[k - 1] > 0.0) || s[0] / s[k - 1] > config.max_condition) continue;

      auto normal = normal_through(b);
      if (!normal) continue;
      Eigen::VectorXd u = normal->normalized();
      double d = c_star.dot(u);
      if (!(std::abs(d) > floor)) continue;
      if (d < 0.0) u = -u;
      slots[j] = std::move(u);
      return;
    }
  });

  std::vector<Eigen::VectorXd> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  if (out.empty())
    throw DegenerateDataError("no well-conditioned, separated K-set of pixels found after " +
                              std::to_string(config.max_retries * count) +
                              " attempts; the cube may be rank-deficient");
  return out;
}

/// Uniformly random unit normals oriented with c*.n > 0.
inline std::vector<Eigen::VectorXd> random_normals(const ReducedData& reduced, std::size_t count,
                                                   std::uint64_t seed) {
  const Eigen::VectorXd c_star = mean_point(reduced.pixels);
  const double floor = denom_floor(reduced.pixels);
  if (!(c_star.norm() > floor))
    throw DegenerateDataError("mean pixel is at the origin; no hyperplane normal is admissible");
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  Rng rng = make_rng(seed, 0x52414e44u);
  while (out.size() < count) {
    Eigen::VectorXd u(reduced.dim());
    for (Eigen::Index d = 0; d < u.size(); ++d) u[d] = standard_normal(rng);
    u.normalize();
    const double dot = c_star.dot(u);
    if (!(std::abs(dot) > floor)) continue;
    out.push_back(dot < 0.0 ? Eigen::VectorXd(-u) : u);
  }
  return out;
}

}  // namespace hsiscale
