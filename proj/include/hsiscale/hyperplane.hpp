#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/subspace.hpp"

namespace hsiscale {

/// Estimated scaling factors below this value are clamped (deep shadow).
inline constexpr double kMuFloor = 1e-3;
/// |c*.n| must exceed this multiple of the mean pixel norm.
inline constexpr double kDenomFloorFactor = 1e-9;

/// Mean of the columns, summed with Neumaier compensation per coordinate.
inline Eigen::VectorXd mean_point(const PixelMatrix& pixels) {
  if (pixels.cols() == 0) throw DimensionError("mean of an empty pixel set");
  Eigen::VectorXd out(pixels.rows());
  for (Eigen::Index d = 0; d < pixels.rows(); ++d) {
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index i = 0; i < pixels.cols(); ++i) {
      const double v = pixels(d, i);
      const double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    out[d] = (sum + comp) / static_cast<double>(pixels.cols());
  }
  return out;
}

inline Eigen::VectorXd mean_point(const ReducedData& reduced) { return mean_point(reduced.pixels); }

/// 1e-9 times the mean Euclidean pixel norm.
inline double denom_floor(const PixelMatrix& pixels) {
  if (pixels.cols() == 0) return 0.0;
  return kDenomFloorFactor * pixels.colwise().stableNorm().mean();
}

/// Point-normal form of the hyperplane that should hold the unscaled pixels.
/// The normal is stored with unit length and oriented so that c*.n > 0.
class HyperplaneModel {
public:
  HyperplaneModel(Eigen::VectorXd c_star, const Eigen::VectorXd& normal, double floor = 0.0)
      : c_star_(std::move(c_star)) {
    if (c_star_.size() != normal.size())
      throw DimensionError("c* has dimension " + std::to_string(c_star_.size()) +
                           ", normal has " + std::to_string(normal.size()));
    const double len = normal.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw ValidationError("normal must be finite and nonzero");
    normal_ = normal / len;
    denom_ = c_star_.dot(normal_);
    if (denom_ < 0.0) {
      normal_ = -normal_;
      denom_ = -denom_;
    }
    if (!(denom_ > floor))
      throw NearOrthogonalNormalError("|c*.n| = " + std::to_string(denom_) +
                                      " does not exceed the floor " + std::to_string(floor));
  }

  const Eigen::VectorXd& c_star() const noexcept { return c_star_; }
  const Eigen::VectorXd& normal() const noexcept { return normal_; }
  double denom() const noexcept { return denom_; }

private:
  Eigen::VectorXd c_star_;
  Eigen::VectorXd normal_;
  double denom_ = 0.0;
};

/// Per-pixel scaling factors, mean one, bounded below by a floor.
struct ScalingField {
  Eigen::VectorXd values;
  std::size_t clamped = 0;  ///< pixels raised to the floor during construction

  Eigen::Index size() const noexcept { return values.size(); }
  double mean() const { return values.mean(); }

  /// Clamps at `floor`, then divides by the mean, repeating until no value
  /// sits below the floor.
  static ScalingField normalized(Eigen::VectorXd raw, double floor = kMuFloor) {
    if (raw.size() == 0) throw DimensionError("empty scaling field");
    ScalingField out;
    std::vector<bool> hit(static_cast<std::size_t>(raw.size()), false);
    for (int pass = 0; pass < 64; ++pass) {
      bool any = false;
      for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (!(raw[i] >= floor)) {
          raw[i] = floor;
          hit[static_cast<std::size_t>(i)] = true;
          any = true;
        }
      }
      raw /= raw.mean();
      if (!any) break;
    }
    out.values = std::move(raw);
    for (bool h : hit) out.clamped += h ? 1 : 0;
    return out;
  }
};

/// mu_i = y_i.n / c*.n with no clamping. Its mean is exactly one in exact
/// arithmetic because c* is the mean pixel.
inline Eigen::VectorXd raw_scaling(const PixelMatrix& pixels, const HyperplaneModel& model) {
  if (pixels.rows() != model.normal().size()) throw DimensionError("pixel dimension does not match the model");
  return (pixels.transpose() * model.normal()) / model.denom();
}

inline ScalingField estimate_scaling(const ReducedData& reduced, const HyperplaneModel& model,
                                     double mu_floor = kMuFloor) {
  return ScalingField::normalized(raw_scaling(reduced.pixels, model), mu_floor);
}

/// Sum over pixels of ||y_i - y_i / mu_i||^2 with mu_i = y_i.n / c*.n.
///
/// The objective is invariant to the length and sign of n. Pixels whose
/// estimated factor falls below the floor (including negative estimates)
/// contribute with the floor value and no gradient.
class PsiObjective {
public:
  struct Value {
    double psi = std::numeric_limits<double>::infinity();
    std::size_t clamped = 0;
    bool valid = false;
  };

  struct ValueGradient {
    double psi = std::numeric_limits<double>::infinity();
    Eigen::VectorXd gradient;
    std::size_t clamped = 0;
    bool valid = false;
  };

  PsiObjective(const PixelMatrix& pixels, Eigen::VectorXd c_star, double mu_floor = kMuFloor)
      : pixels_(&pixels), c_star_(std::move(c_star)), mu_floor_(mu_floor) {
    if (c_star_.size() != pixels.rows()) throw DimensionError("c* dimension does not match pixels");
    sq_norms_ = pixels.colwise().squaredNorm().transpose();
    floor_ = denom_floor(pixels);
  }

  const PixelMatrix& pixels() const noexcept { return *pixels_; }
  const Eigen::VectorXd& c_star() const noexcept { return c_star_; }
  double floor() const noexcept { return floor_; }
  double mu_floor() const noexcept { return mu_floor_; }
  Eigen::Index dim() const noexcept { return pixels_->rows(); }

  /// Unit normal with c*.n > 0, or an empty vector when n is unusable.
  Eigen::VectorXd canonical(const Eigen::VectorXd& n) const {
    const double len = n.norm();
    if (n.size() != dim() || !(len > 0.0) || !std::isfinite(len)) return {};
    Eigen::VectorXd u = n / len;
    const double d = c_star_.dot(u);
    if (!(std::abs(d) > floor_)) return {};
    if (d < 0.0) u = -u;
    return u;
  }

  /// Psi(n), or +inf when n is (near) orthogonal to c*.
  Value value(const Eigen::VectorXd& n) const {
    Value out;
    const Eigen::VectorXd u = canonical(n);
    if (u.size() == 0) return out;
    const double denom = c_star_.dot(u);
    const PixelMatrix& y = *pixels_;
    const Eigen::VectorXd proj = y.transpose() * u;
    double total = 0.0;
    for (Eigen::Index block = 0; block < y.cols(); block += kBlock) {
      const Eigen::Index end = std::min<Eigen::Index>(y.cols(), block + kBlock);
      double partial = 0.0;
      for (Eigen::Index i = block; i < end; ++i) {
        double mu = proj[i] / denom;
        if (!(mu >= mu_floor_)) {
          mu = mu_floor_;
          ++out.clamped;
        }
        const double r = 1.0 - 1.0 / mu;
        partial += sq_norms_[i] * r * r;
      }
      total += partial;
    }
    out.psi = total;
    out.valid = true;
    return out;
  }

  /// Throwing variant for callers outside the optimizers.
  double operator()(const Eigen::VectorXd& n) const {
    const Value v = value(n);
    if (!v.valid)
      throw NearOrthogonalNormalError("normal is (near) orthogonal to c*; |c*.n| <= " + std::to_string(floor_));
    return v.psi;
  }

  /// Psi and its Euclidean gradient at the canonical representative of n.
  ValueGradient value_gradient(const Eigen::VectorXd& n) const {
    ValueGradient out;
    const Eigen::VectorXd u = canonical(n);
    if (u.size() == 0) return out;
    const double denom = c_star_.dot(u);
    const PixelMatrix& y = *pixels_;
    const Eigen::VectorXd proj = y.transpose() * u;
    // grad = sum_i w_i (y_i - mu_i c*) / denom, w_i = 2 |y_i|^2 (1 - 1/mu_i) / mu_i^2
    Eigen::VectorXd weighted_y = Eigen::VectorXd::Zero(dim());
    double weight_mu_sum = 0.0;
    double total = 0.0;
    for (Eigen::Index block = 0; block < y.cols(); block += kBlock) {
      const Eigen::Index end = std::min<Eigen::Index>(y.cols(), block + kBlock);
      double partial = 0.0;
      Eigen::VectorXd partial_y = Eigen::VectorXd::Zero(dim());
      double partial_mu = 0.0;
      for (Eigen::Index i = block; i < end; ++i) {
        double mu = proj[i] / denom;
        if (!(mu >= mu_floor_)) {
          ++out.clamped;
          const double r = 1.0 - 1.0 / mu_floor_;
          partial += sq_norms_[i] * r * r;
          continue;
        }
        const double r = 1.0 - 1.0 / mu;
        const double w = 2.0 * sq_norms_[i] * r / (mu * mu);
        if (!std::isfinite(w) || !std::isfinite(r))
          throw NumericError("non-finite gradient contribution", static_cast<std::size_t>(i));
        partial += sq_norms_[i] * r * r;
        partial_y += w * y.col(i);
        partial_mu += w * mu;
      }
      total += partial;
      weighted_y += partial_y;
      weight_mu_sum += partial_mu;
    }
    out.psi = total;
    out.gradient = (weighted_y - weight_mu_sum * c_star_) / denom;
    if (!out.gradient.allFinite()) throw NumericError("non-finite gradient", 0);
    out.valid = true;
    return out;
  }

  /// Normal of the canonical representative, for reporting.
  Eigen::VectorXd normal_of(const Eigen::VectorXd& n) const { return canonical(n); }

private:
  static constexpr Eigen::Index kBlock = 4096;

  const PixelMatrix* pixels_;
  Eigen::VectorXd c_star_;
  Eigen::VectorXd sq_norms_;
  double mu_floor_;
  double floor_ = 0.0;
};

/// Psi(n) for the given reduced data and hyperplane point.
inline double objective_psi(const Eigen::VectorXd& normal, const ReducedData& reduced,
                            const Eigen::VectorXd& c_star) {
  return PsiObjective(reduced.pixels, c_star)(normal);
}

/// Divides pixel i of the cube by mu_i, across all bands.
inline HsiCube correct_pixels(const HsiCube& cube, const ScalingField& mu_hat) {
  const std::size_t n = cube.pixel_count();
  if (static_cast<std::size_t>(mu_hat.size()) != n)
    throw DimensionError("scaling field has " + std::to_string(mu_hat.size()) + " values, cube has " +
                         std::to_string(n) + " pixels");
  for (Eigen::Index i = 0; i < mu_hat.size(); ++i)
    if (!(mu_hat.values[i] > 0.0) || !std::isfinite(mu_hat.values[i]))
      throw ValidationError("scaling factor " + std::to_string(i) + " is not a positive finite number");
  std::vector<double> data(cube.data().begin(), cube.data().end());
  for (std::size_t b = 0; b < cube.bands(); ++b)
    for (std::size_t p = 0; p < n; ++p) data[b * n + p] /= mu_hat.values[static_cast<Eigen::Index>(p)];
  return HsiCube(cube.bands(), cube.height(), cube.width(), std::move(data));
}

/// Multiplies pixel i of the cube by mu_i (inverse of correct_pixels).
inline HsiCube apply_scaling(const HsiCube& cube, const Eigen::VectorXd& mu) {
  const std::size_t n = cube.pixel_count();
  if (static_cast<std::size_t>(mu.size()) != n) throw DimensionError("scaling field length mismatch");
  std::vector<double> data(cube.data().begin(), cube.data().end());
  for (std::size_t b = 0; b < cube.bands(); ++b)
    for (std::size_t p = 0; p < n; ++p) data[b * n + p] *= mu[static_cast<Eigen::Index>(p)];
  return HsiCube(cube.bands(), cube.height(), cube.width(), std::move(data));
}

}  // namespace hsiscale
