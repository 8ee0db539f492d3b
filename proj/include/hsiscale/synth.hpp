#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsiscale/cube.hpp"
#include "hsiscale/error.hpp"
#include "hsiscale/grf.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/random.hpp"

namespace hsiscale {

/// Scaling factors are clamped here before re-standardization.
inline constexpr double kScaleClamp = 0.1;
/// Minimum pairwise spectral angle between generated endmembers (radians).
inline constexpr double kMinEndmemberAngle = 0.1;

struct SynthConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t bands = 431;
  std::size_t endmembers = 5;
  FieldKind field_kind = FieldKind::matern;
  double correlation_length = 8.0;        ///< pixels
  double matern_nu = 1.5;
  double abundance_contrast = 3.0;        ///< std of the fields fed to the softmax
  double scale_std = 0.3;
  double scale_correlation_length = 4.0;  ///< pixels; use a tiny value for i.i.d. factors
  std::optional<double> snr_db;           ///< additive white noise on the scaled cube
  std::uint64_t seed = 0;

  std::size_t pixels() const { return height * width; }

  void validate() const {
    if (height == 0 || width == 0) throw ValidationError("grid dimensions must be positive");
    if (endmembers < 2) throw ValidationError("at least two endmembers are required");
    if (bands < endmembers) throw ValidationError("bands must be at least the endmember count");
    if (!(correlation_length > 0.0) || !(scale_correlation_length > 0.0))
      throw ValidationError("correlation lengths must be positive");
    if (field_kind == FieldKind::matern && !(matern_nu > 0.0))
      throw ValidationError("matern smoothness must be positive");
    if (!(scale_std >= 0.0)) throw ValidationError("scale_std must be nonnegative");
    if (scale_std > 0.5) throw ValidationError("scale_std above 0.5 is not supported");
    if (!(abundance_contrast > 0.0)) throw ValidationError("abundance_contrast must be positive");
  }
};

struct SynthScene {
  HsiCube clean_cube;
  HsiCube scaled_cube;
  GroundTruth truth;
  ScalingField mu_true;
  std::vector<std::string> warnings;
};

/// Spectral angle between two nonzero vectors, cosine clamped to [-1, 1].
inline double spectral_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("spectral angle of a zero vector");
  return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

/// Smooth synthetic spectra, one per column of the returned L x K matrix.
///
/// Each column is a linear ramp plus 3-6 Gaussian bumps, rescaled into a
/// random sub-interval of [0.05, 0.95]. The whole matrix is redrawn until
/// every pair of columns is at least 0.1 rad apart and the columns are
/// linearly independent.
inline Eigen::MatrixXd gen_endmembers(std::size_t bands, std::size_t k, std::uint64_t seed) {
  if (k == 0 || bands < k) throw ValidationError("need 1 <= K <= L");
  Rng rng = make_rng(seed, 0x454d);
  const auto l = static_cast<Eigen::Index>(bands);
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd m(l, kk);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index e = 0; e < kk; ++e) {
      const double offset = uniform(rng, -0.5, 0.5);
      const double slope = uniform(rng, -1.0, 1.0);
      const int bumps = 3 + static_cast<int>(uniform_index(rng, 4));
      std::vector<double> amp(bumps), centre(bumps), width(bumps);
      for (int j = 0; j < bumps; ++j) {
        amp[j] = uniform(rng, -1.0, 1.0);
        centre[j] = uniform(rng, 0.0, 1.0);
        width[j] = uniform(rng, 0.02, 0.15);
      }
      Eigen::VectorXd s(l);
      for (Eigen::Index b = 0; b < l; ++b) {
        const double t = l > 1 ? static_cast<double>(b) / static_cast<double>(l - 1) : 0.0;
        double v = offset + slope * t;
        for (int j = 0; j < bumps; ++j) {
          const double z = (t - centre[j]) / width[j];
          v += amp[j] * std::exp(-0.5 * z * z);
        }
        s[b] = v;
      }
      const double lo = uniform(rng, 0.05, 0.5);
      const double hi = uniform(rng, lo + 0.2, 0.95);
      const double smin = s.minCoeff(), smax = s.maxCoeff();
      if (smax - smin > 0.0)
        m.col(e) = (lo + (hi - lo) * (s.array() - smin) / (smax - smin)).matrix();
      else
        m.col(e).setConstant(0.5 * (lo + hi));
      m.col(e) = m.col(e).cwiseMax(0.05).cwiseMin(0.95);
    }
    bool separated = true;
    for (Eigen::Index a = 0; a < kk && separated; ++a)
      for (Eigen::Index b = a + 1; b < kk && separated; ++b)
        separated = spectral_angle(m.col(a), m.col(b)) >= kMinEndmemberAngle;
    if (!separated) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv[kk - 1] > 1e-10 * sv[0]) return m;
  }
  throw GenerationError("could not draw " + std::to_string(k) + " endmembers separated by " +
                        std::to_string(kMinEndmemberAngle) + " rad in 100 attempts");
}

/// K x N abundances: one Gaussian random field per endmember, mapped to the
/// simplex by a per-pixel softmax (temperature 1).
inline Eigen::MatrixXd gen_abundance_field(const SynthConfig& config) {
  config.validate();
  const auto k = static_cast<Eigen::Index>(config.endmembers);
  const auto n = static_cast<Eigen::Index>(config.pixels());
  Eigen::MatrixXd logits(k, n);
  for (Eigen::Index e = 0; e < k; ++e) {
    Rng rng = make_rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(e)), 0);
    const auto field = gaussian_random_field(config.height, config.width, config.field_kind,
                                             config.correlation_length, config.matern_nu, rng);
    for (Eigen::Index p = 0; p < n; ++p) logits(e, p) = config.abundance_contrast * field[static_cast<std::size_t>(p)];
  }
  Eigen::MatrixXd a(k, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Eigen::ArrayXd z = (logits.col(p).array() - logits.col(p).maxCoeff()).exp();
    a.col(p) = (z / z.sum()).matrix();
  }
  return a;
}

struct ScalingFieldResult {
  ScalingField field;
  double initial_clamp_fraction = 0.0;  ///< share of pixels below the clamp before re-standardizing
};

/// mu = 1 + scale_std * g for a unit-variance field g, clamped at 0.1 and
/// re-standardized to mean 1 and standard deviation scale_std.
inline ScalingFieldResult gen_scaling_field_detailed(const SynthConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.pixels());
  ScalingFieldResult out;
  if (config.scale_std == 0.0) {
    out.field.values = Eigen::VectorXd::Ones(n);
    return out;
  }
  Rng rng = make_rng(derive_seed(config.seed, 200), 0);
  const auto g = gaussian_random_field(config.height, config.width, config.field_kind,
                                       config.scale_correlation_length, config.matern_nu, rng);
  Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(g.data(), n);

  auto restandardize = [&](Eigen::VectorXd& v) {
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().mean());
    if (!(sd > 0.0)) throw GenerationError("scaling field has zero variance");
    v = (1.0 + config.scale_std * (v.array() - mean) / sd).matrix();
  };
  restandardize(mu);

  std::vector<bool> hit(static_cast<std::size_t>(n), false);
  for (int pass = 0; pass < 100; ++pass) {
    std::size_t below = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mu[i] < kScaleClamp) {
        mu[i] = kScaleClamp;
        hit[static_cast<std::size_t>(i)] = true;
        ++below;
      }
    if (pass == 0) out.initial_clamp_fraction = static_cast<double>(below) / static_cast<double>(n);
    if (below == 0) break;
    restandardize(mu);
  }
  out.field.values = std::move(mu);
  out.field.clamped = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
  return out;
}

inline ScalingField gen_scaling_field(const SynthConfig& config) { return gen_scaling_field_detailed(config).field; }

/// Clean scene M0 A, scaled by a per-pixel factor field, with ground truth.
inline SynthScene gen_scene(const SynthConfig& config) {
  config.validate();
  SynthScene scene;
  scene.truth.endmembers = gen_endmembers(config.bands, config.endmembers, derive_seed(config.seed, 11));
  scene.truth.abundances = gen_abundance_field(config);
  auto scaling = gen_scaling_field_detailed(config);
  if (scaling.initial_clamp_fraction > 0.01)
    scene.warnings.push_back("scaling clamp at " + std::to_string(kScaleClamp) + " bound on " +
                             std::to_string(100.0 * scaling.initial_clamp_fraction) + "% of pixels");
  scene.mu_true = std::move(scaling.field);

  const Eigen::MatrixXd clean = scene.truth.endmembers * scene.truth.abundances;
  scene.clean_cube = HsiCube::from_pixels(clean, config.height, config.width);

  Eigen::MatrixXd scaled = clean * scene.mu_true.values.asDiagonal();
  if (config.snr_db) {
    const double signal = scaled.squaredNorm() / static_cast<double>(scaled.size());
    const double sd = std::sqrt(signal / std::pow(10.0, *config.snr_db / 10.0));
    Rng rng = make_rng(derive_seed(config.seed, 300), 0);
    for (Eigen::Index c = 0; c < scaled.cols(); ++c)
      for (Eigen::Index r = 0; r < scaled.rows(); ++r)
        scaled(r, c) = std::max(0.0, scaled(r, c) + sd * standard_normal(rng));
  }
  scene.scaled_cube = HsiCube::from_pixels(scaled, config.height, config.width);
  return scene;
}

}  // namespace hsiscale
