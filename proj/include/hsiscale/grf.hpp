#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hsiscale/error.hpp"
#include "hsiscale/random.hpp"

namespace hsiscale {

enum class FieldKind { matern, spheric };

inline std::string_view to_string(FieldKind k) { return k == FieldKind::matern ? "matern" : "spheric"; }

inline FieldKind parse_field_kind(std::string_view s) {
  if (s == "matern") return FieldKind::matern;
  if (s == "spheric") return FieldKind::spheric;
  throw ValidationError("unknown field kind '" + std::string(s) + "' (expected matern or spheric)");
}

/// Unit-variance stationary correlation at distance r (pixels).
///   matern:  2^(1-nu)/Gamma(nu) x^nu K_nu(x),  x = sqrt(2 nu) r / length
///   spheric: 1 - 1.5 (r/a) + 0.5 (r/a)^3 for r < a, else 0, with range a = length
inline double correlation(FieldKind kind, double r, double length, double nu) {
  if (r <= 0.0) return 1.0;
  if (kind == FieldKind::spheric) {
    const double h = r / length;
    return h >= 1.0 ? 0.0 : 1.0 - 1.5 * h + 0.5 * h * h * h;
  }
  const double x = std::sqrt(2.0 * nu) * r / length;
  if (x > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * std::cyl_bessel_k(nu, x);
}

namespace detail {

inline std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// In-place 2-D forward DFT of a rows x cols row-major grid.
inline void fft2(std::vector<std::complex<double>>& grid, std::size_t rows, std::size_t cols) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in, out;
  in.resize(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, in.begin());
    fft.fwd(out, in);
    std::copy(out.begin(), out.end(), grid.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  in.resize(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) in[r] = grid[r * cols + c];
    fft.fwd(out, in);
    for (std::size_t r = 0; r < rows; ++r) grid[r * cols + c] = out[r];
  }
}

}  // namespace detail

/// Zero-mean, unit-variance Gaussian random field on an h x w grid (row-major)
/// by circulant embedding.
///
/// The correlation function is wrapped onto a torus at least twice the grid
/// size in each direction and diagonalized by a 2-D FFT. Negative embedding
/// eigenvalues trigger doubling of the torus (up to three times); tiny
/// negative values left after that are clipped to zero.
inline std::vector<double> gaussian_random_field(std::size_t h, std::size_t w, FieldKind kind, double length,
                                                 double nu, Rng& rng) {
  if (h == 0 || w == 0) throw DimensionError("field grid must be non-empty");
  if (!(length > 0.0)) throw ValidationError("correlation length must be positive");
  if (kind == FieldKind::matern && !(nu > 0.0)) throw ValidationError("matern smoothness must be positive");

  const std::size_t reach = kind == FieldKind::spheric ? static_cast<std::size_t>(std::ceil(length)) : 0;
  std::size_t m1 = detail::next_pow2(std::max(2 * h, h + reach));
  std::size_t m2 = detail::next_pow2(std::max(2 * w, w + reach));

  std::vector<std::complex<double>> spectrum;
  for (int attempt = 0;; ++attempt) {
    spectrum.assign(m1 * m2, {0.0, 0.0});
    for (std::size_t i = 0; i < m1; ++i) {
      const double di = static_cast<double>(std::min(i, m1 - i));
      for (std::size_t j = 0; j < m2; ++j) {
        const double dj = static_cast<double>(std::min(j, m2 - j));
        spectrum[i * m2 + j] = correlation(kind, std::hypot(di, dj), length, nu);
      }
    }
    detail::fft2(spectrum, m1, m2);
    double max_ev = 0.0, min_ev = 0.0;
    for (const auto& v : spectrum) {
      max_ev = std::max(max_ev, v.real());
      min_ev = std::min(min_ev, v.real());
    }
    if (min_ev >= -1e-8 * max_ev) break;
    if (attempt == 3)
      throw GenerationError("circulant embedding is not positive definite (min eigenvalue " +
                            std::to_string(min_ev) + ") even after padding");
    m1 *= 2;
    m2 *= 2;
  }

  const double scale = 1.0 / static_cast<double>(m1 * m2);
  for (auto& v : spectrum) {
    const double amp = std::sqrt(std::max(v.real(), 0.0) * scale);
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    v = {amp * re, amp * im};
  }
  detail::fft2(spectrum, m1, m2);

  std::vector<double> field(h * w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) field[i * w + j] = spectrum[i * m2 + j].real();
  return field;
}

/// Sample autocorrelation of a row-major field at a horizontal lag.
inline double horizontal_autocorrelation(const std::vector<double>& field, std::size_t h, std::size_t w,
                                         std::size_t lag) {
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double v : field) var += (v - mean) * (v - mean);
  var /= static_cast<double>(field.size());
  double cov = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j + lag < w; ++j, ++count)
      cov += (field[i * w + j] - mean) * (field[i * w + j + lag] - mean);
  return count ? cov / static_cast<double>(count) / var : 0.0;
}

}  // namespace hsiscale
