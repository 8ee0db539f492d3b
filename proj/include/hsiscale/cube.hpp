#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hsiscale/error.hpp"

namespace hsiscale {

/// d x N matrix, one pixel per column in raster order.
using PixelMatrix = Eigen::MatrixXd;

/// L-band reflectance image on an H x W grid. Storage is band-major:
/// value (band b, row r, col c) lives at data[(b * H + r) * W + c], so a
/// single band is contiguous. Values are held in double precision in memory
/// and as f32 on disk.
class HsiCube {
public:
  HsiCube() = default;

  HsiCube(std::size_t bands, std::size_t height, std::size_t width)
      : HsiCube(bands, height, width, std::vector<double>(bands * height * width, 0.0)) {}

  HsiCube(std::size_t bands, std::size_t height, std::size_t width, std::vector<double> data)
      : bands_(bands), height_(height), width_(width), data_(std::move(data)) {
    if (bands == 0 || height == 0 || width == 0)
      throw DimensionError("cube dimensions must be positive");
    if (data_.size() != bands * height * width)
      throw DimensionError("cube payload has " + std::to_string(data_.size()) +
                           " values, expected " + std::to_string(bands * height * width));
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i]))
        throw ValidationError("non-finite reflectance at index " + std::to_string(i));
      if (data_[i] < 0.0)
        throw ValidationError("negative reflectance at index " + std::to_string(i));
    }
  }

  /// Builds a cube from an L x N pixel matrix (N = height * width).
  static HsiCube from_pixels(const PixelMatrix& pixels, std::size_t height, std::size_t width) {
    if (static_cast<std::size_t>(pixels.cols()) != height * width)
      throw DimensionError("pixel matrix has " + std::to_string(pixels.cols()) +
                           " columns, grid holds " + std::to_string(height * width));
    const std::size_t bands = static_cast<std::size_t>(pixels.rows());
    const std::size_t n = height * width;
    std::vector<double> data(bands * n);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t b = 0; b < bands; ++b) data[b * n + p] = pixels(b, p);
    return HsiCube(bands, height, width, std::move(data));
  }

  std::size_t bands() const noexcept { return bands_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return height_ * width_; }

  std::span<const double> data() const noexcept { return data_; }

  double at(std::size_t band, std::size_t row, std::size_t col) const {
    return data_[(band * height_ + row) * width_ + col];
  }

  /// Copy of pixel `p` (raster index) across all bands.
  Eigen::VectorXd pixel(std::size_t p) const {
    Eigen::VectorXd v(bands_);
    const std::size_t n = pixel_count();
    for (std::size_t b = 0; b < bands_; ++b) v[b] = data_[b * n + p];
    return v;
  }

  /// L x N matrix with pixel i in column i.
  PixelMatrix pixel_matrix() const {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(data_.data(), static_cast<Eigen::Index>(bands_),
                                      static_cast<Eigen::Index>(pixel_count()));
  }

  friend bool operator==(const HsiCube&, const HsiCube&) = default;

private:
  std::size_t bands_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Synthetic ground truth: endmember signatures (L x K, one per column) and
/// abundances (K x N, one column per pixel).
struct GroundTruth {
  Eigen::MatrixXd endmembers;
  Eigen::MatrixXd abundances;

  /// Throws ValidationError when ANC/ASC or endmember independence is violated.
  void validate(double asc_tol = 1e-9) const {
    if (endmembers.cols() != abundances.rows())
      throw DimensionError("endmember count does not match abundance rows");
    for (Eigen::Index i = 0; i < abundances.cols(); ++i) {
      if ((abundances.col(i).array() < 0.0).any())
        throw ValidationError("negative abundance in pixel " + std::to_string(i));
      if (std::abs(abundances.col(i).sum() - 1.0) > asc_tol)
        throw ValidationError("abundances of pixel " + std::to_string(i) + " do not sum to one");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(endmembers);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 1e-10 * s[0])
      throw ValidationError("endmember signatures are linearly dependent");
  }
};

}  // namespace hsiscale
