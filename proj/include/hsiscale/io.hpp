#pragma once

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "hsiscale/cube.hpp"
#include "hsiscale/error.hpp"

namespace hsiscale {

// HSIC layout: "HSIC" | u16 version | u16 reserved | u32 L | u32 H | u32 W |
// L*H*W f32 values, band-major. All integers and floats little-endian.
inline constexpr std::array<char, 4> kCubeMagic{'H', 'S', 'I', 'C'};
inline constexpr std::uint16_t kCubeVersion = 1;
inline constexpr std::size_t kCubeHeaderBytes = 20;

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing", 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path.string() + "' failed", bytes.size());
}

template <class U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFFu));
}

template <class U>
U get_le(const std::vector<unsigned char>& in, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[offset + i]) << (8 * i);
  return v;
}

inline void put_f32(std::vector<unsigned char>& out, double value) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

inline float get_f32(const std::vector<unsigned char>& in, std::size_t offset) {
  return std::bit_cast<float>(get_le<std::uint32_t>(in, offset));
}

}  // namespace detail

inline std::vector<unsigned char> encode_cube(const HsiCube& cube) {
  std::vector<unsigned char> out;
  out.reserve(kCubeHeaderBytes + 4 * cube.data().size());
  out.insert(out.end(), kCubeMagic.begin(), kCubeMagic.end());
  detail::put_le<std::uint16_t>(out, kCubeVersion);
  detail::put_le<std::uint16_t>(out, 0);
  for (std::size_t dim : {cube.bands(), cube.height(), cube.width()}) {
    if (dim > std::numeric_limits<std::uint32_t>::max())
      throw DimensionError("cube dimension does not fit in u32");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  }
  for (double v : cube.data()) detail::put_f32(out, v);
  return out;
}

inline HsiCube decode_cube(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kCubeHeaderBytes)
    throw FormatError("truncated header: expected " + std::to_string(kCubeHeaderBytes) +
                          " bytes, found " + std::to_string(bytes.size()),
                      bytes.size());
  if (!std::equal(kCubeMagic.begin(), kCubeMagic.end(), bytes.begin()))
    throw FormatError("bad magic, expected HSIC", 0);
  if (const auto version = detail::get_le<std::uint16_t>(bytes, 4); version != kCubeVersion)
    throw FormatError("unsupported version " + std::to_string(version), 4);
  if (detail::get_le<std::uint16_t>(bytes, 6) != 0)
    throw FormatError("reserved field must be zero", 6);

  const std::uint64_t bands = detail::get_le<std::uint32_t>(bytes, 8);
  const std::uint64_t height = detail::get_le<std::uint32_t>(bytes, 12);
  const std::uint64_t width = detail::get_le<std::uint32_t>(bytes, 16);
  if (bands == 0 || height == 0 || width == 0) throw FormatError("zero cube dimension", 8);

  // L*H*W*4 can exceed 64 bits for hostile headers; each factor fits in 32.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 2;
  if (bands * height > limit / (width * 4u))
    throw FormatError("dimension overflow: header claims " + std::to_string(bands) + "x" +
                          std::to_string(height) + "x" + std::to_string(width),
                      8);
  const std::uint64_t expected = bands * height * width * 4u;
  const std::uint64_t payload = bytes.size() - kCubeHeaderBytes;
  if (expected > payload)
    throw FormatError("truncated payload: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(payload),
                      bytes.size());
  if (expected < payload)
    throw FormatError("trailing bytes after payload: expected " +
                          std::to_string(expected) + " bytes, found " +
                          std::to_string(payload),
                      kCubeHeaderBytes + static_cast<std::size_t>(expected));

  const std::size_t count = static_cast<std::size_t>(bands * height * width);
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = kCubeHeaderBytes + 4 * i;
    const float v = detail::get_f32(bytes, offset);
    if (!std::isfinite(v)) throw FormatError("non-finite value", offset);
    if (v < 0.0f) throw FormatError("negative reflectance", offset);
    data[i] = v;
  }
  return HsiCube(bands, height, width, std::move(data));
}

inline void write_cube(const HsiCube& cube, const std::filesystem::path& path) {
  detail::write_bytes(path, encode_cube(cube));
}

inline HsiCube read_cube(const std::filesystem::path& path) { return decode_cube(detail::read_bytes(path)); }

// ---------------------------------------------------------------------------
// Matrices: CSV with a "rows,cols" header line, or raw f32 with a u32 rows,
// u32 cols header.

enum class MatrixFormat { csv, raw };

/// ".csv" selects CSV; anything else selects raw f32.
inline MatrixFormat matrix_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::raw;
}

inline void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::string text = std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "\n";
  std::array<char, 32> buf{};
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) text.push_back(',');
      auto res = std::to_chars(buf.data(), buf.data() + buf.size(), m(r, c));
      text.append(buf.data(), res.ptr);
    }
    text.push_back('\n');
  }
  detail::write_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;

  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
  };
  auto expect = [&](char ch) {
    skip_ws();
    if (pos >= text.size() || text[pos] != ch)
      throw FormatError(std::string("expected '") + (ch == '\n' ? "\\n" : std::string(1, ch)) + "'", pos);
    ++pos;
  };
  auto read_count = [&]() -> Eigen::Index {
    skip_ws();
    long long v = -1;
    auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
    if (res.ec != std::errc() || v < 0) throw FormatError("expected a nonnegative integer", pos);
    pos = static_cast<std::size_t>(res.ptr - text.data());
    return static_cast<Eigen::Index>(v);
  };

  const Eigen::Index rows = read_count();
  expect(',');
  const Eigen::Index cols = read_count();
  expect('\n');
  if (rows > 0 && cols > 0 && static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > text.size())
    throw FormatError("header claims more values than the file can hold", 0);

  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) expect(',');
      skip_ws();
      double v = 0.0;
      auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
      if (res.ec != std::errc()) throw FormatError("expected a number", pos);
      pos = static_cast<std::size_t>(res.ptr - text.data());
      m(r, c) = v;
    }
    if (pos < text.size() || r + 1 < rows) expect('\n');
  }
  skip_ws();
  while (pos < text.size() && text[pos] == '\n') ++pos;
  if (pos != text.size()) throw FormatError("unexpected trailing content", pos);
  return m;
}

inline void write_matrix_raw(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  out.reserve(8 + 4 * static_cast<std::size_t>(m.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_f32(out, m(r, c));
  detail::write_bytes(path, out);
}

inline Eigen::MatrixXd read_matrix_raw(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  if (bytes.size() < 8)
    throw FormatError("truncated header: expected 8 bytes, found " + std::to_string(bytes.size()),
                      bytes.size());
  const std::uint64_t rows = detail::get_le<std::uint32_t>(bytes, 0);
  const std::uint64_t cols = detail::get_le<std::uint32_t>(bytes, 4);
  const std::uint64_t expected = rows * cols * 4u;
  if (expected != bytes.size() - 8)
    throw FormatError("payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size() - 8),
                      bytes.size() < expected + 8 ? bytes.size() : 8 + expected);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t offset = 8;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c, offset += 4) m(r, c) = detail::get_f32(bytes, offset);
  return m;
}

inline void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path, MatrixFormat format) {
  format == MatrixFormat::csv ? write_matrix_csv(m, path) : write_matrix_raw(m, path);
}

inline void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  write_matrix(m, path, matrix_format_for(path));
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  return format == MatrixFormat::csv ? read_matrix_csv(path) : read_matrix_raw(path);
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  return read_matrix(path, matrix_format_for(path));
}

/// Reads a vector stored as either an N x 1 or a 1 x N matrix.
inline Eigen::VectorXd read_vector(const std::filesystem::path& path, MatrixFormat format) {
  Eigen::MatrixXd m = read_matrix(path, format);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw DimensionError("'" + path.string() + "' holds a " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + " matrix, expected a vector");
}

inline Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  return read_vector(path, matrix_format_for(path));
}

}  // namespace hsiscale
