#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsiscale {

/// Base class of every error raised by the library. `kind()` is a stable
/// identifier that the command-line front end prints verbatim.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define HSISCALE_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                          \
  public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}     \
  }

HSISCALE_DEFINE_ERROR(DimensionError);
HSISCALE_DEFINE_ERROR(ValidationError);
HSISCALE_DEFINE_ERROR(DegenerateDataError);
HSISCALE_DEFINE_ERROR(NearOrthogonalNormalError);
HSISCALE_DEFINE_ERROR(OptimizationFailedError);
HSISCALE_DEFINE_ERROR(GenerationError);
HSISCALE_DEFINE_ERROR(ExtractionError);

#undef HSISCALE_DEFINE_ERROR

/// Malformed or truncated file. Carries the byte offset where parsing failed.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : Error("FormatError", what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Non-finite value met during optimization; `pixel()` is the first offending pixel.
class NumericError : public Error {
public:
  NumericError(const std::string& what, std::size_t pixel)
      : Error("NumericError", what + " (pixel " + std::to_string(pixel) + ")"), pixel_(pixel) {}

  std::size_t pixel() const noexcept { return pixel_; }

private:
  std::size_t pixel_;
};

}  // namespace hsiscale
