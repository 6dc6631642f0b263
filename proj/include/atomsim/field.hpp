#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "atomsim/errors.hpp"

namespace atomsim {

/// Row-major 2D grid. `at(row, col)` indexes `values[row * width + col]`.
template <class T>
class Field2D {
 public:
  using value_type = T;

  Field2D() = default;
  Field2D(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), values_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& at(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  const T& at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Field2D&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> values_;
};

using ScalarField2D = Field2D<double>;
using ComplexField2D = Field2D<std::complex<double>>;
using ImageU16 = Field2D<std::uint16_t>;

inline double total(const ScalarField2D& field) {
  return std::accumulate(field.values().begin(), field.values().end(), 0.0);
}

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": grid " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " does not match " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

/// Moves index (0,0) to (height/2, width/2).
template <class T>
Field2D<T> fftshift(const Field2D<T>& in) {
  Field2D<T> out(in.width(), in.height());
  const std::size_t w = in.width();
  const std::size_t h = in.height();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out.at((r + h / 2) % h, (c + w / 2) % w) = in.at(r, c);
    }
  }
  return out;
}

/// Inverse of fftshift: moves (height/2, width/2) back to (0,0).
template <class T>
Field2D<T> ifftshift(const Field2D<T>& in) {
  Field2D<T> out(in.width(), in.height());
  const std::size_t w = in.width();
  const std::size_t h = in.height();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out.at(r, c) = in.at((r + h / 2) % h, (c + w / 2) % w);
    }
  }
  return out;
}

/// Sums factor x factor blocks. Dimensions must be divisible by factor.
inline ScalarField2D bin_sum(const ScalarField2D& in, std::size_t factor) {
  if (factor == 1) return in;
  if (factor == 0 || in.width() % factor != 0 || in.height() % factor != 0) {
    throw DimensionError("bin_sum: grid is not divisible by the binning factor");
  }
  ScalarField2D out(in.width() / factor, in.height() / factor);
  for (std::size_t r = 0; r < in.height(); ++r) {
    for (std::size_t c = 0; c < in.width(); ++c) {
      out.at(r / factor, c / factor) += in.at(r, c);
    }
  }
  return out;
}

}  // namespace atomsim
