#pragma once

// Thin FFTW wrapper. Plans are built once per (shape, direction) with
// FFTW_ESTIMATE | FFTW_UNALIGNED and executed through the new-array interface,
// which FFTW documents as thread-safe. Unnormalized in both directions.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include "atomsim/field.hpp"

namespace atomsim {

enum class FftDirection { forward, inverse };

namespace detail {

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan plan(std::size_t width, std::size_t height, FftDirection direction) {
    const std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(width, height, direction);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    ComplexField2D scratch(width, height);
    auto* buffer = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buffer,
                                   buffer,
                                   direction == FftDirection::forward ? FFTW_FORWARD
                                                                      : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, FftDirection>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place 2D DFT.
inline void fft2d_inplace(ComplexField2D& field, FftDirection direction) {
  if (field.empty()) return;
  fftw_plan p =
      detail::FftPlanCache::instance().plan(field.width(), field.height(), direction);
  auto* buffer = reinterpret_cast<fftw_complex*>(field.data());
  fftw_execute_dft(p, buffer, buffer);
}

inline ComplexField2D fft2d(ComplexField2D field, FftDirection direction) {
  fft2d_inplace(field, direction);
  return field;
}

inline ComplexField2D to_complex(const ScalarField2D& field) {
  ComplexField2D out(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i];
  return out;
}

}  // namespace atomsim
