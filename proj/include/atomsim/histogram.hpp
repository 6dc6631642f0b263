#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "atomsim/errors.hpp"

namespace atomsim {

/// Equal-width bins [origin + i w, origin + (i+1) w).
struct Histogram {
  double bin_width = 1.0;
  double origin = 0.0;
  std::vector<std::uint64_t> counts;

  std::size_t size() const { return counts.size(); }
  double lower(std::size_t i) const { return origin + static_cast<double>(i) * bin_width; }
  double upper(std::size_t i) const { return lower(i + 1); }
  double center(std::size_t i) const { return lower(i) + 0.5 * bin_width; }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t n : counts) sum += n;
    return sum;
  }

  /// Bin index of v, or -1 when v falls outside the covered range.
  long long index_of(double v) const {
    const double k = std::floor((v - origin) / bin_width);
    if (!(k >= 0.0) || k >= static_cast<double>(counts.size())) return -1;
    return static_cast<long long>(k);
  }

  bool operator==(const Histogram&) const = default;
};

/// Fixed binning; values outside [origin, origin + bins * width) are dropped.
inline Histogram make_histogram(std::span<const double> values, double bin_width, double origin,
                                std::size_t bins) {
  if (!(bin_width > 0.0)) throw ParameterError("histogram: bin_width must be > 0");
  Histogram h{bin_width, origin, std::vector<std::uint64_t>(bins, 0)};
  for (double v : values) {
    const long long k = h.index_of(v);
    if (k >= 0) ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

/// Binning aligned to multiples of bin_width that covers every value.
inline Histogram make_histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0.0)) throw ParameterError("histogram: bin_width must be > 0");
  if (values.empty()) return Histogram{bin_width, 0.0, {}};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!std::isfinite(*lo) || !std::isfinite(*hi))
    throw ParameterError("histogram: values must be finite");
  const double origin = std::floor(*lo / bin_width) * bin_width;
  const auto bins = static_cast<std::size_t>(std::floor((*hi - origin) / bin_width)) + 1;
  return make_histogram(values, bin_width, origin, bins);
}

}  // namespace atomsim
