#pragma once

// Probability-distribution samplers. Every sampler is a pure function of the
// RandomState it is handed and its parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "atomsim/errors.hpp"
#include "atomsim/random.hpp"

namespace atomsim {

namespace detail {

inline void require(bool condition, const char* what) {
  if (!condition) throw ParameterError(what);
}

// ln(n!) for n >= 0. Exact table for small n, Stirling series above.
inline double log_factorial(std::uint64_t n) {
  if (n < 16) {
    double value = 0.0;
    for (std::uint64_t k = 2; k <= n; ++k) value += std::log(static_cast<double>(k));
    return value;
  }
  const double x = static_cast<double>(n) + 1.0;
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
         inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0));
}

inline std::uint64_t poisson_knuth(RandomState& state, double mean) {
  const double limit = std::exp(-mean);
  std::uint64_t count = 0;
  double product = state.uniform();
  while (product > limit) {
    ++count;
    product *= state.uniform();
  }
  return count;
}

// Hörmann's PTRS transformed rejection; valid for mean >= 10.
inline std::uint64_t poisson_ptrs(RandomState& state, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = state.uniform() - 0.5;
    const double v = state.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b);
    const double rhs = -mean + k * loglam - log_factorial(static_cast<std::uint64_t>(k));
    if (lhs <= rhs) return static_cast<std::uint64_t>(k);
  }
}

}  // namespace detail

/// Above this mean the Poisson sampler switches from inter-arrival counting to
/// transformed rejection.
inline constexpr double kPoissonRejectionThreshold = 500.0;

inline std::uint64_t sample_poisson(RandomState& state, double mean) {
  detail::require(std::isfinite(mean) && mean >= 0.0,
                  "sample_poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean <= kPoissonRejectionThreshold) return detail::poisson_knuth(state, mean);
  return detail::poisson_ptrs(state, mean);
}

/// Box-Muller. std == 0 returns the mean without consuming randomness.
inline double sample_gaussian(RandomState& state, double mean, double std) {
  detail::require(std >= 0.0, "sample_gaussian: std must be >= 0");
  if (std == 0.0) return mean;
  const double u1 = 1.0 - state.uniform();  // (0, 1]
  const double u2 = state.uniform();
  return mean + std * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * std::numbers::pi * u2);
}

/// Marsaglia-Tsang squeeze method; shapes below one are boosted to shape + 1
/// and scaled by u^(1/shape).
inline double sample_gamma(RandomState& state, double shape, double scale) {
  detail::require(shape > 0.0 && scale > 0.0,
                  "sample_gamma: shape and scale must be > 0");
  if (shape < 1.0) {
    const double boosted = sample_gamma(state, shape + 1.0, scale);
    const double u = 1.0 - state.uniform();
    return boosted * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_gaussian(state, 0.0, 1.0);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = state.uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

/// Inverse CDF of Gumbel(mu, beta) at r in (0, 1).
inline double gumbel_from_uniform(double mu, double beta, double r) {
  detail::require(beta > 0.0, "sample_gumbel: beta must be > 0");
  return mu - beta * std::log(-std::log(r));
}

inline double sample_gumbel(RandomState& state, double mu, double beta) {
  detail::require(beta > 0.0, "sample_gumbel: beta must be > 0");
  return gumbel_from_uniform(mu, beta, state.uniform_open());
}

/// Location that makes Gumbel(mu, beta) zero-mean: mu = -beta * gamma.
inline double zero_mean_gumbel_location(double beta) {
  return -beta * std::numbers::egamma;
}

inline double sample_gumbel_zero_mean(RandomState& state, double beta) {
  return sample_gumbel(state, zero_mean_gumbel_location(beta), beta);
}

// Loss time ------------------------------------------------------------------

/// Density of the survived fraction t in [0, 1] for survival probability p.
inline double loss_time_pdf(double p, double t) {
  if (t < 0.0 || t > 1.0) return 0.0;
  if (p == 1.0) return 1.0;
  return std::pow(p, t) * std::log(p) / (p - 1.0);
}

inline double loss_time_cdf(double p, double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (p == 1.0) return t;
  return std::expm1(t * std::log(p)) / (p - 1.0);
}

/// t = log_p((p - 1) r + 1); the p = 1 limit is the identity.
inline double loss_time_from_uniform(double p, double r) {
  detail::require(p > 0.0 && p <= 1.0, "sample_loss_time: p must be in (0, 1]");
  if (p == 1.0) return r;
  return std::log1p((p - 1.0) * r) / std::log(p);
}

inline double sample_loss_time(RandomState& state, double p) {
  detail::require(p > 0.0 && p <= 1.0, "sample_loss_time: p must be in (0, 1]");
  return loss_time_from_uniform(p, state.uniform());
}

// Regularized upper incomplete gamma -----------------------------------------

/// Q(x, t) for positive integer x via the finite series
/// e^-t * sum_{k<x} t^k / k!. Reference evaluation for tests and checks.
inline double regularized_gamma_upper(std::uint64_t x, double t) {
  if (t <= 0.0) return 1.0;
  double term = 1.0;
  double sum = 1.0;
  double log_scale = 0.0;
  for (std::uint64_t k = 1; k < x; ++k) {
    term *= t / static_cast<double>(k);
    sum += term;
    if (sum > 1e280) {
      term *= 1e-280;
      sum *= 1e-280;
      log_scale += 280.0 * std::numbers::ln10;
    }
  }
  return std::exp(std::log(sum) + log_scale - t);
}

struct InverseGammaResult {
  double value = 0.0;
  int iterations = 0;
};

inline constexpr int kSchroderMaxIterations = 64;

namespace detail {

// f/f' = t^(1-x) (x-1)! r e^t - sum_{k<x} (x-1)! / (t^(x-k-1) k!).
// Writing m = x-1-k, the subtrahend is sum_m T_m with T_0 = 1 and
// T_m = T_{m-1} (x-m)/t, and the minuend is r e^t T_{x-1}. Term and sum each
// carry a binary exponent so no factorial or power is formed directly.
inline double schroder_ratio(std::uint64_t x, double r, double t) {
  double term = 1.0;
  int term_exponent = 0;
  double sum = 1.0;
  int sum_exponent = 0;
  const double xd = static_cast<double>(x);
  for (std::uint64_t m = 1; m < x; ++m) {
    term *= (xd - static_cast<double>(m)) / t;
    if (term > 0x1.0p500 || term < 0x1.0p-500) {
      int e = 0;
      term = std::frexp(term, &e);
      term_exponent += e;
    }
    sum += term_exponent == sum_exponent ? term
                                         : std::ldexp(term, term_exponent - sum_exponent);
    if (sum > 0x1.0p500) {
      sum = std::ldexp(sum, -500);
      sum_exponent += 500;
    }
  }
  const double log_minuend =
      std::log(r) + t + std::log(term) + term_exponent * std::numbers::ln2;
  const double log_subtrahend = std::log(sum) + sum_exponent * std::numbers::ln2;
  const double big = std::max(log_minuend, log_subtrahend);
  if (big > 700.0) {
    // Far outside the bulk; only the sign matters to the bracketing logic.
    return log_minuend > log_subtrahend ? std::numeric_limits<double>::max()
                                        : -std::numeric_limits<double>::max();
  }
  return std::exp(log_minuend) - std::exp(log_subtrahend);
}

}  // namespace detail

/// Solves Q(x, t) = r for t with third-order Schröder iteration started at
/// t0 = x. Stops once the squared step drops below `step_threshold`.
inline InverseGammaResult inverse_regularized_gamma_upper(std::uint64_t x, double r,
                                                          double step_threshold = 1e-20) {
  detail::require(x >= 1, "inverse_regularized_gamma_upper: x must be >= 1");
  detail::require(r > 0.0 && r < 1.0, "inverse_regularized_gamma_upper: r must be in (0, 1)");
  const double xd = static_cast<double>(x);
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double t = xd;
  for (int iteration = 1; iteration <= kSchroderMaxIterations; ++iteration) {
    const double ratio = detail::schroder_ratio(x, r, t);  // f / f'
    if (ratio == 0.0) return {t, iteration};
    // f = r - Q(x,t) increases with t, and f' > 0.
    if (ratio > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    const double curvature = (xd - 1.0) / t - 1.0;  // f'' / f'
    double next = t - ratio * (1.0 + 0.5 * ratio * curvature);
    if (!(next >= lo && next <= hi)) {
      next = std::isinf(hi) ? 2.0 * t : 0.5 * (lo + hi);
    }
    const double step = next - t;
    t = next;
    if (step * step < step_threshold) return {t, iteration};
  }
  throw NumericError("inverse_regularized_gamma_upper: no convergence after " +
                     std::to_string(kSchroderMaxIterations) + " iterations (x=" +
                     std::to_string(x) + ", r=" + std::to_string(r) + ")");
}

/// Squared-step threshold used for EM gain: the result is scaled by g, so
/// the absolute precision of n is independent of the gain.
inline double em_gain_step_threshold(double gain) { return 1.0 / (100.0 * gain * gain); }

/// Secondary electrons for `primaries` input electrons at uniform deviate r in
/// (0, 1).
inline double em_gain_from_uniform(std::uint64_t primaries, double gain, double r) {
  detail::require(gain >= 1.0, "sample_em_gain: gain must be >= 1");
  if (primaries == 0) return 0.0;
  if (primaries == 1) return -gain * std::log(r);
  return gain *
         inverse_regularized_gamma_upper(primaries, r, em_gain_step_threshold(gain)).value;
}

/// Output of the multiplication register for `primaries` electrons
/// (Gamma(primaries, gain)). Zero primaries give zero output.
inline double sample_em_gain(RandomState& state, std::uint64_t primaries, double gain) {
  detail::require(gain >= 1.0, "sample_em_gain: gain must be >= 1");
  if (primaries == 0) return 0.0;
  return em_gain_from_uniform(primaries, gain, state.uniform_open());
}

}  // namespace atomsim
