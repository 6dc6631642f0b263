#pragma once

// Nelder-Mead downhill simplex with restarts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "atomsim/errors.hpp"

namespace atomsim {

struct SimplexOptions {
  double tolerance = 1e-8;       // relative simplex size and value spread
  long max_evaluations = 100000;
  int max_restarts = 8;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  long evaluations = 0;
  int restarts = 0;
  bool converged = false;
};

namespace detail {

inline double simplex_size(const std::vector<std::vector<double>>& vertices,
                           const std::vector<double>& scale) {
  double size = 0.0;
  const auto& best = vertices.front();
  for (std::size_t v = 1; v < vertices.size(); ++v) {
    for (std::size_t j = 0; j < best.size(); ++j) {
      const double denom = std::max(std::fabs(best[j]), scale[j]);
      size = std::max(size, std::fabs(vertices[v][j] - best[j]) / denom);
    }
  }
  return size;
}

}  // namespace detail

/// Minimizes f starting from x0 with initial simplex edges `step`. After each
/// convergence the simplex is rebuilt around the best point; the search ends
/// when a restart no longer improves the value.
template <class F>
SimplexResult minimize_simplex(F&& f, std::vector<double> x0, const std::vector<double>& step,
                               const SimplexOptions& options = {}) {
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw ParameterError("minimize_simplex: dimension mismatch");
  std::vector<double> scale(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(step[j] != 0.0)) throw ParameterError("minimize_simplex: steps must be nonzero");
    scale[j] = std::fabs(step[j]);
  }

  SimplexResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<double> best = std::move(x0);
  double best_value = eval(best);
  const double tol = options.tolerance;

  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    std::vector<std::vector<double>> pts(n + 1, best);
    std::vector<double> vals(n + 1, best_value);
    for (std::size_t j = 0; j < n; ++j) {
      pts[j + 1][j] += step[j];
      vals[j + 1] = eval(pts[j + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    bool converged = false;
    while (result.evaluations < options.max_evaluations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      {
        std::vector<std::vector<double>> p2;
        std::vector<double> v2;
        for (std::size_t k : order) {
          p2.push_back(std::move(pts[k]));
          v2.push_back(vals[k]);
        }
        pts = std::move(p2);
        vals = std::move(v2);
      }
      const double spread = std::fabs(vals.back() - vals.front());
      if (detail::simplex_size(pts, scale) <= tol &&
          spread <= tol * (std::fabs(vals.front()) + tol)) {
        converged = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[v][j] / static_cast<double>(n);
      auto along = [&](double t) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + t * (pts[n][j] - centroid[j]);
        return x;
      };

      std::vector<double> reflected = along(-1.0);
      const double fr = eval(reflected);
      if (fr < vals[0]) {
        std::vector<double> expanded = along(-2.0);
        const double fe = eval(expanded);
        if (fe < fr) {
          pts[n] = std::move(expanded);
          vals[n] = fe;
        } else {
          pts[n] = std::move(reflected);
          vals[n] = fr;
        }
        continue;
      }
      if (fr < vals[n - 1]) {
        pts[n] = std::move(reflected);
        vals[n] = fr;
        continue;
      }
      const bool outside = fr < vals[n];
      std::vector<double> contracted = along(outside ? -0.5 : 0.5);
      const double fc = eval(contracted);
      if (fc < (outside ? fr : vals[n])) {
        pts[n] = std::move(contracted);
        vals[n] = fc;
        continue;
      }
      for (std::size_t v = 1; v <= n; ++v) {
        for (std::size_t j = 0; j < n; ++j) pts[v][j] = pts[0][j] + 0.5 * (pts[v][j] - pts[0][j]);
        vals[v] = eval(pts[v]);
      }
    }

    const std::size_t lowest =
        static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    const bool improved = vals[lowest] < best_value - tol * (std::fabs(best_value) + tol);
    if (vals[lowest] < best_value) {
      best = pts[lowest];
      best_value = vals[lowest];
    }
    result.restarts = attempt;
    if (!converged) break;
    if (!improved && attempt > 0) {
      result.converged = true;
      break;
    }
    if (attempt == options.max_restarts) result.converged = true;
  }
  result.x = std::move(best);
  result.value = best_value;
  return result;
}

}  // namespace atomsim
