#pragma once

// Parameter extraction from image corpora: ROI sums, the three-component
// occupancy mixture, the EM-gain tail and Zernike coefficients of a mean spot.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atomsim/errors.hpp"
#include "atomsim/experiment.hpp"
#include "atomsim/field.hpp"
#include "atomsim/histogram.hpp"
#include "atomsim/optics.hpp"
#include "atomsim/simplex.hpp"
#include "atomsim/zernike.hpp"

namespace atomsim {

// ROI sums --------------------------------------------------------------------

/// Offsets of the pixels whose centers lie within `radius` of the origin.
inline std::vector<std::pair<int, int>> disk_offsets(double radius) {
  if (!(radius >= 0.0)) throw ParameterError("roi: radius must be >= 0");
  const int reach = static_cast<int>(std::floor(radius));
  std::vector<std::pair<int, int>> out;
  for (int dr = -reach; dr <= reach; ++dr)
    for (int dc = -reach; dc <= reach; ++dc)
      if (dr * dr + dc * dc <= radius * radius) out.emplace_back(dr, dc);
  return out;
}

/// One sum per (image, site), image-major.
inline std::vector<double> roi_sums(std::span<const ImageU16> images,
                                    std::span<const SiteCoordinate> sites, double radius) {
  const auto offsets = disk_offsets(radius);
  const int reach = static_cast<int>(std::floor(radius));
  std::vector<double> sums;
  sums.reserve(images.size() * sites.size());
  for (const ImageU16& image : images) {
    const auto w = static_cast<int>(image.width());
    const auto h = static_cast<int>(image.height());
    for (const SiteCoordinate& s : sites) {
      if (s.row - reach < 0 || s.col - reach < 0 || s.row + reach >= h || s.col + reach >= w) {
        throw ParameterError("roi_sums: site (" + std::to_string(s.row) + ", " +
                             std::to_string(s.col) + ") is closer than the ROI radius to the border");
      }
      double sum = 0.0;
      for (const auto& [dr, dc] : offsets)
        sum += image.at(static_cast<std::size_t>(s.row + dr), static_cast<std::size_t>(s.col + dc));
      sums.push_back(sum);
    }
  }
  return sums;
}

// Mixture densities -----------------------------------------------------------

inline double gaussian_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

inline double gaussian_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

namespace detail {

// erf(z0) - erf(z1) for z0 >= z1 without cancellation in either tail.
inline double erf_difference(double z0, double z1) {
  if (z1 > 0.0) return std::erfc(z1) - std::erfc(z0);
  if (z0 < 0.0) return std::erfc(-z0) - std::erfc(-z1);
  return std::erf(z0) - std::erf(z1);
}

// ln(p) / (p - 1), continuous at p = 1.
inline double log_ratio(double p) {
  const double q = p - 1.0;
  if (std::fabs(q) < 1e-8) return 1.0 - 0.5 * q + q * q / 3.0;
  return std::log(p) / q;
}

}  // namespace detail

/// Unconvolved density of a lost atom's ROI sum: uniform survived fraction
/// weighted by the loss-time density, spanning [mu0, mu1].
inline double pdf_exp_decay(double x, double p, double mu0, double mu1) {
  if (x < mu0 || x > mu1) return 0.0;
  const double d = mu1 - mu0;
  return detail::log_ratio(p) / d * std::pow(p, (x - mu0) / d);
}

/// pdf_exp_decay convolved with a Gaussian of width sigma.
inline double pdf_lost(double x, double p, double mu0, double mu1, double sigma) {
  const double d = mu1 - mu0;
  const double lp = std::log(p);
  const double k = lp / d;
  const double shift = k * sigma * sigma;
  const double z0 = (x - mu0 + shift) / (std::numbers::sqrt2 * sigma);
  const double z1 = (x - mu1 + shift) / (std::numbers::sqrt2 * sigma);
  const double diff = detail::erf_difference(z0, z1);
  if (diff <= 0.0) return 0.0;
  const double exponent = k * (x - mu0) + 0.5 * k * k * sigma * sigma;
  return detail::log_ratio(p) / (2.0 * d) * std::exp(exponent + std::log(diff));
}

// Three-component fit ---------------------------------------------------------

struct ThreeComponentParams {
  double a = 0.0;  // unoccupied fraction
  double p = 0.0;  // survival probability, b = (1-a) p, c = (1-a)(1-p)
  double mu0 = 0.0;
  double mu1 = 0.0;
  double sigma0 = 0.0;      // unoccupied peak width
  double sigma1 = 0.0;      // survived peak width
  double sigma_lost = 0.0;  // smoothing of the lost-atom ramp
};

inline double three_component_pdf(double x, const ThreeComponentParams& m) {
  const double b = (1.0 - m.a) * m.p;
  const double c = (1.0 - m.a) * (1.0 - m.p);
  return m.a * gaussian_pdf(x, m.mu0, m.sigma0) + b * gaussian_pdf(x, m.mu1, m.sigma1) +
         c * pdf_lost(x, m.p, m.mu0, m.mu1, m.sigma_lost);
}

/// Probability mass in [lo, hi): exact for the Gaussians, Simpson for the
/// lost-atom term.
inline double three_component_mass(double lo, double hi, const ThreeComponentParams& m) {
  const double b = (1.0 - m.a) * m.p;
  const double c = (1.0 - m.a) * (1.0 - m.p);
  double mass = m.a * (gaussian_cdf(hi, m.mu0, m.sigma0) - gaussian_cdf(lo, m.mu0, m.sigma0)) +
                b * (gaussian_cdf(hi, m.mu1, m.sigma1) - gaussian_cdf(lo, m.mu1, m.sigma1));
  if (c > 0.0) {
    constexpr int kPanels = 4;
    const double h = (hi - lo) / (2 * kPanels);
    double s = pdf_lost(lo, m.p, m.mu0, m.mu1, m.sigma_lost) +
               pdf_lost(hi, m.p, m.mu0, m.mu1, m.sigma_lost);
    for (int i = 1; i < 2 * kPanels; ++i)
      s += (i % 2 ? 4.0 : 2.0) * pdf_lost(lo + i * h, m.p, m.mu0, m.mu1, m.sigma_lost);
    mass += c * s * h / 3.0;
  }
  return mass;
}

struct ThreeComponentInit {
  std::optional<double> a;
  std::optional<double> p;
  std::optional<double> mu0;
  std::optional<double> mu1;
  std::optional<double> sigma;
};

struct ThreeComponentFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double p = 0.0;
  double mu0 = 0.0;
  double mu1 = 0.0;
  double d = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double sigma_lost = 0.0;
  // One-sigma uncertainties from the curvature of the likelihood.
  double a_err = 0.0;
  double b_err = 0.0;
  double c_err = 0.0;
  double p_err = 0.0;
  double mu0_err = 0.0;
  double mu1_err = 0.0;
  double d_err = 0.0;
  double deviance = 0.0;
  long evaluations = 0;
};

namespace detail {

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double logit(double v) { return std::log(v / (1.0 - v)); }

inline std::array<double, 7> to_array(const ThreeComponentParams& m) {
  return {m.a, m.p, m.mu0, m.mu1, m.sigma0, m.sigma1, m.sigma_lost};
}

inline ThreeComponentParams from_array(const std::array<double, 7>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

// Binned Poisson deviance of the mixture against the histogram.
inline double mixture_deviance(const Histogram& hist, double n_total, const ThreeComponentParams& m) {
  double dev = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double expected =
        std::max(n_total * three_component_mass(hist.lower(i), hist.upper(i), m), 1e-300);
    const auto n = static_cast<double>(hist.counts[i]);
    dev += expected - n;
    if (n > 0.0) dev += n * std::log(n / expected);
  }
  return 2.0 * dev;
}

struct PeakSplit {
  double weight0, mu0, sigma0, mu1, sigma1;
};

// Two-means clustering of the binned values.
inline PeakSplit split_peaks(const Histogram& hist) {
  double lo = hist.center(0);
  double hi = hist.center(hist.size() - 1);
  double m0 = lo + 0.25 * (hi - lo);
  double m1 = lo + 0.75 * (hi - lo);
  PeakSplit out{};
  for (int iter = 0; iter < 100; ++iter) {
    double w[2] = {0, 0}, s[2] = {0, 0}, q[2] = {0, 0};
    const double cut = 0.5 * (m0 + m1);
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const double x = hist.center(i);
      const auto n = static_cast<double>(hist.counts[i]);
      const int k = x < cut ? 0 : 1;
      w[k] += n;
      s[k] += n * x;
      q[k] += n * x * x;
    }
    if (w[0] == 0.0 || w[1] == 0.0) throw FitError("fit_three_component: degenerate single-peak data");
    const double n0 = s[0] / w[0];
    const double n1 = s[1] / w[1];
    out = {w[0] / (w[0] + w[1]), n0, std::sqrt(std::max(q[0] / w[0] - n0 * n0, 0.0)), n1,
           std::sqrt(std::max(q[1] / w[1] - n1 * n1, 0.0))};
    if (n0 == m0 && n1 == m1) break;
    m0 = n0;
    m1 = n1;
  }
  return out;
}

// Requires a smoothed valley between the cluster means that is clearly below
// the lower of the two peaks.
inline void require_two_peaks(const Histogram& hist, const PeakSplit& split) {
  std::vector<double> smooth(hist.size(), 0.0);
  const int half = std::max(1, static_cast<int>(hist.size() / 50));
  for (std::size_t i = 0; i < hist.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (int k = -half; k <= half; ++k) {
      const long long j = static_cast<long long>(i) + k;
      if (j < 0 || j >= static_cast<long long>(hist.size())) continue;
      sum += static_cast<double>(hist.counts[static_cast<std::size_t>(j)]);
      ++n;
    }
    smooth[i] = sum / n;
  }
  auto bin = [&](double x) {
    const double k = std::floor((x - hist.origin) / hist.bin_width);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(hist.size() - 1)));
  };
  const std::size_t i0 = bin(split.mu0);
  const std::size_t i1 = bin(split.mu1);
  if (i1 <= i0 + 1) throw FitError("fit_three_component: degenerate single-peak data");
  // Highest smoothed bin on each side of the midpoint, then the lowest bin
  // between those two maxima. A single mode puts both maxima next to the
  // midpoint and leaves no valley.
  const std::size_t mid = bin(0.5 * (split.mu0 + split.mu1));
  auto argmax = [&](std::size_t from, std::size_t to) {
    std::size_t best = from;
    for (std::size_t i = from; i <= to; ++i)
      if (smooth[i] > smooth[best]) best = i;
    return best;
  };
  const std::size_t left = argmax(0, mid);
  const std::size_t right = argmax(mid, hist.size() - 1);
  double valley = std::numeric_limits<double>::infinity();
  for (std::size_t i = left; i <= right; ++i) valley = std::min(valley, smooth[i]);
  if (!(valley < 0.75 * std::min(smooth[left], smooth[right])))
    throw FitError("fit_three_component: degenerate single-peak data");
}

}  // namespace detail

/// Maximum-likelihood fit of unoccupied + survived + lost components to a
/// histogram of ROI sums. The lost component shares p with the split of
/// occupied sites into survived and lost.
inline ThreeComponentFit fit_three_component(const Histogram& hist,
                                             const ThreeComponentInit& init = {},
                                             const SimplexOptions& options = {}) {
  if (hist.size() < 8) throw FitError("fit_three_component: histogram needs at least 8 bins");
  const double n_total = static_cast<double>(hist.total());
  if (n_total <= 0.0) throw FitError("fit_three_component: empty histogram");

  const detail::PeakSplit split = detail::split_peaks(hist);
  if (!init.mu0 || !init.mu1) detail::require_two_peaks(hist, split);

  ThreeComponentParams start;
  start.mu0 = init.mu0.value_or(split.mu0);
  start.mu1 = init.mu1.value_or(split.mu1);
  if (!(start.mu1 > start.mu0)) throw ParameterError("fit_three_component: mu1 must exceed mu0");
  const double d0 = start.mu1 - start.mu0;
  const double sigma = init.sigma.value_or(std::clamp(split.sigma0, 0.02 * d0, 0.5 * d0));
  start.sigma0 = sigma;
  start.sigma1 = init.sigma.value_or(std::clamp(split.sigma1, 0.02 * d0, 0.5 * d0));
  start.sigma_lost = sigma;
  start.a = std::clamp(init.a.value_or(split.weight0), 0.02, 0.98);
  start.p = std::clamp(init.p.value_or(0.5), 0.02, 0.98);

  // Unconstrained coordinates: logits for fractions, logs for widths and
  // means in units of the initial separation.
  const double loc = start.mu0;
  auto decode = [&](const std::vector<double>& u) {
    ThreeComponentParams m;
    m.a = detail::logistic(u[0]);
    m.p = detail::logistic(u[1]);
    m.mu0 = loc + d0 * u[2];
    m.mu1 = loc + d0 * u[3];
    m.sigma0 = d0 * std::exp(u[4]);
    m.sigma1 = d0 * std::exp(u[5]);
    m.sigma_lost = d0 * std::exp(u[6]);
    return m;
  };
  auto objective = [&](const std::vector<double>& u) {
    const ThreeComponentParams m = decode(u);
    if (!(m.mu1 > m.mu0)) return std::numeric_limits<double>::infinity();
    return detail::mixture_deviance(hist, n_total, m);
  };
  std::vector<double> u0 = {detail::logit(start.a),
                            detail::logit(start.p),
                            0.0,
                            (start.mu1 - loc) / d0,
                            std::log(start.sigma0 / d0),
                            std::log(start.sigma1 / d0),
                            std::log(start.sigma_lost / d0)};
  const std::vector<double> step = {0.5, 0.5, 0.05, 0.05, 0.3, 0.3, 0.3};
  const SimplexResult opt = minimize_simplex(objective, u0, step, options);
  if (!opt.converged || !std::isfinite(opt.value))
    throw FitError("fit_three_component: simplex did not converge after " +
                   std::to_string(opt.evaluations) + " evaluations");
  const ThreeComponentParams best = decode(opt.x);

  // Curvature of the negative log-likelihood (half the deviance) in natural
  // parameters gives the covariance.
  const auto centre = detail::to_array(best);
  const std::array<double, 7> h = {1e-4,
                                   1e-4,
                                   1e-4 * d0,
                                   1e-4 * d0,
                                   1e-3 * best.sigma0,
                                   1e-3 * best.sigma1,
                                   1e-3 * best.sigma_lost};
  auto nll = [&](const std::array<double, 7>& v) {
    return 0.5 * detail::mixture_deviance(hist, n_total, detail::from_array(v));
  };
  Eigen::Matrix<double, 7, 7> hessian;
  const double f0 = nll(centre);
  for (int i = 0; i < 7; ++i) {
    for (int j = i; j < 7; ++j) {
      auto shifted = [&](double si, double sj) {
        auto v = centre;
        v[i] += si * h[i];
        v[j] += sj * h[j];
        return nll(v);
      };
      double value;
      if (i == j) {
        value = (shifted(0.5, 0.5) - 2.0 * f0 + shifted(-0.5, -0.5)) / (h[i] * h[i]);
      } else {
        value = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) /
                (4.0 * h[i] * h[j]);
      }
      hessian(i, j) = hessian(j, i) = value;
    }
  }
  Eigen::Matrix<double, 7, 7> cov = hessian.completeOrthogonalDecomposition().pseudoInverse();

  ThreeComponentFit fit;
  fit.a = best.a;
  fit.p = best.p;
  fit.b = (1.0 - best.a) * best.p;
  fit.c = (1.0 - best.a) * (1.0 - best.p);
  fit.mu0 = best.mu0;
  fit.mu1 = best.mu1;
  fit.d = best.mu1 - best.mu0;
  fit.sigma0 = best.sigma0;
  fit.sigma1 = best.sigma1;
  fit.sigma_lost = best.sigma_lost;
  auto error = [&](const Eigen::Matrix<double, 7, 1>& grad) {
    return std::sqrt(std::max(0.0, grad.dot(cov * grad)));
  };
  Eigen::Matrix<double, 7, 1> g = Eigen::Matrix<double, 7, 1>::Zero();
  g(0) = 1.0;
  fit.a_err = error(g);
  g.setZero();
  g(1) = 1.0;
  fit.p_err = error(g);
  g.setZero();
  g(0) = -best.p;
  g(1) = 1.0 - best.a;
  fit.b_err = error(g);
  g(0) = -(1.0 - best.p);
  g(1) = -(1.0 - best.a);
  fit.c_err = error(g);
  g.setZero();
  g(2) = 1.0;
  fit.mu0_err = error(g);
  g.setZero();
  g(3) = 1.0;
  fit.mu1_err = error(g);
  g(2) = -1.0;
  fit.d_err = error(g);
  fit.deviance = opt.value;
  fit.evaluations = opt.evaluations;
  return fit;
}

// EM-gain tail ----------------------------------------------------------------

struct EmTailFit {
  double g = 0.0;  // counts per e-fold of the tail
  double g_err = 0.0;
  double amplitude = 0.0;  // fitted counts at x = 0 (log scale intercept, exponentiated)
  std::size_t bins_used = 0;
};

/// Fits counts ~ s e^(-x/g) to the bins with centers in [lo, hi) and nonzero
/// counts. Log-linear least squares weighted by the counts.
inline EmTailFit fit_em_tail(const Histogram& hist, double lo, double hi) {
  if (!(hi > lo)) throw FitError("fit_em_tail: empty range");
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double x = hist.center(i);
    if (x < lo || x >= hi || hist.counts[i] == 0) continue;
    const auto w = static_cast<double>(hist.counts[i]);
    const double y = std::log(w);
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++used;
  }
  if (used == 0) throw FitError("fit_em_tail: no bins with positive counts in range");
  if (used < 2) throw FitError("fit_em_tail: fewer than two populated bins in range");
  const double mx = sx / sw;
  const double var = sxx / sw - mx * mx;
  if (!(var > 0.0)) throw FitError("fit_em_tail: degenerate range");
  const double slope = (sxy / sw - mx * sy / sw) / var;
  // Less than a part-per-million decay across the populated range counts as flat.
  const double span = std::sqrt(var) * 4.0;
  if (!(slope * span < -1e-6)) throw FitError("fit_em_tail: tail does not decay (slope >= 0)");
  EmTailFit fit;
  fit.g = -1.0 / slope;
  // Weighted least squares with variance 1/n per log-count.
  const double slope_err = std::sqrt(1.0 / (sw * var));
  fit.g_err = slope_err / (slope * slope);
  fit.amplitude = std::exp(sy / sw - slope * mx);
  fit.bins_used = used;
  return fit;
}

// Photon budget ---------------------------------------------------------------

/// Photons detected inside the ROI per exposure for a peak separation d.
inline double photons_in_roi(double d, double quantum_efficiency, double em_gain, double preamp_gain) {
  if (!(quantum_efficiency > 0.0 && em_gain > 0.0 && preamp_gain > 0.0))
    throw ParameterError("photons_in_roi: factors must be > 0");
  return d * preamp_gain / (quantum_efficiency * em_gain);
}

/// Scattering rate (photons / atom / s) implied by a peak separation d.
inline double photons_from_separation(double d, double quantum_efficiency, double em_gain,
                                      double preamp_gain, double exposure, double solid_angle_fraction,
                                      double roi_fraction) {
  if (!(exposure > 0.0 && solid_angle_fraction > 0.0 && roi_fraction > 0.0))
    throw ParameterError("photons_from_separation: factors must be > 0");
  return photons_in_roi(d, quantum_efficiency, em_gain, preamp_gain) /
         (exposure * solid_angle_fraction * roi_fraction);
}

// Zernike fit -----------------------------------------------------------------

struct ZernikeFitOptions {
  /// Model grid edge in camera pixels; 0 picks the next power of two at least
  /// twice the spot size (minimum 64).
  std::size_t model_grid = 0;
  SimplexOptions simplex{};
  double step = 0.01;
};

struct ZernikeFit {
  ZernikeCoefficients coefficients;
  ZernikeCoefficients uncertainties;  // infinite where the data do not constrain a term
  double amplitude = 0.0;
  double background = 0.0;
  double residual_rms = 0.0;
  long evaluations = 0;

  /// Tilt terms only register the spot position.
  static bool reported_as_alignment(ZernikeTerm term) { return is_alignment_term(term); }
};

/// Renders the spot model: the PSF for given coefficients, binned to camera
/// pixels, cropped to `width` x `height` with the source at the center pixel
/// (height/2, width/2).
class SpotModel {
 public:
  SpotModel(std::size_t width, std::size_t height, const OpticalConfig& optics, std::size_t grid)
      : width_(width),
        height_(height),
        ss_(static_cast<std::size_t>(optics.supersampling)),
        grid_(grid),
        renderer_(grid * ss_, grid * ss_, optics.pupil_radius_fraction, optics.supersampling,
                  optics.phase_scale) {
    if (grid < width || grid < height) throw DimensionError("SpotModel: grid smaller than the spot");
  }

  std::vector<double> render(const ZernikeCoefficients& c) const {
    const ScalarField2D psf = renderer_.psf(c);
    const std::size_t m = grid_ * ss_;
    const std::size_t row0 = m / 2 - ss_ / 2 - (height_ / 2) * ss_;
    const std::size_t col0 = m / 2 - ss_ / 2 - (width_ / 2) * ss_;
    std::vector<double> out(width_ * height_, 0.0);
    for (std::size_t r = 0; r < height_ * ss_; ++r)
      for (std::size_t col = 0; col < width_ * ss_; ++col)
        out[(r / ss_) * width_ + col / ss_] += psf.at(row0 + r, col0 + col);
    return out;
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::size_t ss_;
  std::size_t grid_;
  PsfRenderer renderer_;
};

namespace detail {

struct LinearFit {
  double amplitude, background, ssr;
};

// Best spot ~ amplitude * model + background in the least-squares sense.
inline LinearFit solve_amplitude(const std::vector<double>& model, std::span<const double> spot) {
  const auto n = static_cast<double>(model.size());
  double sm = 0, ss = 0, smm = 0, sms = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    sm += model[i];
    ss += spot[i];
    smm += model[i] * model[i];
    sms += model[i] * spot[i];
  }
  const double det = n * smm - sm * sm;
  LinearFit fit{0.0, ss / n, 0.0};
  if (det > 0.0) {
    fit.amplitude = (n * sms - sm * ss) / det;
    fit.background = (ss - fit.amplitude * sm) / n;
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double r = spot[i] - fit.amplitude * model[i] - fit.background;
    fit.ssr += r * r;
  }
  return fit;
}

}  // namespace detail

inline std::size_t default_zernike_grid(std::size_t width, std::size_t height) {
  std::size_t grid = 64;
  while (grid < 2 * std::max(width, height)) grid *= 2;
  return grid;
}

/// Least-squares match of the rendered PSF to a background-subtracted mean
/// spot centered at (height/2, width/2). All fourteen terms are free; tilt
/// absorbs sub-pixel misregistration. The even terms are determined only up
/// to a common sign by an in-focus intensity image, so `init` selects the
/// branch (for example a positive defocus).
inline ZernikeFit fit_zernike(const ScalarField2D& mean_spot, const OpticalConfig& optics,
                              const ZernikeCoefficients& init = {},
                              const ZernikeFitOptions& options = {}) {
  optics.validate();
  const double min_extent = 2.0 * std::ceil(2.0 * first_dark_ring_radius(optics.pupil_radius_fraction)) + 1.0;
  if (static_cast<double>(std::min(mean_spot.width(), mean_spot.height())) < min_extent) {
    throw DimensionError("fit_zernike: spot of " + std::to_string(mean_spot.width()) + "x" +
                         std::to_string(mean_spot.height()) + " is smaller than the PSF support");
  }
  const std::size_t grid = options.model_grid ? options.model_grid
                                               : default_zernike_grid(mean_spot.width(), mean_spot.height());
  const SpotModel model(mean_spot.width(), mean_spot.height(), optics, grid);
  const std::span<const double> spot = mean_spot.values();

  auto coefficients_of = [](const std::vector<double>& x) {
    ZernikeCoefficients c;
    std::copy(x.begin(), x.end(), c.values.begin());
    return c;
  };
  auto objective = [&](const std::vector<double>& x) {
    return detail::solve_amplitude(model.render(coefficients_of(x)), spot).ssr;
  };
  std::vector<double> x0(init.values.begin(), init.values.end());
  const std::vector<double> steps(kZernikeTermCount, options.step);
  const SimplexResult opt = minimize_simplex(objective, x0, steps, options.simplex);
  if (!opt.converged) {
    throw FitError("fit_zernike: simplex did not converge after " +
                   std::to_string(opt.evaluations) + " evaluations");
  }

  ZernikeFit fit;
  fit.coefficients = coefficients_of(opt.x);
  const std::vector<double> best_model = model.render(fit.coefficients);
  const detail::LinearFit linear = detail::solve_amplitude(best_model, spot);
  fit.amplitude = linear.amplitude;
  fit.background = linear.background;
  const std::size_t n = spot.size();
  fit.residual_rms = std::sqrt(linear.ssr / static_cast<double>(n));
  fit.evaluations = opt.evaluations;

  // Jacobian of the model in (coefficients, amplitude, background).
  constexpr std::size_t kParams = kZernikeTermCount + 2;
  Eigen::MatrixXd jac(n, kParams);
  const double h = 1e-5;
  for (std::size_t j = 0; j < kZernikeTermCount; ++j) {
    ZernikeCoefficients up = fit.coefficients;
    ZernikeCoefficients down = fit.coefficients;
    up.values[j] += h;
    down.values[j] -= h;
    const auto mu = model.render(up);
    const auto md = model.render(down);
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = linear.amplitude * (mu[i] - md[i]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i) {
    jac(i, kZernikeTermCount) = best_model[i];
    jac(i, kZernikeTermCount + 1) = 1.0;
  }
  const double s2 = linear.ssr / static_cast<double>(n - kParams);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const double cutoff = sv(0) * 1e-10;
  for (std::size_t j = 0; j < kZernikeTermCount; ++j) {
    double var = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      const double vk = v(static_cast<Eigen::Index>(j), k);
      if (sv(k) <= cutoff) {
        if (std::fabs(vk) > 1e-8) var = std::numeric_limits<double>::infinity();
        continue;
      }
      var += vk * vk / (sv(k) * sv(k));
    }
    fit.uncertainties.values[j] = std::isinf(var) ? var : std::sqrt(s2 * var);
  }
  return fit;
}

}  // namespace atomsim
