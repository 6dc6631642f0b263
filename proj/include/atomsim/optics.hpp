#pragma once

// Pupil -> PSF -> MTF -> convolution -> expected photons per pixel.
//
// Frequencies are measured in cycles per camera pixel. The pupil is a disk of
// radius 0.5 * pupil_radius_fraction in that unit, so the PSF has the same size
// in camera pixels at every supersampling factor and grid size. Grids in FFT
// order keep the zero frequency at index (0, 0); PSFs are stored centered at
// (height/2, width/2).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "atomsim/errors.hpp"
#include "atomsim/fft.hpp"
#include "atomsim/field.hpp"
#include "atomsim/zernike.hpp"

namespace atomsim {

/// First zero of the Airy amplitude pattern, in units of lambda / D.
inline constexpr double kAiryFirstZero = 1.2196698912665045;

struct OpticalConfig {
  ZernikeCoefficients zernike;
  /// Pupil radius as a fraction of the camera-pixel Nyquist frequency.
  double pupil_radius_fraction = 0.5;
  int supersampling = 1;
  double numerical_aperture = 0.65;
  double wavelength = 461e-9;         // m
  double magnification = 156.25;
  double pixel_size = 32e-6;          // m, binned camera pixel
  /// Pupil phase in radians per unit Zernike coefficient.
  double phase_scale = 4.0 * std::numbers::pi;

  void validate() const {
    if (!(pupil_radius_fraction > 0.0 && pupil_radius_fraction <= 1.0))
      throw ParameterError("optics.pupil_radius_fraction: must be in (0, 1]");
    if (supersampling < 1) throw ParameterError("optics.supersampling: must be >= 1");
    if (!(numerical_aperture > 0.0 && numerical_aperture < 1.0))
      throw ParameterError("optics.numerical_aperture: must be in (0, 1)");
    if (!(wavelength > 0.0)) throw ParameterError("optics.wavelength: must be > 0");
    if (!(magnification > 0.0)) throw ParameterError("optics.magnification: must be > 0");
    if (!(pixel_size > 0.0)) throw ParameterError("optics.pixel_size: must be > 0");
    if (!std::isfinite(phase_scale)) throw ParameterError("optics.phase_scale: must be finite");
  }
};

using ExpectedPhotonMap = ScalarField2D;

/// Signed frequency of FFT bin `index` on an axis of `length` samples, in
/// cycles per sample.
inline double fft_frequency(std::size_t index, std::size_t length) {
  const auto i = static_cast<double>(index);
  const auto n = static_cast<double>(length);
  return index < (length + 1) / 2 ? i / n : (i - n) / n;
}

/// Radius of the first dark Airy ring in camera pixels.
inline double first_dark_ring_radius(double pupil_radius_fraction) {
  return kAiryFirstZero / pupil_radius_fraction;
}

/// Renders PSFs on a fixed grid for varying coefficients. Pupil geometry and
/// the Zernike basis are evaluated once at construction.
class PsfRenderer {
 public:
  /// `width` x `height` is the (supersampled) grid.
  PsfRenderer(std::size_t width, std::size_t height, double pupil_radius_fraction,
              int supersampling, double phase_scale)
      : width_(width), height_(height), phase_scale_(phase_scale) {
    const double cutoff = 0.5 * pupil_radius_fraction / supersampling;  // cycles/sample
    for (std::size_t r = 0; r < height; ++r) {
      const double v = fft_frequency(r, height);
      for (std::size_t c = 0; c < width; ++c) {
        const double u = fft_frequency(c, width);
        const double rho = std::hypot(u, v) / cutoff;
        if (rho > 1.0) continue;
        const double theta = std::atan2(v, u);
        indices_.push_back(r * width + c);
        for (ZernikeTerm term : kAllZernikeTerms) basis_.push_back(zernike_eval(term, rho, theta));
      }
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pupil_samples() const { return indices_.size(); }

  ComplexField2D pupil(const ZernikeCoefficients& coefficients) const {
    ComplexField2D field(width_, height_);
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      const double* z = &basis_[k * kZernikeTermCount];
      double wavefront = 0.0;
      for (std::size_t j = 0; j < kZernikeTermCount; ++j) wavefront += coefficients.values[j] * z[j];
      field[indices_[k]] = std::polar(1.0, phase_scale_ * wavefront);
    }
    return field;
  }

  ScalarField2D psf(const ZernikeCoefficients& coefficients) const;

 private:
  std::size_t width_;
  std::size_t height_;
  double phase_scale_;
  std::vector<std::size_t> indices_;
  std::vector<double> basis_;  // pupil_samples x kZernikeTermCount
};

/// Complex pupil in FFT order: unit magnitude with phase
/// phase_scale * sum c_j Z_j inside the disk, zero outside.
inline ComplexField2D build_pupil(const OpticalConfig& config, std::size_t width,
                                  std::size_t height) {
  config.validate();
  return PsfRenderer(width, height, config.pupil_radius_fraction, config.supersampling,
                     config.phase_scale)
      .pupil(config.zernike);
}

/// |FFT(pupil)|^2 normalized to unit sum and centered.
inline ScalarField2D pupil_to_psf(const ComplexField2D& pupil) {
  ComplexField2D spectrum = fft2d(pupil, FftDirection::forward);
  ScalarField2D psf(pupil.width(), pupil.height());
  double sum = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    psf[i] = std::norm(spectrum[i]);
    sum += psf[i];
  }
  if (sum > 0.0) {
    for (double& v : psf.values()) v /= sum;
  }
  return fftshift(psf);
}

inline ScalarField2D PsfRenderer::psf(const ZernikeCoefficients& coefficients) const {
  return pupil_to_psf(pupil(coefficients));
}

/// |FFT(psf)| divided by its zero-frequency value; zero frequency at (0, 0).
inline ScalarField2D psf_to_mtf(const ScalarField2D& psf) {
  ComplexField2D otf = fft2d(to_complex(ifftshift(psf)), FftDirection::forward);
  const double dc = std::abs(otf[0]);
  if (!(dc > 0.0)) throw ParameterError("psf_to_mtf: PSF has zero total intensity");
  ScalarField2D mtf(psf.width(), psf.height());
  for (std::size_t i = 0; i < otf.size(); ++i) mtf[i] = std::abs(otf[i]) / dc;
  mtf[0] = 1.0;
  return mtf;
}

/// Centered, unit-sum point response implied by an MTF (inverse of
/// psf_to_mtf when the OTF is real and nonnegative).
inline ScalarField2D psf_from_mtf(const ScalarField2D& mtf) {
  ComplexField2D field = fft2d(to_complex(mtf), FftDirection::inverse);
  ScalarField2D psf(mtf.width(), mtf.height());
  double sum = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    psf[i] = field[i].real();
    sum += psf[i];
  }
  for (double& v : psf.values()) v /= sum;
  return fftshift(psf);
}

/// MTF on the supersampled grid for a camera of `width` x `height` pixels.
inline ScalarField2D build_mtf(const OpticalConfig& config, std::size_t width,
                               std::size_t height) {
  const auto ss = static_cast<std::size_t>(config.supersampling);
  return psf_to_mtf(pupil_to_psf(build_pupil(config, width * ss, height * ss)));
}

/// Convolves the atom array with the point response (multiplication by the
/// MTF in frequency space), restores the array total, scales by
/// `photons_per_atom` and sums supersampled blocks down to camera pixels.
inline ExpectedPhotonMap apply_optics(const ScalarField2D& atom_array, const ScalarField2D& mtf,
                                      double photons_per_atom, int supersampling = 1) {
  require_same_shape(atom_array, mtf, "apply_optics");
  if (!(photons_per_atom >= 0.0)) throw ParameterError("apply_optics: photons_per_atom must be >= 0");
  const double atoms = total(atom_array);
  ScalarField2D photons(atom_array.width(), atom_array.height());
  if (atoms > 0.0) {
    ComplexField2D spectrum = fft2d(to_complex(atom_array), FftDirection::forward);
    for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= mtf[i];
    fft2d_inplace(spectrum, FftDirection::inverse);
    double sum = 0.0;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
      photons[i] = std::abs(spectrum[i]);
      sum += photons[i];
    }
    const double scale = atoms * photons_per_atom / sum;
    for (double& v : photons.values()) v *= scale;
  }
  return bin_sum(photons, static_cast<std::size_t>(supersampling));
}

/// Fraction of the field total in pixels whose centers lie within `radius`
/// of (center_row, center_col).
inline double encircled_energy(const ScalarField2D& field, double center_row, double center_col,
                               double radius) {
  if (!(radius >= 0.0)) throw ParameterError("encircled_energy: radius must be >= 0");
  double inside = 0.0;
  double all = 0.0;
  const double r2 = radius * radius;
  for (std::size_t r = 0; r < field.height(); ++r) {
    const double dy = static_cast<double>(r) - center_row;
    for (std::size_t c = 0; c < field.width(); ++c) {
      const double dx = static_cast<double>(c) - center_col;
      const double v = field.at(r, c);
      all += v;
      if (dx * dx + dy * dy <= r2) inside += v;
    }
  }
  return all > 0.0 ? inside / all : 0.0;
}

struct AiryRoiBounds {
  double focal_min = 0.0;  // m, focal-plane radius
  double focal_max = 0.0;
  double min_pixels = 0.0;
  double max_pixels = 0.0;
};

/// Bounds on the first-dark-ring radius, 1.22 lambda/(2 NA) < r <
/// sqrt(2) 1.22 lambda/(2 NA), in the focal plane and in binned camera pixels.
inline AiryRoiBounds airy_roi_radius(double wavelength, double numerical_aperture,
                                     double magnification, double binned_pixel_size) {
  if (!(numerical_aperture > 0.0 && numerical_aperture < 1.0))
    throw ParameterError("airy_roi_radius: NA must be in (0, 1)");
  AiryRoiBounds b;
  b.focal_min = 1.22 * wavelength / (2.0 * numerical_aperture);
  b.focal_max = std::sqrt(2.0) * b.focal_min;
  b.min_pixels = b.focal_min * magnification / binned_pixel_size;
  b.max_pixels = b.focal_max * magnification / binned_pixel_size;
  return b;
}

/// Fraction of isotropic emission collected by an objective of numerical
/// aperture NA: (1 - sqrt(1 - NA^2)) / 2.
inline double solid_angle(double numerical_aperture) {
  if (!(numerical_aperture >= 0.0 && numerical_aperture <= 1.0))
    throw ParameterError("solid_angle: NA must be in [0, 1]");
  return 0.5 * (1.0 - std::sqrt(1.0 - numerical_aperture * numerical_aperture));
}

inline double photons_per_atom(double scattering_rate, double exposure_time,
                               double numerical_aperture) {
  return scattering_rate * exposure_time * solid_angle(numerical_aperture);
}

}  // namespace atomsim
