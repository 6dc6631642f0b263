#pragma once

// Sensor models that turn an expected-photon map into a quantized frame.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "atomsim/errors.hpp"
#include "atomsim/field.hpp"
#include "atomsim/random.hpp"
#include "atomsim/sampling.hpp"

namespace atomsim {

/// ADC stage: round half to even, clamp to [0, 65535]. NaN maps to 0.
inline std::uint16_t quantize(double value) {
  if (!(value > 0.0)) return 0;
  if (value >= 65535.0) return 65535;
  const double floor_value = std::floor(value);
  const double fraction = value - floor_value;
  double rounded = floor_value;
  if (fraction > 0.5) {
    rounded += 1.0;
  } else if (fraction == 0.5 && std::fmod(floor_value, 2.0) != 0.0) {
    rounded += 1.0;
  }
  return static_cast<std::uint16_t>(rounded);
}

struct CameraConfigEMCCD {
  std::size_t width = 512;   // physical pixels
  std::size_t height = 512;
  int binning = 1;
  double quantum_efficiency = 0.86;
  double dark_current = 0.0;   // e- / physical pixel / s
  double cic_rate = 0.0;       // events / physical pixel / frame
  double scic_rate = 0.0;      // events / physical pixel / frame
  double stray_rate = 0.0;     // photons / physical pixel / s
  double em_gain = 300.0;
  double preamp_gain = 4.85;   // e- per count
  double bias_clamp = 100.0;   // counts
  double readout_sigma = 0.0;  // counts
  double exposure = 0.08;      // s

  std::size_t image_width() const { return width / static_cast<std::size_t>(binning); }
  std::size_t image_height() const { return height / static_cast<std::size_t>(binning); }

  void validate() const {
    if (width == 0 || height == 0) throw ParameterError("camera.width/height: must be > 0");
    if (binning < 1) throw ParameterError("camera.emccd.binning: must be >= 1");
    if (width % static_cast<std::size_t>(binning) != 0 ||
        height % static_cast<std::size_t>(binning) != 0)
      throw ParameterError("camera.emccd.binning: must divide the resolution");
    if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0))
      throw ParameterError("camera.quantum_efficiency: must be in [0, 1]");
    if (!(dark_current >= 0.0)) throw ParameterError("camera.emccd.dark_current: must be >= 0");
    if (!(cic_rate >= 0.0)) throw ParameterError("camera.emccd.cic_rate: must be >= 0");
    if (!(scic_rate >= 0.0)) throw ParameterError("camera.emccd.scic_rate: must be >= 0");
    if (!(stray_rate >= 0.0)) throw ParameterError("camera.stray_rate: must be >= 0");
    if (!(em_gain >= 1.0)) throw ParameterError("camera.emccd.em_gain: must be >= 1");
    if (!(preamp_gain > 0.0)) throw ParameterError("camera.emccd.preamp_gain: must be > 0");
    if (!(readout_sigma >= 0.0)) throw ParameterError("camera.emccd.readout_sigma: must be >= 0");
    if (!(exposure > 0.0)) throw ParameterError("camera.exposure: must be > 0");
  }
};

/// Shot noise, EM multiplication (photo-, dark and CIC electrons as primaries;
/// serial CIC events as single primaries), preamp scaling, bias and Gaussian
/// readout.
inline ImageU16 simulate_emccd(const ScalarField2D& photons, const CameraConfigEMCCD& cfg,
                               RandomState& state) {
  cfg.validate();
  if (photons.width() != cfg.image_width() || photons.height() != cfg.image_height()) {
    throw DimensionError("simulate_emccd: photon map is " + std::to_string(photons.width()) +
                         "x" + std::to_string(photons.height()) + ", camera produces " +
                         std::to_string(cfg.image_width()) + "x" +
                         std::to_string(cfg.image_height()));
  }
  const double area = static_cast<double>(cfg.binning) * cfg.binning;
  const double stray = cfg.stray_rate * cfg.exposure * area;
  const double thermal = cfg.dark_current * cfg.exposure * area + cfg.cic_rate * area;
  const double scic_mean = cfg.scic_rate * area;
  ImageU16 image(photons.width(), photons.height());
  for (std::size_t i = 0; i < photons.size(); ++i) {
    const double mean = cfg.quantum_efficiency * (photons[i] + stray) + thermal;
    const std::uint64_t primaries = sample_poisson(state, mean);
    const std::uint64_t serial_events = sample_poisson(state, scic_mean);
    // Unit gain means the register is bypassed: electrons pass through as counted.
    double electrons = static_cast<double>(primaries + serial_events);
    if (cfg.em_gain > 1.0) {
      electrons = sample_em_gain(state, primaries, cfg.em_gain);
      for (std::uint64_t k = 0; k < serial_events; ++k) electrons += sample_em_gain(state, 1, cfg.em_gain);
    }
    const double counts = electrons / cfg.preamp_gain + cfg.bias_clamp;
    image[i] = quantize(sample_gaussian(state, counts, cfg.readout_sigma));
  }
  return image;
}

// CMOS ------------------------------------------------------------------------

struct CameraConfigCMOS {
  std::size_t width = 512;
  std::size_t height = 512;
  double quantum_efficiency = 0.8;
  double exposure = 0.08;          // s
  double stray_rate = 0.0;         // photons / pixel / s
  double offset = 200.0;           // counts
  double offset_pixel_sigma = 0.0; // counts, static per pixel
  double offset_row_sigma = 0.0;   // counts, static per row
  double offset_column_sigma = 0.0;  // counts, static per column
  double column_gumbel_beta = 0.0; // counts, static zero-mean Gumbel per column
  double gain = 1.0;               // counts / e-
  double gain_pixel_sigma = 0.0;
  double dark_rate_shape = 1.0;    // Gamma shape of the per-pixel dark rate
  double dark_rate_scale = 0.0;    // e- / s; 0 disables dark current
  double row_noise_sigma = 0.0;    // counts, per row per frame
  double read_noise_sigma = 0.0;   // counts, per pixel per frame
  std::uint64_t sensor_seed = 0;   // fixes the static pixel characteristics

  void validate() const {
    if (width == 0 || height == 0) throw ParameterError("camera.width/height: must be > 0");
    if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0))
      throw ParameterError("camera.quantum_efficiency: must be in [0, 1]");
    if (!(exposure > 0.0)) throw ParameterError("camera.exposure: must be > 0");
    if (!(stray_rate >= 0.0)) throw ParameterError("camera.stray_rate: must be >= 0");
    if (!(offset_pixel_sigma >= 0.0 && offset_row_sigma >= 0.0 && offset_column_sigma >= 0.0))
      throw ParameterError("camera.cmos.offset spreads: must be >= 0");
    if (!(column_gumbel_beta >= 0.0))
      throw ParameterError("camera.cmos.column_gumbel_beta: must be >= 0");
    if (!(gain > 0.0)) throw ParameterError("camera.cmos.gain: must be > 0");
    if (!(gain_pixel_sigma >= 0.0)) throw ParameterError("camera.cmos.gain_pixel_sigma: must be >= 0");
    if (!(dark_rate_shape > 0.0)) throw ParameterError("camera.cmos.dark_rate_shape: must be > 0");
    if (!(dark_rate_scale >= 0.0)) throw ParameterError("camera.cmos.dark_rate_scale: must be >= 0");
    if (!(row_noise_sigma >= 0.0)) throw ParameterError("camera.cmos.row_noise_sigma: must be >= 0");
    if (!(read_noise_sigma >= 0.0)) throw ParameterError("camera.cmos.read_noise_sigma: must be >= 0");
  }
};

/// Static per-pixel sensor state, fixed at sensor initialization.
struct PixelCharacteristics {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> offset;         // counts, includes row and column structure
  std::vector<double> gain;           // counts / e-
  std::vector<double> dark_rate;      // e- / s
  std::vector<double> column_offset;  // Gaussian plus Gumbel draw per column

  bool operator==(const PixelCharacteristics&) const = default;
};

inline PixelCharacteristics init_cmos_sensor(const CameraConfigCMOS& cfg,
                                             std::uint64_t sensor_seed) {
  cfg.validate();
  const RandomState root(sensor_seed, 0);
  RandomState rows = root.fork(1);
  RandomState columns = root.fork(2);
  RandomState pixels = root.fork(3);

  PixelCharacteristics chars;
  chars.width = cfg.width;
  chars.height = cfg.height;
  std::vector<double> row_offset(cfg.height);
  for (double& v : row_offset) v = sample_gaussian(rows, 0.0, cfg.offset_row_sigma);
  chars.column_offset.resize(cfg.width);
  for (double& v : chars.column_offset) {
    v = sample_gaussian(columns, 0.0, cfg.offset_column_sigma);
    if (cfg.column_gumbel_beta > 0.0) v += sample_gumbel_zero_mean(columns, cfg.column_gumbel_beta);
  }
  const std::size_t n = cfg.width * cfg.height;
  chars.offset.resize(n);
  chars.gain.resize(n);
  chars.dark_rate.resize(n);
  for (std::size_t r = 0; r < cfg.height; ++r) {
    for (std::size_t c = 0; c < cfg.width; ++c) {
      const std::size_t i = r * cfg.width + c;
      chars.offset[i] = cfg.offset + row_offset[r] + chars.column_offset[c] +
                        sample_gaussian(pixels, 0.0, cfg.offset_pixel_sigma);
      chars.gain[i] = std::max(0.0, sample_gaussian(pixels, cfg.gain, cfg.gain_pixel_sigma));
      chars.dark_rate[i] = cfg.dark_rate_scale > 0.0
                               ? sample_gamma(pixels, cfg.dark_rate_shape, cfg.dark_rate_scale)
                               : 0.0;
    }
  }
  return chars;
}

/// Shot noise with per-pixel dark rate, per-pixel offset and gain, temporal
/// row noise and combined Gaussian read noise.
inline ImageU16 simulate_cmos(const ScalarField2D& photons, const CameraConfigCMOS& cfg,
                              const PixelCharacteristics& chars, RandomState& state) {
  cfg.validate();
  if (photons.width() != cfg.width || photons.height() != cfg.height ||
      chars.width != cfg.width || chars.height != cfg.height) {
    throw DimensionError("simulate_cmos: photon map, sensor and camera resolution differ");
  }
  std::vector<double> row_noise(cfg.height);
  for (double& v : row_noise) v = sample_gaussian(state, 0.0, cfg.row_noise_sigma);
  const double stray = cfg.stray_rate * cfg.exposure;
  ImageU16 image(cfg.width, cfg.height);
  for (std::size_t r = 0; r < cfg.height; ++r) {
    for (std::size_t c = 0; c < cfg.width; ++c) {
      const std::size_t i = r * cfg.width + c;
      const double mean =
          cfg.quantum_efficiency * (photons[i] + stray) + chars.dark_rate[i] * cfg.exposure;
      const auto electrons = static_cast<double>(sample_poisson(state, mean));
      const double counts = chars.offset[i] + chars.gain[i] * electrons + row_noise[r];
      image[i] = quantize(sample_gaussian(state, counts, cfg.read_noise_sigma));
    }
  }
  return image;
}

}  // namespace atomsim
