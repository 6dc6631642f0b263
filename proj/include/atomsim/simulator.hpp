#pragma once

// Frame generation: a prepared simulation (site map, MTF, sensor state) and
// the parallel corpus writer built on it.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "atomsim/cameras.hpp"
#include "atomsim/config.hpp"
#include "atomsim/experiment.hpp"
#include "atomsim/io.hpp"
#include "atomsim/optics.hpp"
#include "atomsim/random.hpp"

namespace atomsim {

struct Frame {
  ImageU16 image;
  GroundTruth truth;
};

/// Immutable after construction; generate_frame may be called concurrently.
class Simulator {
 public:
  explicit Simulator(SimulationConfig config) : config_(std::move(config)) {
    try {
      config_.validate();
      site_map_ = build_site_map(config_.experiment, config_.image_width(), config_.image_height(),
                                 config_.optics.supersampling);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    if (config_.experiment.explicit_occupancy &&
        config_.experiment.explicit_occupancy->size() != site_map_.sites.size()) {
      throw ConfigError("experiment.explicit_occupancy: length " +
                        std::to_string(config_.experiment.explicit_occupancy->size()) +
                        " does not match " + std::to_string(site_map_.sites.size()) + " sites");
    }
    mtf_ = build_mtf(config_.optics, config_.image_width(), config_.image_height());
    photons_per_atom_ = atomsim::photons_per_atom(config_.experiment.scattering_rate,
                                                  config_.experiment.exposure_time,
                                                  config_.optics.numerical_aperture);
    if (const auto* cmos = std::get_if<CameraConfigCMOS>(&config_.camera))
      sensor_ = init_cmos_sensor(*cmos, cmos->sensor_seed);
  }

  const SimulationConfig& config() const { return config_; }
  const SiteMap& site_map() const { return site_map_; }
  const ScalarField2D& mtf() const { return mtf_; }
  double photons_per_atom() const { return photons_per_atom_; }
  const std::optional<PixelCharacteristics>& sensor() const { return sensor_; }

  ExpectedPhotonMap expected_photons(const ScalarField2D& atom_array) const {
    return apply_optics(atom_array, mtf_, photons_per_atom_, config_.optics.supersampling);
  }

  /// Depends only on (configuration, seed, index).
  Frame generate_frame(std::uint64_t seed, std::uint64_t index) const {
    const RandomState frame_state = RandomState(seed).fork(index);
    RandomState occupancy_state = frame_state.fork(1);
    RandomState loss_state = frame_state.fork(2);
    RandomState camera_state = frame_state.fork(3);

    GroundTruth truth = sample_occupancy(occupancy_state, site_map_, config_.experiment);
    truth.seed = seed;
    truth.frame_index = index;
    LossResult loss = apply_imaging_loss(loss_state, std::move(truth),
                                         config_.experiment.survival_probability, site_map_);
    const ExpectedPhotonMap photons = expected_photons(loss.atom_array);
    ImageU16 image = std::visit(
        [&](const auto& camera) -> ImageU16 {
          if constexpr (std::is_same_v<std::decay_t<decltype(camera)>, CameraConfigEMCCD>)
            return simulate_emccd(photons, camera, camera_state);
          else
            return simulate_cmos(photons, camera, *sensor_, camera_state);
        },
        config_.camera);
    return {std::move(image), std::move(loss.truth)};
  }

 private:
  SimulationConfig config_;
  SiteMap site_map_;
  ScalarField2D mtf_;
  double photons_per_atom_ = 0.0;
  std::optional<PixelCharacteristics> sensor_;
};

/// Worker count from ATOMSIM_THREADS (0 or unset: all cores).
inline unsigned resolve_thread_count() {
  unsigned threads = 0;
  if (const char* env = std::getenv("ATOMSIM_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long value = std::strtoul(env, &end, 10);
    if (*end != '\0') throw ConfigError("ATOMSIM_THREADS: expected a nonnegative integer");
    threads = static_cast<unsigned>(value);
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

inline std::string frame_stem(std::uint64_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "frame_%06llu", static_cast<unsigned long long>(index));
  return buffer;
}

/// Writes frames [0, count) as frame_NNNNNN.{pgm,raw} with a matching
/// .truth.json. Output bytes do not depend on the worker count.
inline void generate_corpus(const Simulator& simulator, std::uint64_t seed, std::uint64_t count,
                            const std::filesystem::path& out_dir, ImageFormat format,
                            unsigned threads, std::ostream* progress = nullptr) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(count, 1)));

  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mutex;

  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::uint64_t index = next.fetch_add(1);
      if (index >= count) return;
      try {
        const Frame frame = simulator.generate_frame(seed, index);
        const std::string stem = frame_stem(index);
        write_image(frame.image, out_dir / (stem + std::string(image_extension(format))), format);
        write_ground_truth(frame.truth, out_dir / (stem + ".truth.json"));
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
      const std::uint64_t finished = done.fetch_add(1) + 1;
      if (progress && (finished % 100 == 0 || finished == count)) {
        std::lock_guard lock(mutex);
        *progress << "generated " << finished << "/" << count << " frames\n" << std::flush;
      }
    }
  };

  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace atomsim
