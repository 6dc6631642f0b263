#pragma once

// Site map, occupancy and imaging loss. Produces the ground truth label and
// the pre-optics atom array for one frame.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "atomsim/errors.hpp"
#include "atomsim/field.hpp"
#include "atomsim/random.hpp"
#include "atomsim/sampling.hpp"

namespace atomsim {

struct SiteCoordinate {
  int row = 0;
  int col = 0;
  auto operator<=>(const SiteCoordinate&) const = default;
};

/// Rectangular lattice. `origin` is the first site at rotation 0; the rotation
/// (radians, counter-clockwise in (col, row)) is applied about the lattice center.
struct LatticeSpec {
  double origin_row = 0.0;
  double origin_col = 0.0;
  double spacing_x = 1.0;  // along columns
  double spacing_y = 1.0;  // along rows
  int count_x = 1;
  int count_y = 1;
  double rotation = 0.0;
};

struct ExperimentConfig {
  std::variant<std::vector<SiteCoordinate>, LatticeSpec> sites;
  double filling_ratio = 0.5;
  double survival_probability = 1.0;
  double scattering_rate = 30000.0;  // photons / s / atom
  double exposure_time = 0.08;       // s
  std::optional<std::vector<bool>> explicit_occupancy;

  void validate() const {
    if (!(filling_ratio >= 0.0 && filling_ratio <= 1.0))
      throw ParameterError("experiment.filling_ratio: must be in [0, 1]");
    if (!(survival_probability > 0.0 && survival_probability <= 1.0))
      throw ParameterError("experiment.survival_probability: must be in (0, 1]");
    if (!(scattering_rate >= 0.0))
      throw ParameterError("experiment.scattering_rate: must be >= 0");
    if (!(exposure_time > 0.0)) throw ParameterError("experiment.exposure_time: must be > 0");
    if (const auto* lattice = std::get_if<LatticeSpec>(&sites)) {
      if (lattice->count_x < 0 || lattice->count_y < 0)
        throw ParameterError("experiment.lattice: counts must be >= 0");
    }
  }
};

/// A site in camera pixels plus its position on the supersampled grid.
struct Site {
  int row = 0;
  int col = 0;
  std::size_t sub_row = 0;
  std::size_t sub_col = 0;
};

struct SiteMap {
  std::size_t width = 0;   // camera pixels
  std::size_t height = 0;
  int supersampling = 1;
  std::vector<Site> sites;

  std::vector<SiteCoordinate> coordinates() const {
    std::vector<SiteCoordinate> out;
    out.reserve(sites.size());
    for (const Site& s : sites) out.push_back({s.row, s.col});
    return out;
  }
};

struct SiteState {
  int row = 0;
  int col = 0;
  bool occupied = false;
  bool lost = false;
  std::optional<double> loss_time;  // present iff lost

  bool operator==(const SiteState&) const = default;
};

struct GroundTruth {
  std::vector<SiteState> sites;
  std::uint64_t seed = 0;
  std::uint64_t frame_index = 0;

  bool operator==(const GroundTruth&) const = default;
};

/// Expands the configured sites and places them on a grid of
/// `width` x `height` camera pixels with the given supersampling factor.
/// Lattice positions round to the nearest supersampled pixel.
inline SiteMap build_site_map(const ExperimentConfig& config, std::size_t width,
                              std::size_t height, int supersampling = 1) {
  if (supersampling < 1) throw ParameterError("build_site_map: supersampling must be >= 1");
  const auto ss = static_cast<long long>(supersampling);
  const long long half = ss / 2;
  SiteMap map{width, height, supersampling, {}};

  // Positions are collected on the supersampled grid.
  std::vector<std::pair<long long, long long>> positions;
  if (const auto* list = std::get_if<std::vector<SiteCoordinate>>(&config.sites)) {
    for (const SiteCoordinate& s : *list) positions.emplace_back(s.row * ss + half, s.col * ss + half);
  } else {
    const auto& lattice = std::get<LatticeSpec>(config.sites);
    const double center_x = 0.5 * (lattice.count_x - 1) * lattice.spacing_x;
    const double center_y = 0.5 * (lattice.count_y - 1) * lattice.spacing_y;
    const double cos_a = std::cos(lattice.rotation);
    const double sin_a = std::sin(lattice.rotation);
    for (int j = 0; j < lattice.count_y; ++j) {
      for (int i = 0; i < lattice.count_x; ++i) {
        const double dx = i * lattice.spacing_x - center_x;
        const double dy = j * lattice.spacing_y - center_y;
        const double col = lattice.origin_col + center_x + cos_a * dx - sin_a * dy;
        const double row = lattice.origin_row + center_y + sin_a * dx + cos_a * dy;
        positions.emplace_back(std::llround(row * static_cast<double>(ss)) + half,
                               std::llround(col * static_cast<double>(ss)) + half);
      }
    }
  }

  const auto sub_width = static_cast<long long>(width) * ss;
  const auto sub_height = static_cast<long long>(height) * ss;
  std::set<std::pair<long long, long long>> seen;
  for (const auto& [sub_row, sub_col] : positions) {
    if (sub_row < 0 || sub_col < 0 || sub_row >= sub_height || sub_col >= sub_width) {
      throw ParameterError("experiment.sites: site (" + std::to_string(sub_row / ss) + ", " +
                           std::to_string(sub_col / ss) + ") lies outside the " +
                           std::to_string(width) + "x" + std::to_string(height) + " camera");
    }
    if (!seen.emplace(sub_row, sub_col).second) {
      throw ParameterError("experiment.sites: duplicate site (" + std::to_string(sub_row / ss) +
                           ", " + std::to_string(sub_col / ss) + ")");
    }
    map.sites.push_back({static_cast<int>(sub_row / ss), static_cast<int>(sub_col / ss),
                         static_cast<std::size_t>(sub_row), static_cast<std::size_t>(sub_col)});
  }
  return map;
}

/// Occupies each site independently with probability filling_ratio unless an
/// explicit occupancy list is configured.
inline GroundTruth sample_occupancy(RandomState& state, const SiteMap& map,
                                    const ExperimentConfig& config) {
  if (config.explicit_occupancy && config.explicit_occupancy->size() != map.sites.size()) {
    throw ParameterError("experiment.explicit_occupancy: length " +
                         std::to_string(config.explicit_occupancy->size()) +
                         " does not match " + std::to_string(map.sites.size()) + " sites");
  }
  GroundTruth truth;
  truth.sites.reserve(map.sites.size());
  for (std::size_t i = 0; i < map.sites.size(); ++i) {
    SiteState s;
    s.row = map.sites[i].row;
    s.col = map.sites[i].col;
    s.occupied = config.explicit_occupancy ? (*config.explicit_occupancy)[i]
                                           : state.uniform() < config.filling_ratio;
    truth.sites.push_back(s);
  }
  return truth;
}

struct LossResult {
  GroundTruth truth;
  ScalarField2D atom_array;  // supersampled grid
};

/// Each occupied site survives with probability p; lost sites draw the
/// survived fraction of the exposure. The atom array holds 1 for survivors,
/// the loss time for lost atoms and 0 elsewhere.
inline LossResult apply_imaging_loss(RandomState& state, GroundTruth truth, double p,
                                     const SiteMap& map) {
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("apply_imaging_loss: p must be in (0, 1]");
  if (truth.sites.size() != map.sites.size())
    throw DimensionError("apply_imaging_loss: ground truth does not match the site map");
  const auto ss = static_cast<std::size_t>(map.supersampling);
  ScalarField2D atoms(map.width * ss, map.height * ss);
  for (std::size_t i = 0; i < truth.sites.size(); ++i) {
    SiteState& s = truth.sites[i];
    s.lost = false;
    s.loss_time.reset();
    if (!s.occupied) continue;
    double value = 1.0;
    if (state.uniform() >= p) {
      s.lost = true;
      s.loss_time = sample_loss_time(state, p);
      value = *s.loss_time;
    }
    atoms.at(map.sites[i].sub_row, map.sites[i].sub_col) = value;
  }
  return {std::move(truth), std::move(atoms)};
}

}  // namespace atomsim
