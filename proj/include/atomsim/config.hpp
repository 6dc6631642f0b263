#pragma once

// JSON configuration: parsing, defaults and validation of a full simulation.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "atomsim/cameras.hpp"
#include "atomsim/errors.hpp"
#include "atomsim/experiment.hpp"
#include "atomsim/optics.hpp"
#include "atomsim/zernike.hpp"

namespace atomsim {

inline constexpr int kConfigSchemaVersion = 1;

using CameraConfig = std::variant<CameraConfigEMCCD, CameraConfigCMOS>;

struct SimulationConfig {
  ExperimentConfig experiment;
  OpticalConfig optics;
  CameraConfig camera;
  std::uint64_t seed = 0;
  std::uint64_t count = 1;
  std::string output_dir = "frames";

  std::size_t image_width() const {
    return std::visit([](const auto& c) -> std::size_t {
      if constexpr (std::is_same_v<std::decay_t<decltype(c)>, CameraConfigEMCCD>) return c.image_width();
      else return c.width;
    }, camera);
  }
  std::size_t image_height() const {
    return std::visit([](const auto& c) -> std::size_t {
      if constexpr (std::is_same_v<std::decay_t<decltype(c)>, CameraConfigEMCCD>) return c.image_height();
      else return c.height;
    }, camera);
  }

  void validate() const {
    experiment.validate();
    optics.validate();
    std::visit([](const auto& c) { c.validate(); }, camera);
    if (count < 1) throw ConfigError("count: must be >= 1");
  }
};

/// Swaps the camera for the other model, keeping the shared fields and using
/// defaults for the rest.
inline CameraConfig convert_camera(const CameraConfig& camera, std::string_view kind) {
  return std::visit([&](const auto& c) -> CameraConfig {
    auto copy_shared = [&](auto out) {
      out.width = c.width;
      out.height = c.height;
      out.quantum_efficiency = c.quantum_efficiency;
      out.stray_rate = c.stray_rate;
      out.exposure = c.exposure;
      return out;
    };
    if (kind == "emccd") {
      if constexpr (std::is_same_v<std::decay_t<decltype(c)>, CameraConfigEMCCD>) return c;
      else return copy_shared(CameraConfigEMCCD{});
    }
    if (kind == "cmos") {
      if constexpr (std::is_same_v<std::decay_t<decltype(c)>, CameraConfigCMOS>) return c;
      else return copy_shared(CameraConfigCMOS{});
    }
    throw ConfigError("camera: unknown camera type '" + std::string(kind) + "' (expected emccd or cmos)");
  }, camera);
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& object, std::string_view path,
                           std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) throw ConfigError(std::string(path) + ": expected an object");
  for (const auto& item : object.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || key == item.key();
    if (!known) {
      throw ConfigError("unknown key '" + (path.empty() ? std::string() : std::string(path) + ".") +
                        item.key() + "'");
    }
  }
}

template <class T>
void read(const json& object, std::string_view path, const char* key, T& out) {
  const auto it = object.find(key);
  if (it == object.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(path) + "." + key + ": wrong type (" + it->type_name() + ")");
  }
}

inline ExperimentConfig parse_experiment(const json& j) {
  reject_unknown(j, "experiment",
                 {"sites", "lattice", "filling_ratio", "survival_probability", "scattering_rate",
                  "exposure_time", "explicit_occupancy"});
  ExperimentConfig e;
  const bool has_sites = j.contains("sites");
  const bool has_lattice = j.contains("lattice");
  if (has_sites == has_lattice)
    throw ConfigError("experiment: exactly one of 'sites' or 'lattice' is required");
  if (has_sites) {
    const json& list = j.at("sites");
    if (!list.is_array()) throw ConfigError("experiment.sites: expected an array");
    std::vector<SiteCoordinate> sites;
    for (const json& s : list) {
      reject_unknown(s, "experiment.sites[]", {"row", "col"});
      if (!s.contains("row") || !s.contains("col"))
        throw ConfigError("experiment.sites[]: 'row' and 'col' are required");
      SiteCoordinate c;
      read(s, "experiment.sites[]", "row", c.row);
      read(s, "experiment.sites[]", "col", c.col);
      sites.push_back(c);
    }
    e.sites = std::move(sites);
  } else {
    const json& l = j.at("lattice");
    reject_unknown(l, "experiment.lattice",
                   {"origin_row", "origin_col", "spacing_x", "spacing_y", "count_x", "count_y", "rotation"});
    LatticeSpec lattice;
    read(l, "experiment.lattice", "origin_row", lattice.origin_row);
    read(l, "experiment.lattice", "origin_col", lattice.origin_col);
    read(l, "experiment.lattice", "spacing_x", lattice.spacing_x);
    read(l, "experiment.lattice", "spacing_y", lattice.spacing_y);
    read(l, "experiment.lattice", "count_x", lattice.count_x);
    read(l, "experiment.lattice", "count_y", lattice.count_y);
    read(l, "experiment.lattice", "rotation", lattice.rotation);
    e.sites = lattice;
  }
  read(j, "experiment", "filling_ratio", e.filling_ratio);
  read(j, "experiment", "survival_probability", e.survival_probability);
  read(j, "experiment", "scattering_rate", e.scattering_rate);
  read(j, "experiment", "exposure_time", e.exposure_time);
  if (j.contains("explicit_occupancy")) {
    std::vector<bool> occupancy;
    read(j, "experiment", "explicit_occupancy", occupancy);
    e.explicit_occupancy = std::move(occupancy);
  }
  return e;
}

inline OpticalConfig parse_optics(const json& j) {
  reject_unknown(j, "optics",
                 {"zernike", "pupil_radius_fraction", "supersampling", "numerical_aperture",
                  "wavelength", "magnification", "pixel_size", "phase_scale"});
  OpticalConfig o;
  if (const auto it = j.find("zernike"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "reference")
        throw ConfigError("optics.zernike: the only named set is \"reference\"");
      o.zernike = reference_aberrations();
    } else {
      if (!it->is_object()) throw ConfigError("optics.zernike: expected an object or \"reference\"");
      for (const auto& item : it->items()) {
        const auto term = zernike_term_from_name(item.key());
        if (!term) throw ConfigError("unknown key 'optics.zernike." + item.key() + "'");
        if (!item.value().is_number())
          throw ConfigError("optics.zernike." + item.key() + ": wrong type (" + item.value().type_name() + ")");
        o.zernike[*term] = item.value().get<double>();
      }
    }
  }
  read(j, "optics", "pupil_radius_fraction", o.pupil_radius_fraction);
  read(j, "optics", "supersampling", o.supersampling);
  read(j, "optics", "numerical_aperture", o.numerical_aperture);
  read(j, "optics", "wavelength", o.wavelength);
  read(j, "optics", "magnification", o.magnification);
  read(j, "optics", "pixel_size", o.pixel_size);
  read(j, "optics", "phase_scale", o.phase_scale);
  return o;
}

template <class C>
void read_shared(const json& j, C& c) {
  read(j, "camera", "width", c.width);
  read(j, "camera", "height", c.height);
  read(j, "camera", "quantum_efficiency", c.quantum_efficiency);
  read(j, "camera", "stray_rate", c.stray_rate);
}

inline CameraConfig parse_camera(const json& j, double exposure) {
  reject_unknown(j, "camera", {"width", "height", "quantum_efficiency", "stray_rate", "emccd", "cmos"});
  const bool emccd = j.contains("emccd");
  const bool cmos = j.contains("cmos");
  if (emccd == cmos) throw ConfigError("camera: exactly one of 'emccd' or 'cmos' is required");
  if (emccd) {
    const json& e = j.at("emccd");
    reject_unknown(e, "camera.emccd",
                   {"binning", "dark_current", "cic_rate", "scic_rate", "em_gain", "preamp_gain",
                    "bias_clamp", "readout_sigma"});
    CameraConfigEMCCD c;
    read_shared(j, c);
    read(e, "camera.emccd", "binning", c.binning);
    read(e, "camera.emccd", "dark_current", c.dark_current);
    read(e, "camera.emccd", "cic_rate", c.cic_rate);
    read(e, "camera.emccd", "scic_rate", c.scic_rate);
    read(e, "camera.emccd", "em_gain", c.em_gain);
    read(e, "camera.emccd", "preamp_gain", c.preamp_gain);
    read(e, "camera.emccd", "bias_clamp", c.bias_clamp);
    read(e, "camera.emccd", "readout_sigma", c.readout_sigma);
    c.exposure = exposure;
    return c;
  }
  const json& m = j.at("cmos");
  reject_unknown(m, "camera.cmos",
                 {"offset", "offset_pixel_sigma", "offset_row_sigma", "offset_column_sigma", "column_gumbel_beta", "gain",
                  "gain_pixel_sigma", "dark_rate_shape", "dark_rate_scale", "row_noise_sigma",
                  "read_noise_sigma", "sensor_seed"});
  CameraConfigCMOS c;
  read_shared(j, c);
  read(m, "camera.cmos", "offset", c.offset);
  read(m, "camera.cmos", "offset_pixel_sigma", c.offset_pixel_sigma);
  read(m, "camera.cmos", "offset_row_sigma", c.offset_row_sigma);
  read(m, "camera.cmos", "offset_column_sigma", c.offset_column_sigma);
  read(m, "camera.cmos", "column_gumbel_beta", c.column_gumbel_beta);
  read(m, "camera.cmos", "gain", c.gain);
  read(m, "camera.cmos", "gain_pixel_sigma", c.gain_pixel_sigma);
  read(m, "camera.cmos", "dark_rate_shape", c.dark_rate_shape);
  read(m, "camera.cmos", "dark_rate_scale", c.dark_rate_scale);
  read(m, "camera.cmos", "row_noise_sigma", c.row_noise_sigma);
  read(m, "camera.cmos", "read_noise_sigma", c.read_noise_sigma);
  read(m, "camera.cmos", "sensor_seed", c.sensor_seed);
  c.exposure = exposure;
  return c;
}

// 1-based line and column of a byte offset.
inline std::string text_position(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace detail

/// Parses and validates a configuration document. Validation failures carry
/// the dotted field name.
inline SimulationConfig parse_config(std::string_view text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte just past the offending token.
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    std::string message = e.what();
    if (const auto pos = message.find("syntax error"); pos != std::string::npos) message = message.substr(pos);
    throw ConfigError("config parse error at " + detail::text_position(text, byte) + ": " + message);
  }
  detail::reject_unknown(j, "", {"schema_version", "seed", "count", "output_dir", "experiment", "optics", "camera"});
  int version = kConfigSchemaVersion;
  detail::read(j, "config", "schema_version", version);
  if (version != kConfigSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(version));
  if (!j.contains("experiment")) throw ConfigError("experiment: required");
  if (!j.contains("camera")) throw ConfigError("camera: required");

  SimulationConfig config;
  detail::read(j, "config", "seed", config.seed);
  detail::read(j, "config", "count", config.count);
  detail::read(j, "config", "output_dir", config.output_dir);
  config.experiment = detail::parse_experiment(j.at("experiment"));
  if (j.contains("optics")) config.optics = detail::parse_optics(j.at("optics"));
  config.camera = detail::parse_camera(j.at("camera"), config.experiment.exposure_time);
  try {
    config.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

inline SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace atomsim
