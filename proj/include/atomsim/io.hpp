#pragma once

// Image and ground-truth serialization.
//
//   pgm16: "P5\n<w> <h>\n65535\n" followed by big-endian samples, row-major
//   raw:   two little-endian uint32 (width, height), then little-endian samples

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "atomsim/errors.hpp"
#include "atomsim/experiment.hpp"
#include "atomsim/field.hpp"

namespace atomsim {

enum class ImageFormat { pgm16, raw };

inline ImageFormat image_format_from_name(std::string_view name) {
  if (name == "pgm16") return ImageFormat::pgm16;
  if (name == "raw") return ImageFormat::raw;
  throw ParameterError("image format: unknown '" + std::string(name) + "' (expected pgm16 or raw)");
}

inline std::string_view image_extension(ImageFormat format) {
  return format == ImageFormat::pgm16 ? ".pgm" : ".raw";
}

inline std::string encode_image(const ImageU16& image, ImageFormat format) {
  std::string out;
  if (format == ImageFormat::pgm16) {
    out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n65535\n";
    out.reserve(out.size() + 2 * image.size());
    for (std::uint16_t v : image.values()) {
      out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xff));
    }
    return out;
  }
  out.reserve(8 + 2 * image.size());
  for (std::uint64_t dim : {image.width(), image.height()}) {
    if (dim > 0xffffffffu) throw DimensionError("raw image: dimension exceeds 32 bits");
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((dim >> (8 * b)) & 0xff));
  }
  for (std::uint16_t v : image.values()) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  }
  return out;
}

namespace detail {

inline std::size_t read_pgm_number(std::string_view data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  std::size_t value = 0;
  while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') value = value * 10 + (data[pos++] - '0');
  if (pos == start) throw IoError("pgm: malformed header");
  return value;
}

}  // namespace detail

inline ImageU16 decode_image(std::string_view data, ImageFormat format) {
  auto byte = [&](std::size_t i) { return static_cast<std::uint16_t>(static_cast<unsigned char>(data[i])); };
  if (format == ImageFormat::pgm16) {
    if (data.substr(0, 2) != "P5") throw IoError("pgm: missing P5 magic");
    std::size_t pos = 2;
    const std::size_t w = detail::read_pgm_number(data, pos);
    const std::size_t h = detail::read_pgm_number(data, pos);
    const std::size_t maxval = detail::read_pgm_number(data, pos);
    if (maxval != 65535) throw IoError("pgm: expected maxval 65535");
    ++pos;  // single whitespace before the raster
    if (data.size() != pos + 2 * w * h) throw IoError("pgm: raster size does not match header");
    ImageU16 image(w, h);
    for (std::size_t i = 0; i < image.size(); ++i)
      image[i] = static_cast<std::uint16_t>(byte(pos + 2 * i) << 8 | byte(pos + 2 * i + 1));
    return image;
  }
  if (data.size() < 8) throw IoError("raw: truncated header");
  std::size_t dims[2] = {0, 0};
  for (int d = 0; d < 2; ++d)
    for (int b = 0; b < 4; ++b) dims[d] |= static_cast<std::size_t>(byte(4 * d + b)) << (8 * b);
  if (data.size() != 8 + 2 * dims[0] * dims[1]) throw IoError("raw: payload size does not match header");
  ImageU16 image(dims[0], dims[1]);
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = static_cast<std::uint16_t>(byte(8 + 2 * i) | byte(9 + 2 * i) << 8);
  return image;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_image(const ImageU16& image, const std::filesystem::path& path, ImageFormat format) {
  write_file(path, encode_image(image, format));
}

/// The format follows the file extension (.pgm or .raw).
inline ImageU16 read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext != ".pgm" && ext != ".raw") throw IoError("'" + path.string() + "': expected a .pgm or .raw file");
  return decode_image(read_file(path), ext == ".pgm" ? ImageFormat::pgm16 : ImageFormat::raw);
}

// Ground truth ----------------------------------------------------------------

inline nlohmann::json ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json sites = nlohmann::json::array();
  for (const SiteState& s : truth.sites) {
    nlohmann::json site = {{"row", s.row}, {"col", s.col}, {"occupied", s.occupied}, {"lost", s.lost}};
    if (s.loss_time) site["loss_time"] = *s.loss_time;
    sites.push_back(std::move(site));
  }
  return {{"sites", std::move(sites)}, {"seed", truth.seed}, {"frame_index", truth.frame_index}};
}

/// Compact JSON with sorted keys; reals round-trip exactly.
inline std::string serialize_ground_truth(const GroundTruth& truth) { return ground_truth_to_json(truth).dump(); }

inline GroundTruth parse_ground_truth(std::string_view text) {
  GroundTruth truth;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    truth.seed = j.at("seed").get<std::uint64_t>();
    truth.frame_index = j.at("frame_index").get<std::uint64_t>();
    for (const auto& s : j.at("sites")) {
      SiteState site;
      site.row = s.at("row").get<int>();
      site.col = s.at("col").get<int>();
      site.occupied = s.at("occupied").get<bool>();
      site.lost = s.at("lost").get<bool>();
      if (s.contains("loss_time")) site.loss_time = s.at("loss_time").get<double>();
      truth.sites.push_back(site);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("ground truth: ") + e.what());
  }
  return truth;
}

inline void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  write_file(path, serialize_ground_truth(truth));
}

inline GroundTruth read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path));
}

}  // namespace atomsim
