#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "atomsim/config.hpp"
#include "atomsim/io.hpp"

using atomsim::ConfigError;
using atomsim::ImageFormat;
using atomsim::ImageU16;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "experiment": {"sites": [{"row": 8, "col": 8}]},
  "camera": {"width": 16, "height": 16, "emccd": {}}
})";

std::string error_of(const std::string& text) {
  try {
    atomsim::parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("atomsim_test_" + name);
}

}  // namespace

TEST(Config, MinimalDocumentUsesDefaults) {
  const auto cfg = atomsim::parse_config(kMinimal);
  EXPECT_EQ(cfg.count, 1u);
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.experiment.filling_ratio, atomsim::ExperimentConfig{}.filling_ratio);
  EXPECT_EQ(cfg.optics.pupil_radius_fraction, 0.5);
  ASSERT_TRUE(std::holds_alternative<atomsim::CameraConfigEMCCD>(cfg.camera));
  const auto& cam = std::get<atomsim::CameraConfigEMCCD>(cfg.camera);
  EXPECT_EQ(cam.width, 16u);
  EXPECT_EQ(cam.em_gain, 300.0);
  EXPECT_EQ(cam.exposure, cfg.experiment.exposure_time);
  EXPECT_EQ(cfg.image_width(), 16u);
}

TEST(Config, ReferenceZernikeAndNamedTerms) {
  auto cfg = atomsim::parse_config(R"({
    "experiment": {"lattice": {"origin_row": 4, "origin_col": 4, "spacing_x": 4, "spacing_y": 4, "count_x": 2, "count_y": 2}},
    "optics": {"zernike": "reference"},
    "camera": {"width": 16, "height": 16, "cmos": {"sensor_seed": 5}}
  })");
  EXPECT_EQ(cfg.optics.zernike, atomsim::reference_aberrations());
  EXPECT_EQ(std::get<atomsim::CameraConfigCMOS>(cfg.camera).sensor_seed, 5u);
  cfg = atomsim::parse_config(R"({
    "experiment": {"sites": [{"row": 8, "col": 8}]},
    "optics": {"zernike": {"defocus": 0.05}},
    "camera": {"width": 16, "height": 16, "emccd": {}}
  })");
  EXPECT_EQ(cfg.optics.zernike[atomsim::ZernikeTerm::defocus], 0.05);
}

TEST(Config, FillingRatioOutOfRangeNamesField) {
  const std::string msg = error_of(R"({
    "experiment": {"sites": [{"row": 8, "col": 8}], "filling_ratio": 1.2},
    "camera": {"width": 16, "height": 16, "emccd": {}}
  })");
  EXPECT_NE(msg.find("filling_ratio"), std::string::npos) << msg;
}

TEST(Config, BothCameraVariantsRejected) {
  const std::string msg = error_of(R"({
    "experiment": {"sites": [{"row": 8, "col": 8}]},
    "camera": {"width": 16, "height": 16, "emccd": {}, "cmos": {}}
  })");
  EXPECT_FALSE(msg.empty());
}

TEST(Config, UnknownKeyNamed) {
  const std::string msg = error_of(R"({
    "experiment": {"sites": [{"row": 8, "col": 8}]},
    "camera": {"width": 16, "height": 16, "emccd": {"em_gian": 10}}
  })");
  EXPECT_NE(msg.find("camera.emccd.em_gian"), std::string::npos) << msg;
  EXPECT_NE(error_of(R"({"experiment": {}, "camera": {}, "colour": 1})").find("colour"), std::string::npos);
}

TEST(Config, ParseErrorReportsLineAndColumn) {
  const std::string msg = error_of("{\n  \"seed\": 1,\n  \"count\": ]\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(Config, WrongSchemaVersion) {
  EXPECT_NE(error_of(R"({"schema_version": 2, "experiment": {}, "camera": {}})").find("schema_version"),
            std::string::npos);
}

TEST(Config, ConvertCameraKeepsSharedFields) {
  const auto cfg = atomsim::parse_config(kMinimal);
  const auto cmos = atomsim::convert_camera(cfg.camera, "cmos");
  ASSERT_TRUE(std::holds_alternative<atomsim::CameraConfigCMOS>(cmos));
  EXPECT_EQ(std::get<atomsim::CameraConfigCMOS>(cmos).width, 16u);
  EXPECT_THROW(atomsim::convert_camera(cfg.camera, "ccd"), ConfigError);
}

TEST(Config, LoadFromFile) {
  const auto path = temp_path("config.json");
  atomsim::write_file(path, kMinimal);
  EXPECT_EQ(atomsim::load_config(path).image_height(), 16u);
  std::filesystem::remove(path);
  EXPECT_THROW(atomsim::load_config(path), atomsim::IoError);
}

TEST(ImageIo, Pgm16Bytes) {
  ImageU16 image(2, 1);
  image[0] = 1;
  image[1] = 65535;
  const std::string bytes = atomsim::encode_image(image, ImageFormat::pgm16);
  const std::string header = "P5\n2 1\n65535\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(bytes.substr(header.size()), std::string("\x00\x01\xff\xff", 4));
}

TEST(ImageIo, RawBytes) {
  ImageU16 image(2, 1);
  image[0] = 1;
  image[1] = 65535;
  EXPECT_EQ(atomsim::encode_image(image, ImageFormat::raw),
            std::string("\x02\x00\x00\x00\x01\x00\x00\x00\x01\x00\xff\xff", 12));
}

TEST(ImageIo, RoundTripBothFormats) {
  ImageU16 image(7, 5);
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<std::uint16_t>(i * 1871 + 3);
  for (ImageFormat f : {ImageFormat::pgm16, ImageFormat::raw}) {
    const auto path = temp_path("image" + std::string(atomsim::image_extension(f)));
    atomsim::write_image(image, path, f);
    EXPECT_EQ(atomsim::read_image(path), image);
    std::filesystem::remove(path);
  }
}

TEST(ImageIo, RejectsCorruptData) {
  EXPECT_THROW(atomsim::decode_image("P2\n1 1\n65535\n", ImageFormat::pgm16), atomsim::IoError);
  EXPECT_THROW(atomsim::decode_image(std::string("\x02\x00\x00\x00\x01\x00\x00\x00\x01", 9), ImageFormat::raw),
               atomsim::IoError);
  EXPECT_THROW(atomsim::image_format_from_name("tiff"), atomsim::ParameterError);
}

TEST(GroundTruth, EmptySiteList) {
  atomsim::GroundTruth truth;
  truth.seed = 3;
  truth.frame_index = 9;
  EXPECT_EQ(atomsim::serialize_ground_truth(truth), R"({"frame_index":9,"seed":3,"sites":[]})");
}

TEST(GroundTruth, LossTimeOnlyOnLostSites) {
  atomsim::GroundTruth truth;
  truth.sites.push_back({1, 2, true, true, 0.1 + 0.2});
  truth.sites.push_back({3, 4, true, false, std::nullopt});
  truth.sites.push_back({5, 6, false, false, std::nullopt});
  const std::string text = atomsim::serialize_ground_truth(truth);
  EXPECT_EQ(text.find("loss_time"), text.rfind("loss_time"));
  EXPECT_NE(text.find(R"("col":2,"loss_time":)"), std::string::npos) << text;
  const auto parsed = atomsim::parse_ground_truth(text);
  EXPECT_EQ(parsed, truth);
  EXPECT_EQ(*parsed.sites[0].loss_time, 0.1 + 0.2);
  EXPECT_EQ(atomsim::serialize_ground_truth(parsed), text);
}

TEST(GroundTruth, FileRoundTrip) {
  atomsim::GroundTruth truth;
  truth.seed = 0xffffffffffffffffull;
  truth.sites.push_back({10, 11, true, true, 1e-17});
  const auto path = temp_path("truth.json");
  atomsim::write_ground_truth(truth, path);
  EXPECT_EQ(atomsim::read_ground_truth(path), truth);
  std::filesystem::remove(path);
  EXPECT_THROW(atomsim::parse_ground_truth(R"({"sites":[]})"), atomsim::IoError);
}
