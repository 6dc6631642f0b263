#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atomsim/atomsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw atomsim::IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".raw")) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) throw atomsim::IoError("no .pgm or .raw frames in '" + dir.string() + "'");
  return frames;
}

std::vector<atomsim::ImageU16> load_frames(const fs::path& dir) {
  std::vector<atomsim::ImageU16> images;
  for (const auto& path : list_frames(dir)) images.push_back(atomsim::read_image(path));
  return images;
}

void emit(const json& report, const std::string& out) {
  const std::string text = report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    atomsim::write_file(out, text);
  }
}

json histogram_json(const atomsim::Histogram& h) {
  return {{"bin_width", h.bin_width}, {"origin", h.origin}, {"counts", h.counts}};
}

double quantile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

struct GenerateArgs {
  std::string config;
  std::optional<std::uint64_t> count;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "pgm16";
  std::string camera;
};

int run_generate(const GenerateArgs& args) {
  atomsim::SimulationConfig config = atomsim::load_config(args.config);
  if (args.count) config.count = *args.count;
  if (args.seed) config.seed = *args.seed;
  if (!args.out.empty()) config.output_dir = args.out;
  if (!args.camera.empty()) config.camera = atomsim::convert_camera(config.camera, args.camera);
  const atomsim::ImageFormat format = atomsim::image_format_from_name(args.format);
  const atomsim::Simulator simulator(config);
  atomsim::generate_corpus(simulator, config.seed, config.count, config.output_dir, format,
                           atomsim::resolve_thread_count(), &std::cout);
  return 0;
}

struct FitHistArgs {
  std::string images;
  std::string config;
  double radius = 3.0;
  double bin_width = 0.0;
  std::string out;
};

int run_fit_hist(const FitHistArgs& args) {
  const atomsim::SimulationConfig config = atomsim::load_config(args.config);
  const atomsim::Simulator simulator(config);
  const auto sites = simulator.site_map().coordinates();
  const auto images = load_frames(args.images);
  const std::vector<double> sums = atomsim::roi_sums(images, sites, args.radius);
  double width = args.bin_width;
  if (width <= 0.0) {
    const auto [lo, hi] = std::minmax_element(sums.begin(), sums.end());
    const double bins = std::clamp(std::sqrt(static_cast<double>(sums.size())), 20.0, 200.0);
    width = std::max((*hi - *lo) / bins, 1.0);
  }
  const atomsim::Histogram hist = atomsim::make_histogram(sums, width);
  const atomsim::ThreeComponentFit fit = atomsim::fit_three_component(hist);
  json report = {
      {"a", fit.a},         {"a_err", fit.a_err},     {"b", fit.b},
      {"b_err", fit.b_err}, {"c", fit.c},             {"c_err", fit.c_err},
      {"p", fit.p},         {"p_err", fit.p_err},     {"mu0", fit.mu0},
      {"mu1", fit.mu1},     {"d", fit.d},             {"d_err", fit.d_err},
      {"sigma0", fit.sigma0}, {"sigma1", fit.sigma1}, {"sigma_lost", fit.sigma_lost},
      {"deviance", fit.deviance}, {"images", images.size()}, {"sites", sites.size()},
      {"roi_radius", args.radius}, {"histogram", histogram_json(hist)}};
  emit(report, args.out);
  return 0;
}

struct FitGainArgs {
  std::string images;
  double bin_width = 1.0;
  std::vector<double> range;
  double preamp = 0.0;
  std::string out;
};

int run_fit_gain(const FitGainArgs& args) {
  const auto images = load_frames(args.images);
  std::vector<double> values;
  for (const auto& image : images) values.insert(values.end(), image.values().begin(), image.values().end());
  double lo = 0.0;
  double hi = 0.0;
  if (args.range.size() == 2) {
    lo = args.range[0];
    hi = args.range[1];
  } else {
    // Start well above the readout peak; end a few tail lengths further out,
    // using the mean excess as the tail-length estimate.
    const double median = quantile(values, 0.5);
    const double sigma = median - quantile(values, 0.158655);
    lo = median + std::max(10.0 * sigma, 10.0);
    double excess = 0.0;
    std::size_t n = 0;
    for (double v : values) {
      if (v >= lo) {
        excess += v - lo;
        ++n;
      }
    }
    if (n == 0) throw atomsim::FitError("fit_em_tail: no pixels above the readout peak");
    hi = lo + 5.0 * excess / static_cast<double>(n);
  }
  const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
  const double origin = std::floor(*vmin / args.bin_width) * args.bin_width;
  const auto bins = static_cast<std::size_t>(std::floor((*vmax - origin) / args.bin_width)) + 1;
  const atomsim::Histogram hist = atomsim::make_histogram(values, args.bin_width, origin, bins);
  const atomsim::EmTailFit fit = atomsim::fit_em_tail(hist, lo, hi);
  json report = {{"g", fit.g}, {"g_err", fit.g_err}, {"range", {lo, hi}}, {"bins_used", fit.bins_used},
                 {"pixels", values.size()}};
  if (args.preamp > 0.0) {
    report["preamp_gain"] = args.preamp;
    report["electron_gain"] = fit.g * args.preamp;
    report["electron_gain_err"] = fit.g_err * args.preamp;
  }
  emit(report, args.out);
  return 0;
}

struct FitZernikeArgs {
  std::string images;
  std::string config;
  std::size_t window = 15;
  double init_defocus = 0.05;
  std::size_t grid = 0;
  std::string out;
};

int run_fit_zernike(const FitZernikeArgs& args) {
  const atomsim::SimulationConfig config = atomsim::load_config(args.config);
  const atomsim::Simulator simulator(config);
  const auto images = load_frames(args.images);
  const auto half = static_cast<int>(args.window / 2);
  atomsim::ScalarField2D spot(args.window, args.window);
  std::size_t crops = 0;
  for (const auto& image : images) {
    for (const auto& site : simulator.site_map().sites) {
      if (site.row - half < 0 || site.col - half < 0 ||
          site.row - half + static_cast<int>(args.window) > static_cast<int>(image.height()) ||
          site.col - half + static_cast<int>(args.window) > static_cast<int>(image.width()))
        throw atomsim::DimensionError("fit-zernike: window around a site leaves the image");
      for (std::size_t r = 0; r < args.window; ++r)
        for (std::size_t c = 0; c < args.window; ++c)
          spot.at(r, c) += image.at(static_cast<std::size_t>(site.row - half) + r,
                                    static_cast<std::size_t>(site.col - half) + c);
      ++crops;
    }
  }
  for (double& v : spot.values()) v /= static_cast<double>(crops);
  atomsim::ZernikeCoefficients init;
  init[atomsim::ZernikeTerm::defocus] = args.init_defocus;
  atomsim::ZernikeFitOptions options;
  options.model_grid = args.grid;
  const atomsim::ZernikeFit fit = atomsim::fit_zernike(spot, config.optics, init, options);
  json terms = json::object();
  for (atomsim::ZernikeTerm term : atomsim::kAllZernikeTerms) {
    const double err = fit.uncertainties[term];
    terms[std::string(atomsim::name_of(term))] = {
        {"noll", atomsim::noll_index(term)},
        {"value", fit.coefficients[term]},
        {"uncertainty", std::isfinite(err) ? json(err) : json(nullptr)},
        {"alignment_only", atomsim::is_alignment_term(term)}};
  }
  emit({{"terms", terms}, {"amplitude", fit.amplitude}, {"background", fit.background},
        {"residual_rms", fit.residual_rms}, {"crops", crops}},
       args.out);
  return 0;
}

struct PsfArgs {
  std::string config;
  std::size_t grid = 512;
  std::string dump;
  std::string out;
};

int run_psf(const PsfArgs& args) {
  atomsim::OpticalConfig optics;
  if (!args.config.empty()) optics = atomsim::load_config(args.config).optics;
  optics.supersampling = 1;
  const auto pupil = atomsim::build_pupil(optics, args.grid, args.grid);
  const atomsim::ScalarField2D psf = atomsim::pupil_to_psf(pupil);
  const atomsim::ScalarField2D mtf = atomsim::psf_to_mtf(psf);
  const double centre = static_cast<double>(args.grid / 2);
  const double ring = atomsim::first_dark_ring_radius(optics.pupil_radius_fraction);
  json table = json::array();
  for (int k = 1; k <= 20; ++k) {
    const double radius = 0.5 * k;
    table.push_back({{"radius", radius}, {"energy", atomsim::encircled_energy(psf, centre, centre, radius)}});
  }
  json report = {{"grid", args.grid},
                 {"first_dark_ring", {{"radius", ring}, {"energy", atomsim::encircled_energy(psf, centre, centre, ring)}}},
                 {"encircled_energy", table}};
  if (!args.dump.empty()) {
    json dump = {{"width", args.grid}, {"height", args.grid},
                 {"psf", std::vector<double>(psf.values().begin(), psf.values().end())},
                 {"mtf", std::vector<double>(mtf.values().begin(), mtf.values().end())}};
    atomsim::write_file(args.dump, dump.dump());
  }
  emit(report, args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neutral-atom fluorescence image simulator"};
  app.set_version_flag("--version", std::string(atomsim::kVersion));
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write simulated frames and ground truth");
  generate->add_option("--config", gen.config, "Configuration JSON")->required()->check(CLI::ExistingFile);
  generate->add_option("--count", gen.count, "Number of frames (overrides config)");
  generate->add_option("--seed", gen.seed, "Corpus seed (overrides config)");
  generate->add_option("--out", gen.out, "Output directory (overrides config)");
  generate->add_option("--format", gen.format, "pgm16 or raw")->check(CLI::IsMember({"pgm16", "raw"}));
  generate->add_option("--camera", gen.camera, "Use this camera model instead")->check(CLI::IsMember({"emccd", "cmos"}));

  FitHistArgs hist;
  auto* fit_hist = app.add_subcommand("fit-hist", "Fit the occupancy mixture to ROI sums");
  fit_hist->add_option("--images", hist.images, "Frame directory")->required();
  fit_hist->add_option("--config", hist.config, "Configuration that defines the sites")->required();
  fit_hist->add_option("--radius", hist.radius, "ROI radius in pixels");
  fit_hist->add_option("--bin-width", hist.bin_width, "Histogram bin width (0 = automatic)");
  fit_hist->add_option("--out", hist.out, "Report path (default stdout)");

  FitGainArgs gain;
  auto* fit_gain = app.add_subcommand("fit-gain", "Fit the EM-gain tail of dark frames");
  fit_gain->add_option("--images", gain.images, "Frame directory")->required();
  fit_gain->add_option("--bin-width", gain.bin_width, "Histogram bin width in counts");
  fit_gain->add_option("--range", gain.range, "Fit range LO HI in counts")->expected(2);
  fit_gain->add_option("--preamp", gain.preamp, "Preamp gain (e- per count) to report the electron gain");
  fit_gain->add_option("--out", gain.out, "Report path (default stdout)");

  FitZernikeArgs zern;
  auto* fit_zernike = app.add_subcommand("fit-zernike", "Fit Zernike coefficients to the mean spot");
  fit_zernike->add_option("--images", zern.images, "Frame directory")->required();
  fit_zernike->add_option("--config", zern.config, "Configuration that defines sites and optics")->required();
  fit_zernike->add_option("--window", zern.window, "Spot window edge in pixels");
  fit_zernike->add_option("--init-defocus", zern.init_defocus, "Starting defocus; its sign selects the branch");
  fit_zernike->add_option("--grid", zern.grid, "Model grid edge (0 = automatic)");
  fit_zernike->add_option("--out", zern.out, "Report path (default stdout)");

  PsfArgs psf;
  auto* psf_cmd = app.add_subcommand("psf", "Encircled-energy table of the configured PSF");
  psf_cmd->add_option("--config", psf.config, "Configuration with an optics block");
  psf_cmd->add_option("--grid", psf.grid, "Grid edge in pixels");
  psf_cmd->add_option("--dump", psf.dump, "Write PSF and MTF grids as JSON");
  psf_cmd->add_option("--out", psf.out, "Report path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(gen);
    if (*fit_hist) return run_fit_hist(hist);
    if (*fit_gain) return run_fit_gain(gain);
    if (*fit_zernike) return run_fit_zernike(zern);
    if (*psf_cmd) return run_psf(psf);
  } catch (const std::exception& e) {
    std::cerr << "atomsim: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
