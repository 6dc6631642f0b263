// Simulates a small lattice, histograms the ROI sums and fits the occupancy
// mixture, then converts the peak separation back into a scattering rate.

#include <cstdio>
#include <vector>

#include "atomsim/atomsim.hpp"

int main(int argc, char** argv) {
  const std::uint64_t frames = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 300;

  atomsim::SimulationConfig config;
  config.experiment.sites = atomsim::LatticeSpec{12, 12, 8, 8, 10, 10, 0.0};
  config.experiment.filling_ratio = 0.6;
  config.experiment.survival_probability = 0.8;
  atomsim::CameraConfigEMCCD camera;
  camera.width = 96;
  camera.height = 96;
  camera.readout_sigma = 4.0;
  config.camera = camera;

  const atomsim::Simulator simulator(config);
  std::vector<atomsim::ImageU16> images;
  for (std::uint64_t i = 0; i < frames; ++i) images.push_back(simulator.generate_frame(7, i).image);

  const auto sites = simulator.site_map().coordinates();
  const auto sums = atomsim::roi_sums(images, sites, 3.0);
  const auto hist = atomsim::make_histogram(sums, 150.0);
  const auto fit = atomsim::fit_three_component(hist);
  std::printf("unoccupied %.3f  survived %.3f  lost %.3f  p %.3f +- %.3f\n", fit.a, fit.b, fit.c,
              fit.p, fit.p_err);

  // Fraction of a single atom's light inside the ROI, from the optics alone.
  atomsim::ScalarField2D atom(camera.width, camera.height);
  atom.at(48, 48) = 1.0;
  const auto spot = simulator.expected_photons(atom);
  const double roi = atomsim::encircled_energy(spot, 48, 48, 3.0);
  const double rate = atomsim::photons_from_separation(
      fit.d, camera.quantum_efficiency, camera.em_gain, camera.preamp_gain,
      config.experiment.exposure_time, atomsim::solid_angle(config.optics.numerical_aperture), roi);
  std::printf("separation %.0f counts, ROI fraction %.3f -> %.3g photons/atom/s (configured %.3g)\n",
              fit.d, roi, rate, config.experiment.scattering_rate);
  return 0;
}
