#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "atomsim/experiment.hpp"
#include "oracles.hpp"

using atomsim::ExperimentConfig;
using atomsim::LatticeSpec;
using atomsim::RandomState;
using atomsim::SiteCoordinate;

namespace {

std::set<std::pair<int, int>> as_set(const atomsim::SiteMap& map) {
  std::set<std::pair<int, int>> out;
  for (const auto& s : map.sites) out.emplace(s.row, s.col);
  return out;
}

ExperimentConfig grid_config(int n) {
  ExperimentConfig c;
  std::vector<SiteCoordinate> sites;
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col) sites.push_back({r, col});
  c.sites = sites;
  return c;
}

}  // namespace

TEST(SiteMap, ExplicitListIsIdentity) {
  ExperimentConfig c;
  c.sites = std::vector<SiteCoordinate>{{10, 10}, {10, 16}};
  const auto map = atomsim::build_site_map(c, 32, 32);
  EXPECT_EQ(map.coordinates(), (std::vector<SiteCoordinate>{{10, 10}, {10, 16}}));
}

TEST(SiteMap, LatticeExpansion) {
  ExperimentConfig c;
  c.sites = LatticeSpec{8, 8, 6, 6, 3, 3, 0.0};
  const auto map = atomsim::build_site_map(c, 32, 32);
  std::set<std::pair<int, int>> expected;
  for (int r : {8, 14, 20})
    for (int col : {8, 14, 20}) expected.emplace(r, col);
  EXPECT_EQ(as_set(map), expected);
}

TEST(SiteMap, SquareLatticeQuarterTurnIsSameSet) {
  ExperimentConfig c;
  c.sites = LatticeSpec{8, 8, 6, 6, 3, 3, 0.0};
  const auto unrotated = as_set(atomsim::build_site_map(c, 32, 32));
  c.sites = LatticeSpec{8, 8, 6, 6, 3, 3, std::numbers::pi / 2};
  const auto rotated = as_set(atomsim::build_site_map(c, 32, 32));
  // Brute-force: rotate every unrotated point about the lattice center (14, 14).
  std::set<std::pair<int, int>> transformed;
  for (const auto& [r, col] : unrotated) {
    const double dx = col - 14.0;
    const double dy = r - 14.0;
    // (dx, dy) -> (-dy, dx)
    transformed.emplace(static_cast<int>(std::lround(14.0 + dx)), static_cast<int>(std::lround(14.0 - dy)));
  }
  EXPECT_EQ(rotated, unrotated);
  EXPECT_EQ(transformed, unrotated);
}

TEST(SiteMap, RejectsOutOfBoundsAndDuplicates) {
  ExperimentConfig c;
  c.sites = std::vector<SiteCoordinate>{{40, 1}};
  EXPECT_THROW(atomsim::build_site_map(c, 32, 32), atomsim::ParameterError);
  c.sites = std::vector<SiteCoordinate>{{-1, 1}};
  EXPECT_THROW(atomsim::build_site_map(c, 32, 32), atomsim::ParameterError);
  c.sites = std::vector<SiteCoordinate>{{3, 3}, {3, 3}};
  EXPECT_THROW(atomsim::build_site_map(c, 32, 32), atomsim::ParameterError);
}

TEST(SiteMap, SupersampledPositionsAtPixelCenters) {
  ExperimentConfig c;
  c.sites = std::vector<SiteCoordinate>{{5, 7}};
  const auto map = atomsim::build_site_map(c, 16, 16, 4);
  EXPECT_EQ(map.sites[0].sub_row, 22u);
  EXPECT_EQ(map.sites[0].sub_col, 30u);
}

TEST(Occupancy, FullAndEmpty) {
  ExperimentConfig c = grid_config(10);
  const auto map = atomsim::build_site_map(c, 10, 10);
  RandomState s(1);
  c.filling_ratio = 1.0;
  for (const auto& site : atomsim::sample_occupancy(s, map, c).sites) EXPECT_TRUE(site.occupied);
  c.filling_ratio = 0.0;
  for (const auto& site : atomsim::sample_occupancy(s, map, c).sites) EXPECT_FALSE(site.occupied);
}

TEST(Occupancy, FillingFraction) {
  ExperimentConfig c = grid_config(317);  // about 10^5 sites
  c.filling_ratio = 0.55;
  const auto map = atomsim::build_site_map(c, 317, 317);
  RandomState s(2);
  const auto truth = atomsim::sample_occupancy(s, map, c);
  const auto occupied = std::count_if(truth.sites.begin(), truth.sites.end(), [](const auto& x) { return x.occupied; });
  EXPECT_NEAR(static_cast<double>(occupied) / truth.sites.size(), 0.55, 0.005);
}

TEST(Occupancy, ExplicitOverride) {
  ExperimentConfig c;
  c.sites = std::vector<SiteCoordinate>{{1, 1}, {1, 5}, {5, 5}};
  c.explicit_occupancy = std::vector<bool>{true, false, true};
  const auto map = atomsim::build_site_map(c, 8, 8);
  RandomState s(3);
  const auto truth = atomsim::sample_occupancy(s, map, c);
  EXPECT_TRUE(truth.sites[0].occupied);
  EXPECT_FALSE(truth.sites[1].occupied);
  EXPECT_TRUE(truth.sites[2].occupied);
  c.explicit_occupancy = std::vector<bool>{true};
  EXPECT_THROW(atomsim::sample_occupancy(s, map, c), atomsim::ParameterError);
}

TEST(ImagingLoss, NoLossAtFullSurvival) {
  ExperimentConfig c = grid_config(20);
  c.filling_ratio = 0.5;
  const auto map = atomsim::build_site_map(c, 20, 20);
  RandomState s(4);
  auto truth = atomsim::sample_occupancy(s, map, c);
  const auto result = atomsim::apply_imaging_loss(s, truth, 1.0, map);
  for (const auto& site : result.truth.sites) EXPECT_FALSE(site.lost);
  for (double v : result.atom_array.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(ImagingLoss, LostFractionAndMeanLossTime) {
  ExperimentConfig c = grid_config(317);
  c.filling_ratio = 1.0;
  const auto map = atomsim::build_site_map(c, 317, 317);
  RandomState s(5);
  const auto truth = atomsim::sample_occupancy(s, map, c);
  const double p = 0.4;
  const auto result = atomsim::apply_imaging_loss(s, truth, p, map);
  double lost = 0.0;
  double loss_sum = 0.0;
  for (const auto& site : result.truth.sites) {
    if (!site.lost) continue;
    lost += 1.0;
    loss_sum += result.atom_array.at(static_cast<std::size_t>(site.row), static_cast<std::size_t>(site.col));
  }
  EXPECT_NEAR(lost / result.truth.sites.size(), 0.6, 0.005);
  const double expected = oracle::simpson(
      [&](double t) { return t * std::pow(p, t) * std::log(p) / (p - 1.0); }, 0.0, 1.0);
  EXPECT_NEAR(loss_sum / lost, expected, 0.01 * expected);
}

TEST(ImagingLoss, TruthAndArrayConsistent) {
  ExperimentConfig c = grid_config(30);
  c.filling_ratio = 0.6;
  const auto map = atomsim::build_site_map(c, 30, 30, 2);
  RandomState s(6);
  const auto truth = atomsim::sample_occupancy(s, map, c);
  const auto result = atomsim::apply_imaging_loss(s, truth, 0.5, map);
  double expected_sum = 0.0;
  for (std::size_t i = 0; i < map.sites.size(); ++i) {
    const auto& site = result.truth.sites[i];
    const double v = result.atom_array.at(map.sites[i].sub_row, map.sites[i].sub_col);
    if (site.lost) {
      ASSERT_TRUE(site.occupied);
      ASSERT_TRUE(site.loss_time.has_value());
      EXPECT_EQ(v, *site.loss_time);
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      expected_sum += *site.loss_time;
    } else {
      EXPECT_FALSE(site.loss_time.has_value());
      EXPECT_EQ(v, site.occupied ? 1.0 : 0.0);
      expected_sum += site.occupied ? 1.0 : 0.0;
    }
  }
  double sum = 0.0;
  for (double v : result.atom_array.values()) sum += v;
  EXPECT_EQ(sum, expected_sum);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c = grid_config(2);
  c.filling_ratio = 1.2;
  EXPECT_THROW(c.validate(), atomsim::ParameterError);
  c.filling_ratio = 0.5;
  c.survival_probability = 0.0;
  EXPECT_THROW(c.validate(), atomsim::ParameterError);
}
