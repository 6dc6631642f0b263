#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "atomsim/sampling.hpp"
#include "oracles.hpp"

using atomsim::RandomState;

namespace {

std::vector<double> draw(int n, auto&& sampler) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = sampler();
  return v;
}

}  // namespace

// Poisson -----------------------------------------------------------------

TEST(Poisson, ZeroMeanAlwaysZero) {
  RandomState s(1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(atomsim::sample_poisson(s, 0.0), 0u);
}

TEST(Poisson, RejectsBadMean) {
  RandomState s(1);
  EXPECT_THROW(atomsim::sample_poisson(s, -1.0), atomsim::ParameterError);
  EXPECT_THROW(atomsim::sample_poisson(s, std::nan("")), atomsim::ParameterError);
  EXPECT_THROW(atomsim::sample_poisson(s, INFINITY), atomsim::ParameterError);
}

TEST(Poisson, ZeroProbabilityAtBinnedPixelRate) {
  RandomState s(2);
  const int n = 1'000'000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += atomsim::sample_poisson(s, 2.62) == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / n, std::exp(-2.62), 0.001);
}

TEST(Poisson, MeanAndVarianceAt100) {
  RandomState s(3);
  const auto v = draw(1'000'000, [&] { return static_cast<double>(atomsim::sample_poisson(s, 100.0)); });
  const auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 100.0, 1.0);
  EXPECT_NEAR(m.variance, 100.0, 1.0);
}

class PoissonMoments : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMoments, WithinThreeStandardErrors) {
  const double lambda = GetParam();
  RandomState s(5);
  const int n = 1'000'000;
  const auto v = draw(n, [&] { return static_cast<double>(atomsim::sample_poisson(s, lambda)); });
  const auto m = oracle::moments(v);
  EXPECT_LT(std::fabs(m.mean - lambda), 3.0 * std::sqrt(lambda / n));
  // Var of the sample variance for Poisson: (mu4 - sigma^4)/n with mu4 = l(1+3l).
  const double var_se = std::sqrt((lambda * (1.0 + 3.0 * lambda) - lambda * lambda) / n);
  EXPECT_LT(std::fabs(m.variance - lambda), 3.0 * var_se);
}

INSTANTIATE_TEST_SUITE_P(Rates, PoissonMoments, ::testing::Values(0.1, 1.0, 10.0, 100.0));

TEST(Poisson, RejectionBranchMatchesPmf) {
  // Above the switch point the distribution must stay Poisson.
  const double lambda = 2000.0;
  RandomState s(5);
  const auto v = draw(200000, [&] { return static_cast<double>(atomsim::sample_poisson(s, lambda)); });
  std::vector<double> edges;
  std::vector<double> probs;
  const double sd = std::sqrt(lambda);
  const int lo = static_cast<int>(lambda - 3 * sd);
  const int hi = static_cast<int>(lambda + 3 * sd);
  auto pmf = [&](int k) { return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0)); };
  double below = 0.0;
  for (int k = 0; k < lo; ++k) below += pmf(k);
  edges.push_back(-0.5);
  probs.push_back(below);
  int k = lo;
  for (; k < hi; k += 5) {
    edges.push_back(k - 0.5);
    double p = 0.0;
    for (int j = k; j < k + 5; ++j) p += pmf(j);
    probs.push_back(p);
  }
  edges.push_back(k - 0.5);
  double used = 0.0;
  for (double p : probs) used += p;
  probs.push_back(1.0 - used);
  const double chi = oracle::chi_square(v, edges, probs);
  EXPECT_LT(chi, oracle::chi_square_critical_01(static_cast<int>(probs.size()) - 1));
}

// Gaussian ----------------------------------------------------------------

TEST(Gaussian, ZeroStdReturnsMeanWithoutDraw) {
  RandomState s(6);
  RandomState untouched(6);
  EXPECT_EQ(atomsim::sample_gaussian(s, 5.0, 0.0), 5.0);
  EXPECT_EQ(s.next_u64(), untouched.next_u64());
}

TEST(Gaussian, RejectsNegativeStd) {
  RandomState s(6);
  EXPECT_THROW(atomsim::sample_gaussian(s, 0.0, -1.0), atomsim::ParameterError);
}

TEST(Gaussian, MomentsAndCoverage) {
  RandomState s(7);
  const auto v = draw(1'000'000, [&] { return atomsim::sample_gaussian(s, 0.0, 1.0); });
  const auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 0.0, 0.005);
  EXPECT_NEAR(std::sqrt(m.variance), 1.0, 0.005);
  const auto inside = std::count_if(v.begin(), v.end(), [](double x) { return std::fabs(x) < 1.96; });
  EXPECT_NEAR(static_cast<double>(inside) / v.size(), 0.95, 0.002);
}

// Gamma -------------------------------------------------------------------

TEST(Gamma, Moments) {
  RandomState s(8);
  const auto v = draw(1'000'000, [&] { return atomsim::sample_gamma(s, 3.0, 2.0); });
  const auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 6.0, 0.06);
  EXPECT_NEAR(m.variance, 12.0, 0.36);
}

TEST(Gamma, ShapeOneIsExponential) {
  RandomState s(9);
  const auto v = draw(200000, [&] { return atomsim::sample_gamma(s, 1.0, 5.0); });
  std::vector<double> edges;
  std::vector<double> probs;
  auto cdf = [](double x) { return 1.0 - std::exp(-x / 5.0); };
  for (int i = 0; i < 30; ++i) edges.push_back(i * 1.0);
  edges.push_back(30.0);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) probs.push_back(cdf(edges[i + 1]) - cdf(edges[i]));
  probs.back() += 1.0 - cdf(30.0);
  const double chi = oracle::chi_square(v, edges, probs);
  EXPECT_LT(chi, oracle::chi_square_critical_01(static_cast<int>(probs.size()) - 1));
}

TEST(Gamma, ShapeBelowOneMean) {
  RandomState s(10);
  const auto v = draw(1'000'000, [&] { return atomsim::sample_gamma(s, 0.5, 1.0); });
  EXPECT_NEAR(oracle::moments(v).mean, 0.5, 0.01);
  EXPECT_GE(*std::min_element(v.begin(), v.end()), 0.0);
}

TEST(Gamma, RejectsNonPositive) {
  RandomState s(10);
  EXPECT_THROW(atomsim::sample_gamma(s, 0.0, 1.0), atomsim::ParameterError);
  EXPECT_THROW(atomsim::sample_gamma(s, 1.0, -1.0), atomsim::ParameterError);
}

// Gumbel ------------------------------------------------------------------

TEST(Gumbel, InverseCdfAtInverseE) {
  EXPECT_DOUBLE_EQ(atomsim::gumbel_from_uniform(3.25, 1.7, std::exp(-1.0)), 3.25);
}

TEST(Gumbel, ZeroMeanLocation) {
  EXPECT_NEAR(atomsim::zero_mean_gumbel_location(2.0), -1.1544313298, 1e-9);
}

TEST(Gumbel, ZeroMeanSampleMean) {
  RandomState s(11);
  const int n = 1'000'000;
  const double beta = 2.0;
  const auto v = draw(n, [&] { return atomsim::sample_gumbel_zero_mean(s, beta); });
  const double mean = oracle::moments(v).mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_LE(std::fabs(mean), 3.0 * (beta * std::numbers::pi / std::sqrt(6.0)) / std::sqrt(n));
}

TEST(Gumbel, StandardMedian) {
  RandomState s(12);
  auto v = draw(1'000'000, [&] { return atomsim::sample_gumbel(s, 0.0, 1.0); });
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  EXPECT_NEAR(v[v.size() / 2], -std::log(std::log(2.0)), 0.01);
}

TEST(Gumbel, RejectsNonPositiveBeta) {
  RandomState s(12);
  EXPECT_THROW(atomsim::sample_gumbel(s, 0.0, 0.0), atomsim::ParameterError);
}

// Loss time ---------------------------------------------------------------

TEST(LossTime, Endpoints) {
  for (double p : {0.1, 0.4, 0.9, 1.0}) {
    EXPECT_EQ(atomsim::loss_time_from_uniform(p, 0.0), 0.0);
    EXPECT_NEAR(atomsim::loss_time_from_uniform(p, 1.0 - 1e-12), 1.0, 1e-9);
  }
}

TEST(LossTime, HalfAtHalf) {
  // Invert the CDF (p^t - 1)/(p - 1) = r by bisection.
  const double p = 0.5;
  const double t = oracle::bisect([&](double x) { return (std::pow(p, x) - 1.0) / (p - 1.0) - 0.5; }, 0.0, 1.0);
  EXPECT_NEAR(atomsim::loss_time_from_uniform(p, 0.5), t, 1e-12);
  EXPECT_NEAR(t, 0.4150, 1e-4);
}

TEST(LossTime, HighSurvivalNearlyLinear) {
  for (int i = 0; i <= 1000; ++i) {
    const double r = i / 1000.0;
    EXPECT_LT(std::fabs(atomsim::loss_time_from_uniform(0.999, r) - r), 0.001);
  }
}

TEST(LossTime, RejectsBadP) {
  RandomState s(13);
  EXPECT_THROW(atomsim::sample_loss_time(s, 0.0), atomsim::ParameterError);
  EXPECT_THROW(atomsim::sample_loss_time(s, 1.5), atomsim::ParameterError);
}

TEST(LossTime, PdfIntegratesToOne) {
  for (double p : {0.1, 0.4, 0.9}) {
    EXPECT_NEAR(oracle::simpson([&](double t) { return atomsim::loss_time_pdf(p, t); }, 0.0, 1.0), 1.0, 1e-9);
  }
}

class LossTimeKs : public ::testing::TestWithParam<double> {};

TEST_P(LossTimeKs, EmpiricalCdfMatches) {
  const double p = GetParam();
  RandomState s(14);
  const auto v = draw(1'000'000, [&] { return atomsim::sample_loss_time(s, p); });
  const double d = oracle::ks_distance(v, [&](double t) { return (std::pow(p, t) - 1.0) / (p - 1.0); });
  EXPECT_LE(d, 0.002);
}

INSTANTIATE_TEST_SUITE_P(Survival, LossTimeKs, ::testing::Values(0.1, 0.4, 0.9));

// Inverse regularized upper gamma -----------------------------------------

TEST(InverseGamma, ClosedFormForOnePrimary) {
  EXPECT_NEAR(atomsim::inverse_regularized_gamma_upper(1, std::exp(-2.0)).value, 2.0, 1e-9);
}

TEST(InverseGamma, ThreePrimariesHalf) {
  const double t = oracle::bisect([](double x) { return 0.5 - oracle::upper_gamma_q(3, x); }, 0.0, 50.0);
  const auto result = atomsim::inverse_regularized_gamma_upper(3, 0.5);
  EXPECT_NEAR(result.value, t, 1e-8);
  EXPECT_NEAR(result.value, 2.674, 1e-3);
}

TEST(InverseGamma, ForwardCheckGrid) {
  for (int x = 1; x <= 20; ++x) {
    for (int k = 1; k <= 99; ++k) {
      const double r = k / 100.0;
      const auto result = atomsim::inverse_regularized_gamma_upper(static_cast<std::uint64_t>(x), r);
      EXPECT_LT(std::fabs(oracle::upper_gamma_q(x, result.value) - r), 1e-3) << "x=" << x << " r=" << r;
    }
  }
}

TEST(InverseGamma, ThresholdBoundAndIterationCap) {
  for (double g : {10.0, 300.0}) {
    const double threshold = atomsim::em_gain_step_threshold(g);
    for (int x : {2, 5, 10, 50, 400}) {
      for (double r : {1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
        const auto result = atomsim::inverse_regularized_gamma_upper(static_cast<std::uint64_t>(x), r, threshold);
        EXPECT_LE(result.iterations, atomsim::kSchroderMaxIterations);
        EXPECT_LE(std::fabs(oracle::upper_gamma_q(x, result.value) - r), 10.0 * std::sqrt(threshold))
            << "x=" << x << " r=" << r;
      }
    }
  }
}

TEST(InverseGamma, LargePrimaryCounts) {
  for (std::uint64_t x : {1000ull, 20000ull}) {
    const auto result = atomsim::inverse_regularized_gamma_upper(x, 0.5);
    EXPECT_NEAR(result.value, static_cast<double>(x) - 1.0 / 3.0, 0.01 * std::sqrt(static_cast<double>(x)));
  }
}

TEST(InverseGamma, RejectsBadArguments) {
  EXPECT_THROW(atomsim::inverse_regularized_gamma_upper(0, 0.5), atomsim::ParameterError);
  EXPECT_THROW(atomsim::inverse_regularized_gamma_upper(3, 0.0), atomsim::ParameterError);
  EXPECT_THROW(atomsim::inverse_regularized_gamma_upper(3, 1.0), atomsim::ParameterError);
}

// EM gain -----------------------------------------------------------------

TEST(EmGain, SinglePrimaryAtInverseE) {
  EXPECT_DOUBLE_EQ(atomsim::em_gain_from_uniform(1, 300.0, std::exp(-1.0)), 300.0);
}

TEST(EmGain, ZeroPrimariesGiveZero) {
  RandomState s(15);
  RandomState untouched(15);
  EXPECT_EQ(atomsim::sample_em_gain(s, 0, 300.0), 0.0);
  EXPECT_EQ(s.next_u64(), untouched.next_u64());
}

TEST(EmGain, ThreePrimariesMoments) {
  RandomState s(16);
  const auto v = draw(1'000'000, [&] { return atomsim::sample_em_gain(s, 3, 10.0); });
  const auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 30.0, 0.3);
  EXPECT_NEAR(m.variance, 300.0, 9.0);
}

TEST(EmGain, TwoPrimariesChiSquare) {
  RandomState s(17);
  const double g = 50.0;
  const auto v = draw(200000, [&] { return atomsim::sample_em_gain(s, 2, g); });
  // Density n^(x-1) e^(-n/g) / (g^x (x-1)!) integrated numerically per bin.
  auto pdf = [&](double n) { return n * std::exp(-n / g) / (g * g); };
  std::vector<double> edges;
  std::vector<double> probs;
  for (int i = 0; i <= 40; ++i) edges.push_back(i * 12.5);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) probs.push_back(oracle::simpson(pdf, edges[i], edges[i + 1], 200));
  double used = 0.0;
  for (double p : probs) used += p;
  probs.back() += 1.0 - used;
  const double chi = oracle::chi_square(v, edges, probs);
  EXPECT_LT(chi, oracle::chi_square_critical_01(static_cast<int>(probs.size()) - 1));
}

struct GainCase {
  std::uint64_t x;
  double g;
};

class EmGainMean : public ::testing::TestWithParam<GainCase> {};

TEST_P(EmGainMean, WithinThreeStandardErrors) {
  const auto [x, g] = GetParam();
  RandomState s(18 + x);
  const int n = 200000;
  const auto v = draw(n, [&] { return atomsim::sample_em_gain(s, x, g); });
  const double expected = static_cast<double>(x) * g;
  const double se = std::sqrt(static_cast<double>(x)) * g / std::sqrt(n);
  EXPECT_LT(std::fabs(oracle::moments(v).mean - expected), 3.0 * se);
}

INSTANTIATE_TEST_SUITE_P(Cases, EmGainMean,
                         ::testing::Values(GainCase{1, 10}, GainCase{2, 10}, GainCase{5, 10}, GainCase{10, 10},
                                           GainCase{1, 300}, GainCase{2, 300}, GainCase{5, 300},
                                           GainCase{10, 300}));

TEST(EmGain, RejectsGainBelowOne) {
  RandomState s(19);
  EXPECT_THROW(atomsim::sample_em_gain(s, 3, 0.5), atomsim::ParameterError);
}

TEST(Samplers, ReplayIsBitIdentical) {
  auto run = [] {
    RandomState s(20);
    std::vector<double> out;
    for (int i = 0; i < 200; ++i) {
      out.push_back(static_cast<double>(atomsim::sample_poisson(s, 3.0 + i)));
      out.push_back(atomsim::sample_gaussian(s, 1.0, 2.0));
      out.push_back(atomsim::sample_gamma(s, 0.7, 1.5));
      out.push_back(atomsim::sample_gumbel(s, 0.0, 2.0));
      out.push_back(atomsim::sample_loss_time(s, 0.4));
      out.push_back(atomsim::sample_em_gain(s, 7, 300.0));
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}
