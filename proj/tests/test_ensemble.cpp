#include "dressed/ensemble.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace dressed;

namespace {

SpinSite site(double x, double y, double z, int cls) { return SpinSite{Vec3(x, y, z), cls}; }

EnsembleConfig small_config() {
  EnsembleConfig c;
  c.n_configs = 300;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(Ensemble, ConfigValidation) {
  EnsembleConfig c;
  EXPECT_NO_THROW(c.validate());
  c.box_edge = 30.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.density_ppm = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.n_configs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.drive = DrivePair{0.0, 0.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Ensemble, AxesAreUnitAndTetrahedral) {
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(nv_axes()[i].norm(), 1.0, 1e-15);
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_NEAR(nv_axes()[i].dot(nv_axes()[j]), -1.0 / 3.0, 1e-15);
  }
}

TEST(Ensemble, SampleCountMatchesDensity) {
  EnsembleConfig c;
  c.density_ppm = 50.0;
  c.box_edge = 50.0;
  EXPECT_NEAR(c.expected_sites(), 1100.0, 1e-9);
  double sum = 0.0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_configuration(c, static_cast<std::uint64_t>(i));
    sum += static_cast<double>(s.size());
    for (const auto& x : s) {
      EXPECT_GE(x.position.minCoeff(), 0.0);
      EXPECT_LE(x.position.maxCoeff(), 50.0);
      EXPECT_GE(x.axis_class, 0);
      EXPECT_LE(x.axis_class, 3);
    }
  }
  // Poisson standard error of the mean: sqrt(1100 / 50) ~ 4.7
  EXPECT_NEAR(sum / n, 1100.0, 20.0);
}

TEST(Ensemble, SamplingIsDeterministic) {
  EnsembleConfig c;
  const auto a = sample_configuration(c, 3);
  const auto b = sample_configuration(c, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].axis_class, b[i].axis_class);
  }
  c.density_ppm = 1e-6;
  int empty = 0;
  for (int i = 0; i < 20; ++i) empty += sample_configuration(c, static_cast<std::uint64_t>(i)).empty();
  EXPECT_GE(empty, 19);
}

TEST(Ensemble, PairwiseCouplingOracles) {
  const auto a = site(0, 0, 0, 0);
  const Vec3 z = nv_axes()[0];
  const Vec3 perp = Vec3(1, -1, 0).normalized();
  const SpinSite b{6.0 * perp, 0};
  EXPECT_NEAR(pairwise_coupling(a, b), 52.0 / 216.0, 1e-12);
  EXPECT_NEAR(pairwise_coupling(a, b), 0.241, 5e-4);
  const SpinSite far{12.0 * perp, 0};
  EXPECT_NEAR(pairwise_coupling(a, far) * 8.0, pairwise_coupling(a, b), 1e-12 * pairwise_coupling(a, b));
  const SpinSite along{6.0 * z, 0};
  EXPECT_NEAR(pairwise_coupling(a, along), -2.0 * pairwise_coupling(a, b), 1e-12);
  const auto c = site(1.3, -2.0, 4.1, 2);
  const auto d = site(-3.0, 0.7, 1.0, 1);
  EXPECT_NEAR(pairwise_coupling(c, d), pairwise_coupling(d, c), 1e-12 * std::abs(pairwise_coupling(c, d)));
  EXPECT_THROW(pairwise_coupling(c, c), std::invalid_argument);
}

TEST(Ensemble, DeltaStatisticBasics) {
  const auto central = site(20, 20, 20, 0);
  EXPECT_EQ(delta_statistic({}, central, std::nullopt, 15.0), 0.0);
  const auto b = site(25, 21, 19, 2);
  EXPECT_NEAR(delta_statistic({b}, central, std::nullopt, 15.0), std::abs(pairwise_coupling(central, b)), 1e-15);
  EXPECT_EQ(delta_statistic({site(25, 21, 19, 0)}, central, std::nullopt, 15.0), 0.0);
  EXPECT_EQ(delta_statistic({site(38, 20, 20, 1)}, central, std::nullopt, 15.0), 0.0);
}

TEST(Ensemble, DeltaDriveRatioIsExact) {
  EnsembleConfig c;
  const SpinSite central{c.center(), 0};
  const double f = (100.0 - 64.0) / (2.0 * (100.0 + 64.0));
  EXPECT_NEAR(f, 0.1098, 1e-4);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto s = sample_configuration(c, i);
    const double nd = delta_statistic(s, central, std::nullopt, c.cutoff_radius);
    ASSERT_GT(nd, 0.0);
    EXPECT_NEAR(delta_statistic(s, central, DrivePair{10, 8}, c.cutoff_radius) / nd, f, 1e-12);
    EXPECT_NEAR(delta_statistic(s, central, DrivePair{10, 0}, c.cutoff_radius) / nd, 0.5, 1e-12);
  }
}

TEST(Ensemble, RddStatisticBasics) {
  const auto a = site(0, 0, 0, 1);
  const auto b = site(4, 1, 0, 2);
  const auto r = rdd_statistic({a, b}, std::nullopt, 15.0);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], std::abs(pairwise_coupling(a, b)), 1e-15);
  EXPECT_TRUE(rdd_statistic({a}, std::nullopt, 15.0).empty());
  EXPECT_TRUE(rdd_statistic({a, site(20, 0, 0, 2)}, std::nullopt, 15.0).empty());
  EXPECT_TRUE(rdd_statistic({a, site(3, 0, 0, 1)}, std::nullopt, 15.0).empty());
  const auto d = rdd_statistic({a, b}, DrivePair{10, 8}, 15.0);
  EXPECT_NEAR(d[0] / r[0], 36.0 / 328.0, 1e-12);
}

TEST(Ensemble, RddPerSpinMode) {
  const auto a = site(0, 0, 0, 1);
  const auto b = site(3, 0, 0, 2);
  const auto c = site(10, 0, 0, 3);
  const auto ps = rdd_statistic({a, b, c}, std::nullopt, 15.0, RddMode::per_spin);
  ASSERT_EQ(ps.size(), 3u);
  EXPECT_NEAR(ps[0], std::abs(pairwise_coupling(a, b)), 1e-15);
  EXPECT_NEAR(ps[2], std::max(std::abs(pairwise_coupling(a, c)), std::abs(pairwise_coupling(b, c))), 1e-15);
  const auto pc = rdd_statistic({a, b, c}, std::nullopt, 15.0);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_EQ(pc[0], *std::max_element(ps.begin(), ps.end()));
}

TEST(Pdf, CountsSumToSamples) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  for (std::size_t n : {5u, 99u, 100u, 3000u}) {
    std::vector<double> s(n);
    for (auto& v : s) v = e(rng);
    const auto p = pdf_summary(s);
    long total = 0;
    for (long k : p.counts) total += k;
    EXPECT_EQ(static_cast<std::size_t>(total), n);
    EXPECT_EQ(p.edges.size(), p.counts.size() + 1);
    EXPECT_EQ(p.peak.has_value(), n >= 100);
    if (p.fwhm) EXPECT_GE(*p.fwhm, 0.0);
  }
}

TEST(Pdf, ConstantSamples) {
  const auto p = pdf_summary(std::vector<double>(200, 0.39));
  ASSERT_TRUE(p.peak && p.fwhm);
  EXPECT_EQ(*p.peak, 0.39);
  EXPECT_EQ(*p.fwhm, 0.0);
  EXPECT_EQ(p.counts.front(), 200);
}

TEST(Pdf, LorentzianWidthRecovered) {
  const double x0 = 0.4, gamma = 0.05;
  std::mt19937_64 rng(11);
  std::cauchy_distribution<double> cauchy(x0, gamma);
  std::vector<double> s(10000);
  for (auto& v : s) v = cauchy(rng);
  const auto p = pdf_summary(s);
  ASSERT_TRUE(p.peak && p.fwhm);
  EXPECT_NEAR(*p.fwhm, 2.0 * gamma, 0.1 * 2.0 * gamma);
  EXPECT_NEAR(*p.peak, x0, 0.2 * gamma);
}

TEST(Ensemble, RunIsDeterministicAcrossWorkers) {
  auto c = small_config();
  c.n_configs = 60;
  const std::vector<std::optional<DrivePair>> drives{std::nullopt, DrivePair{10, 8}};
  const auto a = run_ensemble(c, drives, 1);
  const auto b = run_ensemble(c, drives, 3);
  for (std::size_t d = 0; d < drives.size(); ++d) {
    EXPECT_EQ(a.per_drive[d].delta, b.per_drive[d].delta);
    EXPECT_EQ(a.per_drive[d].rdd, b.per_drive[d].rdd);
  }
  EXPECT_EQ(a.mean_nn_distance, b.mean_nn_distance);
}

TEST(Ensemble, SweepRatiosFollowScaling) {
  const auto rows = sweep_drive(small_config(), 10.0, {0.0, 8.0, 10.0});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[0].drive.has_value());
  EXPECT_NEAR(*rows[1].delta_peak_ratio, 0.5, 0.01);
  EXPECT_NEAR(*rows[1].delta_fwhm_ratio, 0.5, 0.01);
  EXPECT_NEAR(*rows[1].rdd_peak_ratio, 0.5, 0.01);
  EXPECT_NEAR(*rows[2].delta_peak_ratio, 36.0 / 328.0, 0.005);
  EXPECT_NEAR(*rows[2].rdd_peak_ratio, 36.0 / 328.0, 0.005);
  EXPECT_NEAR(*rows[3].delta.peak, 0.0, 1e-12);
  const double q0 = *rows[0].delta.fwhm / *rows[0].delta.peak;
  const double q1 = *rows[1].delta.fwhm / *rows[1].delta.peak;
  EXPECT_NEAR(q1, q0, 0.02 * q0);
}

TEST(Ensemble, NearestNeighbourDistanceIsPlausible) {
  auto c = small_config();
  c.n_configs = 20;
  const auto run = run_ensemble(c, {std::nullopt});
  double m = 0.0;
  for (double v : run.mean_nn_distance) m += v;
  m /= static_cast<double>(run.mean_nn_distance.size());
  // Poisson nearest-neighbour mean: Gamma(4/3) (4 pi n / 3)^(-1/3)
  const double n = c.density_ppm * sites_per_nm3_per_ppm;
  const double expected = std::tgamma(4.0 / 3.0) * std::cbrt(3.0 / (4.0 * std::numbers::pi * n));
  EXPECT_NEAR(m, expected, 0.05 * expected);
}
