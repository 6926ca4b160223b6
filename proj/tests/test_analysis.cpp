#include "dressed/analysis.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dressed;

namespace {

Signal sampled(double f, double rate, double duration, double phase = 0.0, double amp = 1.0) {
  Signal s;
  const auto n = static_cast<std::size_t>(std::llround(rate * duration));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    s.t.push_back(t);
    s.y.push_back(amp * std::cos(2.0 * std::numbers::pi * f * t + phase));
  }
  return s;
}

}  // namespace

TEST(PowerSpectrum, SingleToneWithinOneBin) {
  const auto spec = power_spectrum(sampled(0.26, 10.0, 40.0), Window::rect, 1);
  const auto best = std::max_element(spec.power.begin(), spec.power.end()) - spec.power.begin();
  EXPECT_LE(std::abs(spec.freqs[static_cast<std::size_t>(best)] - 0.26), spec.bin_width());
}

TEST(PowerSpectrum, ConstantSignalIsFlat) {
  Signal s;
  for (int i = 0; i < 64; ++i) {
    s.t.push_back(0.1 * i);
    s.y.push_back(0.73);
  }
  for (auto w : {Window::rect, Window::hann}) {
    const auto spec = power_spectrum(s, w, 4);
    EXPECT_LE(*std::max_element(spec.power.begin(), spec.power.end()), 1e-25);
  }
}

TEST(PowerSpectrum, ParsevalOnRectWindow) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int len : {64, 101}) {
    Signal s;
    for (int i = 0; i < len; ++i) {
      s.t.push_back(0.05 * i);
      s.y.push_back(n(rng));
    }
    const double mean = std::accumulate(s.y.begin(), s.y.end(), 0.0) / len;
    double energy = 0.0;
    for (double v : s.y) energy += (v - mean) * (v - mean);
    const auto spec = power_spectrum(s, Window::rect, 1);
    const double total = std::accumulate(spec.power.begin(), spec.power.end(), 0.0);
    EXPECT_NEAR(total / energy, 1.0, 1e-9);
    for (double p : spec.power) EXPECT_GE(p, 0.0);
  }
}

TEST(PowerSpectrum, RejectsBadGrids) {
  Signal s = sampled(1.0, 10.0, 2.0);
  s.t[5] += 0.01;
  EXPECT_THROW(power_spectrum(s), std::invalid_argument);
  EXPECT_THROW(power_spectrum(sampled(1.0, 10.0, 0.5)), std::invalid_argument);
}

TEST(FindPeak, InterpolatedSingleTone) {
  // 40 us record, bin 0.025 MHz
  const auto spec = power_spectrum(sampled(0.5, 10.0, 40.0), Window::hann, 1);
  ASSERT_NEAR(spec.bin_width(), 0.025, 1e-12);
  const auto p = find_peak(spec, 0.1, 2.0);
  EXPECT_NEAR(p.frequency, 0.5, 0.006);
  EXPECT_FALSE(p.at_edge);
  // Off-grid tone: resolution better than a quarter bin.
  const auto off = find_peak(power_spectrum(sampled(0.513, 10.0, 40.0), Window::hann, 1), 0.1, 2.0);
  EXPECT_NEAR(off.frequency, 0.513, 0.025 / 4);
}

TEST(FindPeak, BandSelectsTone) {
  Signal s = sampled(0.4, 10.0, 40.0);
  const Signal b = sampled(1.3, 10.0, 40.0);
  for (std::size_t i = 0; i < s.y.size(); ++i) s.y[i] += b.y[i];
  const auto spec = power_spectrum(s, Window::hann, 4);
  EXPECT_NEAR(find_peak(spec, 0.0, 0.8).frequency, 0.4, 0.005);
  EXPECT_NEAR(find_peak(spec, 0.8, 2.0).frequency, 1.3, 0.005);
  EXPECT_THROW(find_peak(spec, 50.0, 60.0), std::invalid_argument);
}

TEST(FindPeak, EdgePeakIsFlagged) {
  const auto spec = power_spectrum(sampled(0.5, 10.0, 40.0), Window::hann, 1);
  const auto p = find_peak(spec, 0.55, 1.0);
  EXPECT_TRUE(p.at_edge);
  EXPECT_DOUBLE_EQ(p.frequency, spec.freqs[static_cast<std::size_t>(std::llround(0.55 / spec.bin_width()))]);
}

TEST(FindPeak, InvariantUnderPositiveScaling) {
  auto spec = power_spectrum(sampled(0.37, 10.0, 20.0), Window::hann, 2);
  const auto a = find_peak(spec, 0.1, 1.0);
  for (double scale : {0.25, 3.0, 1e6}) {
    Spectrum scaled = spec;
    for (double& v : scaled.power) v *= scale;
    const auto b = find_peak(scaled, 0.1, 1.0);
    EXPECT_NEAR(b.frequency, a.frequency, 1e-12);
    EXPECT_NEAR(b.power / scale, a.power, 1e-9 * a.power);
  }
}

TEST(FitLorentzian, ExactRecovery) {
  const LorentzianParams truth{7.56, 0.12, 0.35, 0.98};
  std::vector<double> x, y;
  for (int i = 0; i <= 60; ++i) {
    x.push_back(7.0 + 0.02 * i);
    y.push_back(lorentzian_dip(truth, x.back()));
  }
  const auto fit = fit_lorentzian(x, y, guess_lorentzian(x, y));
  ASSERT_TRUE(fit.converged);
  EXPECT_TRUE(fit.identifiable);
  EXPECT_NEAR(fit.value("center"), truth.center, 1e-6 * truth.center);
  EXPECT_NEAR(fit.value("hwhm"), truth.hwhm, 1e-6 * truth.hwhm);
  EXPECT_NEAR(fit.value("depth"), truth.depth, 1e-6 * truth.depth);
  EXPECT_NEAR(fit.value("offset"), truth.offset, 1e-6 * truth.offset);
  EXPECT_LE(fit.residual_norm, fit.initial_residual_norm);
  for (double s : fit.sigmas) EXPECT_GE(s, 0.0);
}

TEST(FitLorentzian, FlatDataIsUnidentifiable) {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(1.0);
  }
  const auto fit = fit_lorentzian(x, y, guess_lorentzian(x, y));
  EXPECT_FALSE(fit.identifiable);
  EXPECT_EQ(fit.value("depth"), 0.0);
}

TEST(FitLorentzian, TranslationCovariant) {
  const LorentzianParams truth{1.0, 0.3, 0.5, 1.0};
  std::vector<double> x, y, xs;
  for (int i = 0; i <= 40; ++i) {
    x.push_back(0.05 * i);
    y.push_back(lorentzian_dip(truth, x.back()) + 0.01 * std::sin(3.0 * i));  // fixed perturbation
    xs.push_back(x.back() + 5.0);
  }
  const auto a = fit_lorentzian(x, y, guess_lorentzian(x, y));
  auto g = guess_lorentzian(x, y);
  g.center += 5.0;
  const auto b = fit_lorentzian(xs, y, g);
  EXPECT_NEAR(b.value("center") - a.value("center"), 5.0, 1e-8);
  EXPECT_NEAR(b.value("hwhm"), a.value("hwhm"), 1e-8);
  EXPECT_NEAR(b.value("depth"), a.value("depth"), 1e-8);
  EXPECT_NEAR(b.value("offset"), a.value("offset"), 1e-8);
}

TEST(FitLorentzian, TooFewPoints) {
  EXPECT_THROW(fit_lorentzian({1, 2, 3, 4}, {1, 0, 0, 1}, {}), std::invalid_argument);
}

TEST(FitDampedCosine, ExactRecovery) {
  const DampedCosineParams truth{0.125, 0.03, 0.48, 0.51, 0.4};
  std::vector<double> t, y;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(0.1 * i);
    y.push_back(damped_cosine(truth, t.back()));
  }
  const auto fit = fit_damped_cosine(t, y, guess_damped_cosine(t, y));
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.value("freq"), truth.freq, 1e-6 * truth.freq);
  EXPECT_NEAR(fit.value("decay_rate"), truth.decay_rate, 1e-6 * truth.decay_rate);
  EXPECT_NEAR(fit.value("amp"), truth.amp, 1e-6 * truth.amp);
  EXPECT_NEAR(fit.value("offset"), truth.offset, 1e-6 * truth.offset);
  EXPECT_NEAR(fit.value("phase"), truth.phase, 1e-6);
}

TEST(FitDampedCosine, ZeroAmplitudeIsUnidentifiable) {
  std::vector<double> t, y;
  for (int i = 0; i < 50; ++i) {
    t.push_back(0.2 * i);
    y.push_back(0.5);
  }
  const auto fit = fit_damped_cosine(t, y, guess_damped_cosine(t, y));
  EXPECT_FALSE(fit.identifiable);
  EXPECT_EQ(fit.value("amp"), 0.0);
}

TEST(FitDampedCosine, NormalizesSignsAndTranslates) {
  const DampedCosineParams truth{0.3, 0.0, 0.5, 0.5, -2.0};
  std::vector<double> t, y, ts;
  for (int i = 0; i <= 120; ++i) {
    t.push_back(0.1 * i);
    y.push_back(damped_cosine(truth, t.back()));
    ts.push_back(t.back() + 2.0);
  }
  // Start from the mirrored solution: negative amplitude and frequency.
  const auto a = fit_damped_cosine(t, y, {-0.29, 0.0, -0.45, 0.5, 1.0});
  EXPECT_GE(a.value("amp"), 0.0);
  EXPECT_GE(a.value("freq"), 0.0);
  EXPECT_NEAR(a.value("freq"), 0.3, 1e-8);
  EXPECT_NEAR(a.value("phase"), -2.0, 1e-8);
  const auto b = fit_damped_cosine(ts, y, guess_damped_cosine(ts, y));
  EXPECT_NEAR(b.value("freq"), a.value("freq"), 1e-8);
  EXPECT_NEAR(b.value("amp"), a.value("amp"), 1e-8);
  EXPECT_NEAR(wrap_phase(b.value("phase") + 2.0 * std::numbers::pi * 0.3 * 2.0 - a.value("phase")), 0.0, 1e-8);
}

TEST(Fits, Deterministic) {
  std::vector<double> t, y;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.02);
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.2 * i);
    y.push_back(0.5 + 0.4 * std::cos(2.0 * std::numbers::pi * 0.21 * t.back()) + n(rng));
  }
  const auto a = fit_damped_cosine(t, y, guess_damped_cosine(t, y));
  const auto b = fit_damped_cosine(t, y, guess_damped_cosine(t, y));
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.sigmas, b.sigmas);
  EXPECT_NEAR(a.value("freq"), 0.21, 0.002);
}
