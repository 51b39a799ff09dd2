#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "restfuse/filter.hpp"

using namespace restfuse;

namespace {

// |H| evaluated from the biquad coefficients with explicit polynomials.
double coeff_magnitude(const FilterSpec& spec, double hz) {
  const oracle::cplx z1 = std::polar(1.0, -2.0 * oracle::pi * hz / spec.sample_rate);
  const oracle::cplx z2 = z1 * z1;
  double mag = 1.0;
  for (const auto& s : spec.sections) mag *= std::abs((s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2));
  return mag;
}

// 4th-order Butterworth band-pass magnitude with bilinear prewarping.
double butterworth_magnitude(double lo, double hi, double fs, double hz) {
  const auto warp = [fs](double f) { return std::tan(oracle::pi * f / fs); };
  const double wl = warp(lo), wh = warp(hi), w = warp(hz);
  const double x = (w * w - wl * wh) / ((wh - wl) * w);
  return 1.0 / std::sqrt(1.0 + std::pow(x, 4));
}

std::vector<double> tone(double hz, double fs, double seconds, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(static_cast<std::size_t>(seconds * fs));
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = amp * std::cos(2 * oracle::pi * hz * t / fs + phase);
  return x;
}

}  // namespace

TEST_CASE("design matches the analytic Butterworth response") {
  for (auto [lo, hi, fs] : {std::tuple{0.5, 40.0, 512.0}, std::tuple{0.5, 40.0, 250.0}, std::tuple{8.0, 13.0, 128.0}}) {
    const auto spec = design_bandpass(lo, hi, fs);
    REQUIRE(spec.sections.size() == 2);
    CHECK(spec.order() == 4);
    for (const auto& s : spec.sections) CHECK(is_stable(s));
    for (double f = 0.1; f < fs / 2; f += 0.37) {
      INFO("f = " << f);
      CHECK(coeff_magnitude(spec, f) == Catch::Approx(butterworth_magnitude(lo, hi, fs, f)).margin(1e-9));
      CHECK(magnitude_response(spec, f) == Catch::Approx(coeff_magnitude(spec, f)).margin(1e-12));
    }
  }
}

TEST_CASE("single-pass gain at 10 Hz and structural zero at DC") {
  const auto spec = design_bandpass(0.5, 40, 512);
  const double g = coeff_magnitude(spec, 10.0);
  CHECK(g >= 0.99);
  CHECK(g <= 1.01);
  CHECK(magnitude_response(spec, 0.0) == 0.0);
  CHECK(magnitude_response(spec, 256.0) < 1e-12);
}

TEST_CASE("invalid bands are parameter errors") {
  for (auto [lo, hi] : {std::pair{40.0, 0.5}, std::pair{0.0, 40.0}, std::pair{0.5, 256.0}, std::pair{10.0, 10.0}}) {
    try {
      design_bandpass(lo, hi, 512);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parameter);
    }
  }
}

TEST_CASE("zero input gives zero output") {
  const auto spec = design_bandpass(0.5, 40, 512);
  const std::vector<double> x(2048, 0.0);
  for (double v : filtfilt(x, spec)) CHECK(v == 0.0);
}

TEST_CASE("10 Hz tone passes with 2% amplitude accuracy and no phase shift") {
  const double fs = 512;
  const auto spec = design_bandpass(0.5, 40, fs);
  const auto x = tone(10, fs, 4, 1.0, 0.3);
  const auto y = filtfilt(x, spec);
  const std::size_t edge = static_cast<std::size_t>(0.5 * fs);
  const auto [ax, px] = oracle::fit_sinusoid(x, 10, fs, edge, x.size() - edge);
  const auto [ay, py] = oracle::fit_sinusoid(y, 10, fs, edge, y.size() - edge);
  CHECK(std::abs(ay / ax - 1.0) < 0.02);
  // residual shift from the padded edges stays under a tenth of a sample
  CHECK(std::abs(py - px) < 0.1 * 2 * oracle::pi * 10 / fs);
  CHECK(oracle::xcorr_peak_lag(x, y, 20, edge) == 0);
}

TEST_CASE("phase neutrality across the band interior") {
  const double fs = 250;
  const auto spec = design_bandpass(0.5, 40, fs);
  for (double hz : {3.0, 7.5, 12.0, 22.0, 31.0}) {
    const auto x = tone(hz, fs, 6, 1.0, 1.1);
    const auto y = filtfilt(x, spec);
    INFO("hz = " << hz);
    CHECK(oracle::xcorr_peak_lag(x, y, 10, 125) == 0);
    const auto [ax, px] = oracle::fit_sinusoid(x, hz, fs, 125, x.size() - 125);
    const auto [ay, py] = oracle::fit_sinusoid(y, hz, fs, 125, y.size() - 125);
    CHECK(std::abs(std::remainder(py - px, 2 * oracle::pi)) < 0.1 * 2 * oracle::pi * hz / fs);
    // forward-backward gain is the squared single-pass magnitude
    CHECK(ay / ax == Catch::Approx(std::pow(butterworth_magnitude(0.5, 40, fs, hz), 2)).margin(2e-3));
  }
}

TEST_CASE("DC offset is removed after edge discard") {
  const double fs = 512;
  const auto spec = design_bandpass(0.5, 40, fs);
  const std::vector<double> x(static_cast<std::size_t>(8 * fs), 1.0);
  const auto y = filtfilt(x, spec);
  const std::size_t edge = static_cast<std::size_t>(0.5 * fs);
  double worst = 0;
  for (std::size_t t = edge; t + edge < y.size(); ++t) worst = std::max(worst, std::abs(y[t]));
  CHECK(worst < 0.05);
}

TEST_CASE("filtering twice attenuates the lower band edge further") {
  const double fs = 512;
  const auto spec = design_bandpass(0.5, 40, fs);
  const auto x = tone(0.5, fs, 40);
  const auto once = filtfilt(x, spec);
  const auto twice = filtfilt(once, spec);
  const std::size_t edge = static_cast<std::size_t>(10 * fs);
  const double a1 = oracle::fit_sinusoid(once, 0.5, fs, edge, x.size() - edge).first;
  const double a2 = oracle::fit_sinusoid(twice, 0.5, fs, edge, x.size() - edge).first;
  CHECK(a2 < a1);
  CHECK(a1 < 1.0);
}

TEST_CASE("too-short signals are length errors") {
  const auto spec = design_bandpass(0.5, 40, 512);
  CHECK(spec.pad_length() == 12);
  const std::vector<double> x(12, 1.0);
  try {
    filtfilt(x, spec);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::length);
  }
  CHECK_NOTHROW(filtfilt(std::vector<double>(13, 1.0), spec));
}

TEST_CASE("recording filtering is per-channel and independent of channel order") {
  const double fs = 256;
  Rng rng(4);
  Recording r;
  r.channel_names = {"a", "b", "c"};
  r.sample_rate = 256;
  r.n_samples = 1024;
  r.samples.resize(3 * 1024);
  for (auto& v : r.samples) v = static_cast<float>(rng.normal());
  const auto spec = design_bandpass(0.5, 40, fs);
  const auto y = filtfilt(r, spec);
  Recording swapped = r;
  std::copy(r.channel(0).begin(), r.channel(0).end(), swapped.channel(2).begin());
  std::copy(r.channel(2).begin(), r.channel(2).end(), swapped.channel(0).begin());
  const auto ys = filtfilt(swapped, spec);
  for (std::size_t t = 0; t < 1024; ++t) {
    CHECK(y.channel(0)[t] == ys.channel(2)[t]);
    CHECK(y.channel(1)[t] == ys.channel(1)[t]);
  }
  CHECK_THROWS_AS(filtfilt(r, design_bandpass(0.5, 40, 512)), Error);
}
