#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "restfuse/error.hpp"
#include "restfuse/recording.hpp"

namespace restfuse {

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Second-order-section cascade for a band-pass filter.
struct FilterSpec {
  std::vector<Biquad> sections;
  double low_hz = 0;
  double high_hz = 0;
  double sample_rate = 0;

  std::size_t order() const { return 2 * sections.size(); }
  std::size_t pad_length() const { return 3 * order(); }
};

inline std::complex<double> frequency_response(const FilterSpec& spec, double hz) {
  const double w = 2.0 * std::numbers::pi * hz / spec.sample_rate;
  const std::complex<double> z1 = std::polar(1.0, -w);  // z^-1
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : spec.sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

inline double magnitude_response(const FilterSpec& spec, double hz) { return std::abs(frequency_response(spec, hz)); }

inline bool is_stable(const Biquad& s) {
  // Jury conditions for 1 + a1 z^-1 + a2 z^-2
  return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2;
}

/// 4th-order Butterworth band-pass: the 2nd-order analog low-pass prototype
/// is mapped to a band-pass (doubling the order) and discretized with the
/// prewarped bilinear transform. Gain is unity at the geometric band centre.
inline FilterSpec design_bandpass(double low_hz, double high_hz, double sample_rate) {
  require(sample_rate > 0 && low_hz > 0 && low_hz < high_hz && high_hz < sample_rate / 2, ErrorKind::parameter,
          "band-pass needs 0 < low < high < fs/2, got low=" + std::to_string(low_hz) +
              " high=" + std::to_string(high_hz) + " fs=" + std::to_string(sample_rate));
  using C = std::complex<double>;
  const double k = 2.0 * sample_rate;
  const double wl = k * std::tan(std::numbers::pi * low_hz / sample_rate);
  const double wh = k * std::tan(std::numbers::pi * high_hz / sample_rate);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // upper-half-plane prototype pole; its conjugate yields the conjugate pair
  const C proto = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
  const C disc = std::sqrt(proto * proto * bw * bw - 4.0 * w0sq);
  const C analog[2] = {(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0};

  FilterSpec spec;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.sample_rate = sample_rate;
  for (const C& s : analog) {
    const C z = (k + s) / (k - s);
    Biquad q;
    q.b0 = 1.0;
    q.b1 = 0.0;
    q.b2 = -1.0;  // zeros at z = +1 (DC) and z = -1 (Nyquist)
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    spec.sections.push_back(q);
  }

  const double centre_hz = sample_rate / std::numbers::pi * std::atan(std::sqrt(w0sq) / k);
  const double g = std::sqrt(1.0 / magnitude_response(spec, centre_hz));
  for (auto& q : spec.sections) {
    q.b0 *= g;
    q.b2 *= g;
  }
  for (const auto& q : spec.sections) require(is_stable(q), ErrorKind::numerical, "designed filter is unstable");
  return spec;
}

namespace detail {

// Transposed direct form II, in place, starting from state (z1, z2).
inline void biquad_run(const Biquad& s, std::span<double> x, double z1, double z2) {
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

// Runs the cascade with steady-state initial conditions for a constant
// input equal to x[0] (the step response is absorbed, as in scipy's sosfilt_zi).
inline void cascade_run(const FilterSpec& spec, std::span<double> x) {
  double level = x.empty() ? 0.0 : x[0];
  for (const auto& s : spec.sections) {
    const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y_ss = dc_gain * level;
    const double z1 = y_ss - s.b0 * level;
    const double z2 = s.b2 * level - s.a2 * y_ss;
    biquad_run(s, x, z1, z2);
    level = y_ss;
  }
}

}  // namespace detail

/// Zero-phase forward-backward filtering of one channel with odd-reflected
/// padding of `spec.pad_length()` samples at each end.
inline std::vector<double> filtfilt(std::span<const double> x, const FilterSpec& spec) {
  const std::size_t pad = spec.pad_length();
  require(x.size() > pad, ErrorKind::length,
          "signal of " + std::to_string(x.size()) + " samples too short for filtfilt (needs > " +
              std::to_string(pad) + ")");
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  detail::cascade_run(spec, ext);
  std::reverse(ext.begin(), ext.end());
  detail::cascade_run(spec, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Filters every channel of a continuous recording independently.
inline Recording filtfilt(const Recording& rec, const FilterSpec& spec) {
  validate(rec);
  require(std::abs(static_cast<double>(rec.sample_rate) - spec.sample_rate) < 1e-9, ErrorKind::parameter,
          "filter designed for " + std::to_string(spec.sample_rate) + " Hz applied to " +
              std::to_string(rec.sample_rate) + " Hz recording");
  Recording out = rec;
  std::vector<double> buf(rec.n_samples);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto src = rec.channel(c);
    std::copy(src.begin(), src.end(), buf.begin());
    const auto y = filtfilt(buf, spec);
    auto dst = out.channel(c);
    std::transform(y.begin(), y.end(), dst.begin(), [](double v) { return static_cast<float>(v); });
  }
  return out;
}

}  // namespace restfuse
