#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "restfuse/epochs.hpp"
#include "restfuse/error.hpp"
#include "restfuse/fft.hpp"

namespace restfuse {

struct BandSpec {
  std::string name;
  double f_min = 0;
  double f_max = 0;
};

inline std::vector<BandSpec> default_bands() { return {{"theta", 4, 8}, {"alpha", 8, 13}, {"beta", 13, 30}}; }

inline BandSpec band_by_name(const std::string& name) {
  for (auto& b : default_bands())
    if (b.name == name) return b;
  fail(ErrorKind::validation, "unknown band '" + name + "' (expected theta, alpha or beta)");
}

/// Centre frequencies and per-frequency cycle counts for the Morlet family.
struct FreqGrid {
  std::vector<double> freqs;
  std::vector<double> n_cycles;
  std::size_t size() const { return freqs.size(); }
};

/// Inclusive linear grid from f_min to f_max at `samples_per_hz` points per
/// Hz, with n_cycles = f / 2.
inline FreqGrid band_freq_grid(const BandSpec& band, double samples_per_hz = 4.0) {
  require(band.f_min > 0 && band.f_min < band.f_max, ErrorKind::parameter, "band '" + band.name + "' needs 0 < f_min < f_max");
  require(samples_per_hz > 0, ErrorKind::parameter, "samples per Hz must be positive");
  const double span = (band.f_max - band.f_min) * samples_per_hz;
  const auto steps = static_cast<std::size_t>(std::llround(span));
  FreqGrid g;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double f = band.f_min + static_cast<double>(i) / samples_per_hz;
    g.freqs.push_back(f);
    g.n_cycles.push_back(f / 2.0);
  }
  return g;
}

/// Temporal width of the Gaussian envelope. With n_cycles = f/2 this is
/// 1/(4*pi) s at every frequency: the grid has constant time resolution.
inline double morlet_sigma_t(double hz, double n_cycles) { return n_cycles / (2.0 * std::numbers::pi * hz); }

/// Complex Morlet wavelet sampled on [-5 sigma_t, +5 sigma_t], unit L2 norm.
inline std::vector<cplx> morlet_kernel(double hz, double n_cycles, double sample_rate) {
  require(hz > 0 && n_cycles > 0 && sample_rate > 0, ErrorKind::parameter, "Morlet kernel needs f, n_cycles, fs > 0");
  const double sigma = morlet_sigma_t(hz, n_cycles);
  const auto half = static_cast<std::ptrdiff_t>(std::floor(5.0 * sigma * sample_rate));
  std::vector<cplx> w;
  w.reserve(static_cast<std::size_t>(2 * half + 1));
  double energy = 0.0;
  for (std::ptrdiff_t k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    const double env = std::exp(-t * t / (2.0 * sigma * sigma));
    const double ph = 2.0 * std::numbers::pi * hz * t;
    w.emplace_back(env * std::cos(ph), env * std::sin(ph));
    energy += env * env;
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& v : w) v *= scale;
  return w;
}

/// Wavelet coefficients [epoch][channel][freq][time].
struct Tfr {
  std::size_t n_epochs = 0, n_channels = 0, n_freqs = 0, n_times = 0;
  std::vector<cplx> data;

  std::size_t index(std::size_t e, std::size_t c, std::size_t f, std::size_t t) const {
    return ((e * n_channels + c) * n_freqs + f) * n_times + t;
  }
  const cplx& at(std::size_t e, std::size_t c, std::size_t f, std::size_t t) const { return data[index(e, c, f, t)]; }
  const cplx* row(std::size_t e, std::size_t c, std::size_t f) const { return data.data() + index(e, c, f, 0); }
  cplx* row(std::size_t e, std::size_t c, std::size_t f) { return data.data() + index(e, c, f, 0); }
};

/// FFT-based centred convolution of every epoch/channel with each wavelet in
/// the grid; zero padding to the next power of two >= n_times + len - 1.
inline Tfr cwt(const EpochSet& epochs, const FreqGrid& grid) {
  require(grid.freqs.size() == grid.n_cycles.size(), ErrorKind::validation, "grid frequency/cycle count mismatch");
  const std::size_t n = epochs.n_times;
  Tfr out{epochs.size(), epochs.n_channels, grid.size(), n, {}};
  out.data.assign(out.n_epochs * out.n_channels * out.n_freqs * n, cplx{});

  struct Wavelet {
    std::size_t nfft, half;
    std::vector<cplx> spectrum;
  };
  std::vector<Wavelet> wavelets;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    auto k = morlet_kernel(grid.freqs[f], grid.n_cycles[f], epochs.sample_rate);
    require(k.size() <= n, ErrorKind::parameter,
            "Morlet kernel at " + std::to_string(grid.freqs[f]) + " Hz spans " + std::to_string(k.size()) +
                " samples, longer than the " + std::to_string(n) + "-sample epoch");
    Wavelet w{next_power_of_two(n + k.size() - 1), k.size() / 2, {}};
    w.spectrum.assign(w.nfft, cplx{});
    std::copy(k.begin(), k.end(), w.spectrum.begin());
    fft_inplace(w.spectrum);
    wavelets.push_back(std::move(w));
  }

  std::map<std::size_t, std::vector<cplx>> signal_spectra;
  std::vector<cplx> buf;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    for (std::size_t c = 0; c < epochs.n_channels; ++c) {
      signal_spectra.clear();
      const auto x = epochs.row(e, c);
      for (std::size_t f = 0; f < grid.size(); ++f) {
        const auto& w = wavelets[f];
        auto [it, fresh] = signal_spectra.try_emplace(w.nfft);
        if (fresh) {
          it->second.assign(w.nfft, cplx{});
          for (std::size_t t = 0; t < n; ++t) it->second[t] = x[t];
          fft_inplace(it->second);
        }
        buf.resize(w.nfft);
        for (std::size_t i = 0; i < w.nfft; ++i) buf[i] = it->second[i] * w.spectrum[i];
        fft_inplace(buf, true);
        cplx* dst = out.row(e, c, f);
        for (std::size_t t = 0; t < n; ++t) dst[t] = buf[t + w.half];
      }
    }
  }
  return out;
}

}  // namespace restfuse
