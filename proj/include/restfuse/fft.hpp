#pragma once

#include <bit>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "restfuse/error.hpp"

namespace restfuse {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

/// In-place iterative radix-2 FFT. Forward is unnormalized; inverse divides by N.
inline void fft_inplace(std::span<cplx> x, bool inverse = false) {
  const std::size_t n = x.size();
  require(is_power_of_two(n), ErrorKind::parameter,
          "FFT length must be a power of two, got " + std::to_string(n));
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  // Twiddles computed directly from the angle, not by repeated multiplication.
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> tw(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = {std::cos(a), std::sin(a)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = x[start + k];
        const cplx v = x[start + k + half] * tw[k * stride];
        x[start + k] = u + v;
        x[start + k + half] = u - v;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= scale;
  }
}

inline std::vector<cplx> fft(std::vector<cplx> x, bool inverse = false) {
  fft_inplace(x, inverse);
  return x;
}

}  // namespace restfuse
