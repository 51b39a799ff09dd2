#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "restfuse/error.hpp"

namespace restfuse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major tensor of up to four dimensions (N x C x H x W), with an
/// optional gradient buffer of the same shape.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty when no gradient is tracked

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(shape_size(shape), fill) {
    require(shape.size() >= 1 && shape.size() <= 4, ErrorKind::shape, "tensor rank must be 1..4, got " + shape_str(shape));
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }

  void enable_grad() { grad.assign(values.size(), 0.0); }
  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void require_shape(const Tensor& t, const Shape& expected, const std::string& where) {
  require(t.shape == expected, ErrorKind::shape,
          where + ": expected shape " + shape_str(expected) + ", got " + shape_str(t.shape));
}

/// Four accumulators in fixed order: faster than a serial chain and still
/// bit-reproducible.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace restfuse
