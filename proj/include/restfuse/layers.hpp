#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "restfuse/error.hpp"
#include "restfuse/rng.hpp"
#include "restfuse/tensor.hpp"

namespace restfuse::nn {

enum class Mode { train, eval };

enum class LayerKind {
  conv2d,
  depthwise_conv2d,
  pointwise_conv2d,
  batchnorm,
  elu,
  avgpool,
  dropout,
  flatten,
  linear,
  concat,
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise_conv2d: return "depthwise_conv2d";
    case LayerKind::pointwise_conv2d: return "pointwise_conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::elu: return "elu";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::linear: return "linear";
    case LayerKind::concat: return "concat";
  }
  return "?";
}

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Rescales every slice along dim 0 whose L2 norm exceeds `bound` to norm == bound.
inline void apply_max_norm(Tensor& param, double bound) {
  require(bound > 0, ErrorKind::parameter, "max-norm bound must be positive");
  const std::size_t slices = param.dim(0);
  const std::size_t len = param.size() / slices;
  for (std::size_t s = 0; s < slices; ++s) {
    double* p = param.data() + s * len;
    const double norm = std::sqrt(dot(p, p, len));
    if (norm > bound) {
      const double scale = bound / norm;
      for (std::size_t i = 0; i < len; ++i) p[i] *= scale;
    }
  }
}

inline void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.values) v = rng.uniform(-bound, bound);
}

/// One differentiable layer. `forward` in train mode caches what `backward`
/// needs; `backward` accumulates parameter gradients and returns the input
/// gradient (empty when `input_grad_required` is false).
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = default;
  Layer& operator=(const Layer&) = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& in, Mode mode, Rng& rng) = 0;
  virtual Tensor backward(const Tensor& upstream) = 0;
  virtual std::vector<NamedTensor> parameters() { return {}; }
  virtual std::vector<NamedTensor> buffers() { return {}; }
  virtual void apply_constraints() {}
  virtual void initialize(Rng&) {}

  const std::string& name() const { return name_; }
  bool input_grad_required = true;

 protected:
  void require_cached(bool cached) const {
    require(cached, ErrorKind::state, "backward on layer '" + name_ + "' without a cached train-mode forward");
  }
  std::string name_;
};

// ---------------------------------------------------------------------------

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t groups = 1;
  bool bias = false;
  double max_norm = 0.0;  // 0 = unconstrained
};

/// Grouped 2-D convolution (cross-correlation), "valid" along H and "same"
/// along W (left pad (kw-1)/2). Depthwise and pointwise variants are the
/// groups == in_channels and 1x1 special cases.
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, ConvSpec spec, LayerKind kind = LayerKind::conv2d)
      : Layer(std::move(name)), spec_(spec), kind_(kind) {
    require(spec.in_channels > 0 && spec.out_channels > 0 && spec.kernel_h > 0 && spec.kernel_w > 0 && spec.groups > 0,
            ErrorKind::parameter, name_ + ": conv sizes must be positive");
    require(spec.in_channels % spec.groups == 0 && spec.out_channels % spec.groups == 0, ErrorKind::parameter,
            name_ + ": channel counts must be divisible by groups");
    weight_ = Tensor({spec.out_channels, spec.in_channels / spec.groups, spec.kernel_h, spec.kernel_w});
    weight_.enable_grad();
    if (spec.bias) {
      bias_ = Tensor({spec.out_channels});
      bias_.enable_grad();
    }
  }

  static Conv2d depthwise(std::string name, std::size_t channels, std::size_t multiplier, std::size_t kh,
                          std::size_t kw, double max_norm = 0.0) {
    return Conv2d(std::move(name), {channels, channels * multiplier, kh, kw, channels, false, max_norm},
                  LayerKind::depthwise_conv2d);
  }

  static Conv2d pointwise(std::string name, std::size_t in, std::size_t out) {
    return Conv2d(std::move(name), {in, out, 1, 1, 1, false, 0.0}, LayerKind::pointwise_conv2d);
  }

  LayerKind kind() const override { return kind_; }
  const ConvSpec& spec() const { return spec_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4 && in[1] == spec_.in_channels && in[2] >= spec_.kernel_h, ErrorKind::shape,
            name_ + ": input " + shape_str(in) + " incompatible with kernel [" + std::to_string(spec_.in_channels) +
                " ch, " + std::to_string(spec_.kernel_h) + "x" + std::to_string(spec_.kernel_w) + "]");
    return {in[0], spec_.out_channels, in[2] - spec_.kernel_h + 1, in[3]};
  }

  void initialize(Rng& rng) override {
    const double fan_in = static_cast<double>(weight_.size() / spec_.out_channels);
    const double bound = 1.0 / std::sqrt(fan_in);
    init_uniform(weight_, bound, rng);
    if (spec_.bias) init_uniform(bias_, bound, rng);
    apply_constraints();
  }

  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    Tensor y(output_shape(x.shape));
    const Geometry g = geometry(x.shape);
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t o = 0; o < g.cout; ++o) {
        const std::size_t group = o / g.cout_pg;
        for (std::size_t ii = 0; ii < g.cin_pg; ++ii) {
          const std::size_t ic = group * g.cin_pg + ii;
          for (std::size_t oh = 0; oh < g.hout; ++oh) {
            double* yrow = y.data() + ((n * g.cout + o) * g.hout + oh) * g.w;
            for (std::size_t kh = 0; kh < spec_.kernel_h; ++kh) {
              const double* xrow = x.data() + ((n * g.cin + ic) * g.h + oh + kh) * g.w;
              const double* wrow = weight_.data() + ((o * g.cin_pg + ii) * spec_.kernel_h + kh) * spec_.kernel_w;
              for (std::size_t kw = 0; kw < spec_.kernel_w; ++kw) {
                const auto [lo, hi, shift] = span_for(kw, g.w);
                if (hi > lo) axpy(wrow[kw], xrow + lo + shift, yrow + lo, static_cast<std::size_t>(hi - lo));
              }
            }
          }
        }
        if (spec_.bias) {
          double* yplane = y.data() + (n * g.cout + o) * g.hout * g.w;
          for (std::size_t i = 0; i < g.hout * g.w; ++i) yplane[i] += bias_[o];
        }
      }
    }
    if (mode == Mode::train) {
      input_ = x;
      cached_ = true;
    } else {
      cached_ = false;
    }
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    const Geometry g = geometry(input_.shape);
    require_shape(up, {g.n, g.cout, g.hout, g.w}, name_ + " backward");
    Tensor gx;
    if (input_grad_required) gx = Tensor(input_.shape);
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t o = 0; o < g.cout; ++o) {
        const std::size_t group = o / g.cout_pg;
        for (std::size_t ii = 0; ii < g.cin_pg; ++ii) {
          const std::size_t ic = group * g.cin_pg + ii;
          for (std::size_t oh = 0; oh < g.hout; ++oh) {
            const double* grow = up.data() + ((n * g.cout + o) * g.hout + oh) * g.w;
            for (std::size_t kh = 0; kh < spec_.kernel_h; ++kh) {
              const std::size_t xoff = ((n * g.cin + ic) * g.h + oh + kh) * g.w;
              const double* xrow = input_.data() + xoff;
              const std::size_t woff = ((o * g.cin_pg + ii) * spec_.kernel_h + kh) * spec_.kernel_w;
              for (std::size_t kw = 0; kw < spec_.kernel_w; ++kw) {
                const auto [lo, hi, shift] = span_for(kw, g.w);
                if (hi <= lo) continue;
                const auto len = static_cast<std::size_t>(hi - lo);
                weight_.grad[woff + kw] += dot(grow + lo, xrow + lo + shift, len);
                if (input_grad_required) axpy(weight_[woff + kw], grow + lo, gx.data() + xoff + lo + shift, len);
              }
            }
          }
        }
        if (spec_.bias) {
          const double* gplane = up.data() + (n * g.cout + o) * g.hout * g.w;
          double s = 0;
          for (std::size_t i = 0; i < g.hout * g.w; ++i) s += gplane[i];
          bias_.grad[o] += s;
        }
      }
    }
    return gx;
  }

  std::vector<NamedTensor> parameters() override {
    std::vector<NamedTensor> p{{name_ + ".weight", &weight_}};
    if (spec_.bias) p.push_back({name_ + ".bias", &bias_});
    return p;
  }

  void apply_constraints() override {
    if (spec_.max_norm > 0) apply_max_norm(weight_, spec_.max_norm);
  }

 private:
  struct Geometry {
    std::size_t n, cin, h, w, cout, hout, cin_pg, cout_pg;
  };
  Geometry geometry(const Shape& in) const {
    const Shape out = output_shape(in);
    return {in[0], in[1], in[2], in[3], out[1], out[2], spec_.in_channels / spec_.groups,
            spec_.out_channels / spec_.groups};
  }
  // Output columns [lo, hi) that read input column (col + shift) for tap kw.
  struct Span {
    std::ptrdiff_t lo, hi, shift;
  };
  Span span_for(std::size_t kw, std::size_t width) const {
    const auto pad = static_cast<std::ptrdiff_t>((spec_.kernel_w - 1) / 2);
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kw) - pad;
    const auto w = static_cast<std::ptrdiff_t>(width);
    return {std::max<std::ptrdiff_t>(0, -shift), std::min<std::ptrdiff_t>(w, w - shift), shift};
  }

  ConvSpec spec_;
  LayerKind kind_;
  Tensor weight_, bias_;
  Tensor input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

/// Per-channel normalization over (N, H, W) for rank-4 input or over N for
/// rank-2 input. Running statistics are used in eval mode.
class BatchNorm final : public Layer {
 public:
  BatchNorm(std::string name, std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : Layer(std::move(name)), channels_(channels), eps_(eps), momentum_(momentum) {
    gamma_ = Tensor({channels}, 1.0);
    beta_ = Tensor({channels}, 0.0);
    gamma_.enable_grad();
    beta_.enable_grad();
    running_mean_ = Tensor({channels}, 0.0);
    running_var_ = Tensor({channels}, 1.0);
  }

  LayerKind kind() const override { return LayerKind::batchnorm; }
  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }

  Shape output_shape(const Shape& in) const override {
    require((in.size() == 4 || in.size() == 2) && in[1] == channels_, ErrorKind::shape,
            name_ + ": input " + shape_str(in) + " does not have " + std::to_string(channels_) + " channels");
    return in;
  }

  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    output_shape(x.shape);
    const std::size_t n = x.dim(0);
    const std::size_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    const std::size_t count = n * inner;
    Tensor y(x.shape);
    if (mode == Mode::eval) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const double inv = 1.0 / std::sqrt(running_var_[c] + eps_);
        for (std::size_t b = 0; b < n; ++b) {
          const std::size_t off = (b * channels_ + c) * inner;
          for (std::size_t i = 0; i < inner; ++i)
            y[off + i] = gamma_[c] * (x[off + i] - running_mean_[c]) * inv + beta_[c];
        }
      }
      cached_ = false;
      return y;
    }
    xhat_ = Tensor(x.shape);
    inv_std_.assign(channels_, 0.0);
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean += x[off + i];
      }
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) var += (x[off + i] - mean) * (x[off + i] - mean);
      }
      var /= static_cast<double>(count);
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = inv;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double h = (x[off + i] - mean) * inv;
          xhat_[off + i] = h;
          y[off + i] = gamma_[c] * h + beta_[c];
        }
      }
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
    }
    cached_ = true;
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    require_shape(up, xhat_.shape, name_ + " backward");
    const std::size_t n = up.dim(0);
    const std::size_t inner = up.rank() == 4 ? up.dim(2) * up.dim(3) : 1;
    const double m = static_cast<double>(n * inner);
    Tensor gx(up.shape);
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum_g += up[off + i];
          sum_gh += up[off + i] * xhat_[off + i];
        }
      }
      gamma_.grad[c] += sum_gh;
      beta_.grad[c] += sum_g;
      if (!input_grad_required) continue;
      const double k = gamma_[c] * inv_std_[c] / m;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) gx[off + i] = k * (m * up[off + i] - sum_g - xhat_[off + i] * sum_gh);
      }
    }
    return input_grad_required ? gx : Tensor{};
  }

  std::vector<NamedTensor> parameters() override { return {{name_ + ".gamma", &gamma_}, {name_ + ".beta", &beta_}}; }
  std::vector<NamedTensor> buffers() override {
    return {{name_ + ".running_mean", &running_mean_}, {name_ + ".running_var", &running_var_}};
  }

 private:
  std::size_t channels_;
  double eps_, momentum_;
  Tensor gamma_, beta_, running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> inv_std_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

/// ELU with alpha = 1.
class Elu final : public Layer {
 public:
  using Layer::Layer;
  LayerKind kind() const override { return LayerKind::elu; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : std::expm1(x[i]);
    if (mode == Mode::train) {
      output_ = y;
      input_ = x;
    }
    cached_ = mode == Mode::train;
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    require_shape(up, output_.shape, name_ + " backward");
    Tensor gx(up.shape);
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] = up[i] * (input_[i] > 0 ? 1.0 : output_[i] + 1.0);
    return gx;
  }

 private:
  Tensor input_, output_;
  bool cached_ = false;
};

/// Average pooling of width `width` along the last (time) axis; trailing
/// samples that do not fill a window are dropped.
class AvgPool final : public Layer {
 public:
  AvgPool(std::string name, std::size_t width) : Layer(std::move(name)), width_(width) {
    require(width > 0, ErrorKind::parameter, name_ + ": pool width must be positive");
  }
  LayerKind kind() const override { return LayerKind::avgpool; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4 && in[3] >= width_, ErrorKind::shape,
            name_ + ": input " + shape_str(in) + " too short for pool width " + std::to_string(width_));
    return {in[0], in[1], in[2], in[3] / width_};
  }

  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    const Shape os = output_shape(x.shape);
    Tensor y(os);
    const std::size_t rows = os[0] * os[1] * os[2];
    const std::size_t wi = x.dim(3), wo = os[3];
    const double inv = 1.0 / static_cast<double>(width_);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < wo; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < width_; ++k) s += x[r * wi + j * width_ + k];
        y[r * wo + j] = s * inv;
      }
    }
    if (mode == Mode::train) in_shape_ = x.shape;
    cached_ = mode == Mode::train;
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    require_shape(up, output_shape(in_shape_), name_ + " backward");
    Tensor gx(in_shape_);
    const std::size_t rows = up.dim(0) * up.dim(1) * up.dim(2);
    const std::size_t wi = in_shape_[3], wo = up.dim(3);
    const double inv = 1.0 / static_cast<double>(width_);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < wo; ++j)
        for (std::size_t k = 0; k < width_; ++k) gx[r * wi + j * width_ + k] = up[r * wo + j] * inv;
    return gx;
  }

 private:
  std::size_t width_;
  Shape in_shape_;
  bool cached_ = false;
};

/// Inverted dropout: kept units are scaled by 1/(1-p) in train mode; eval
/// mode is the identity.
class Dropout final : public Layer {
 public:
  Dropout(std::string name, double p) : Layer(std::move(name)), p_(p) {
    require(p >= 0.0 && p < 1.0, ErrorKind::parameter, name_ + ": dropout probability must be in [0, 1)");
  }
  LayerKind kind() const override { return LayerKind::dropout; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override {
    cached_ = true;
    if (mode == Mode::eval || p_ == 0.0) {
      identity_ = true;
      shape_ = x.shape;
      return x;
    }
    identity_ = false;
    const double keep = 1.0 - p_;
    mask_.assign(x.size(), 0.0);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      y[i] = x[i] * mask_[i];
    }
    shape_ = x.shape;
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    require_shape(up, shape_, name_ + " backward");
    if (identity_) return up;
    Tensor gx(up.shape);
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] = up[i] * mask_[i];
    return gx;
  }

 private:
  double p_;
  std::vector<double> mask_;
  Shape shape_;
  bool identity_ = true;
  bool cached_ = false;
};

class Flatten final : public Layer {
 public:
  using Layer::Layer;
  LayerKind kind() const override { return LayerKind::flatten; }
  Shape output_shape(const Shape& in) const override {
    require(!in.empty(), ErrorKind::shape, name_ + ": empty shape");
    return {in[0], shape_size(in) / in[0]};
  }
  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    Tensor y = x;
    y.shape = output_shape(x.shape);
    y.grad.clear();
    if (mode == Mode::train) in_shape_ = x.shape;
    cached_ = mode == Mode::train;
    return y;
  }
  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    Tensor gx = up;
    gx.shape = in_shape_;
    require(shape_size(in_shape_) == up.size(), ErrorKind::shape, name_ + ": backward size mismatch");
    return gx;
  }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

/// y = W x + b with W stored [out x in]. Optional max-norm applies per output row.
class Linear final : public Layer {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, double max_norm = 0.0)
      : Layer(std::move(name)), in_(in), out_(out), max_norm_(max_norm) {
    require(out > 0, ErrorKind::parameter, name_ + ": output width must be positive");
    weight_ = Tensor({out, in});
    weight_.enable_grad();
    bias_ = Tensor({out});
    bias_.enable_grad();
  }

  LayerKind kind() const override { return LayerKind::linear; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 2 && in[1] == in_, ErrorKind::shape,
            name_ + ": input " + shape_str(in) + " incompatible with linear [" + std::to_string(in_) + " -> " +
                std::to_string(out_) + "]");
    return {in[0], out_};
  }

  void initialize(Rng& rng) override {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in_, 1)));
    init_uniform(weight_, bound, rng);
    init_uniform(bias_, bound, rng);
    apply_constraints();
  }

  Tensor forward(const Tensor& x, Mode mode, Rng&) override {
    Tensor y(output_shape(x.shape));
    const std::size_t n = x.dim(0);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_; ++o)
        y[b * out_ + o] = bias_[o] + dot(weight_.data() + o * in_, x.data() + b * in_, in_);
    if (mode == Mode::train) input_ = x;
    cached_ = mode == Mode::train;
    return y;
  }

  Tensor backward(const Tensor& up) override {
    require_cached(cached_);
    const std::size_t n = input_.dim(0);
    require_shape(up, {n, out_}, name_ + " backward");
    Tensor gx;
    if (input_grad_required) gx = Tensor({n, in_});
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t o = 0; o < out_; ++o) {
        const double g = up[b * out_ + o];
        bias_.grad[o] += g;
        axpy(g, input_.data() + b * in_, weight_.grad.data() + o * in_, in_);
        if (input_grad_required) axpy(g, weight_.data() + o * in_, gx.data() + b * in_, in_);
      }
    }
    return gx;
  }

  std::vector<NamedTensor> parameters() override { return {{name_ + ".weight", &weight_}, {name_ + ".bias", &bias_}}; }

  void apply_constraints() override {
    if (max_norm_ > 0) apply_max_norm(weight_, max_norm_);
  }

 private:
  std::size_t in_, out_;
  double max_norm_;
  Tensor weight_, bias_, input_;
  bool cached_ = false;
};

/// Joins [N x A] and [N x B] into [N x (A + B)]. Two inputs, so it sits
/// outside the single-input Layer interface.
class Concat {
 public:
  static constexpr LayerKind kind() { return LayerKind::concat; }

  Tensor forward(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), ErrorKind::shape,
            "concat: incompatible shapes " + shape_str(a.shape) + " and " + shape_str(b.shape));
    const std::size_t n = a.dim(0), wa = a.dim(1), wb = b.dim(1);
    Tensor y({n, wa + wb});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(a.data() + i * wa, wa, y.data() + i * (wa + wb));
      std::copy_n(b.data() + i * wb, wb, y.data() + i * (wa + wb) + wa);
    }
    wa_ = wa;
    wb_ = wb;
    cached_ = true;
    return y;
  }

  std::pair<Tensor, Tensor> backward(const Tensor& up) const {
    require(cached_, ErrorKind::state, "concat backward without forward");
    const std::size_t n = up.dim(0);
    require_shape(up, {n, wa_ + wb_}, "concat backward");
    Tensor ga({n, wa_}), gb({n, wb_});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(up.data() + i * (wa_ + wb_), wa_, ga.data() + i * wa_);
      std::copy_n(up.data() + i * (wa_ + wb_) + wa_, wb_, gb.data() + i * wb_);
    }
    return {std::move(ga), std::move(gb)};
  }

 private:
  std::size_t wa_ = 0, wb_ = 0;
  bool cached_ = false;
};

}  // namespace restfuse::nn
