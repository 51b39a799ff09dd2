#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "restfuse/error.hpp"
#include "restfuse/layers.hpp"
#include "restfuse/tensor.hpp"

namespace restfuse::nn {

struct LossResult {
  double loss = 0;
  Tensor logit_grad;
};

/// Mean over the batch of -log softmax(logits)[label]; gradient (softmax - onehot) / N.
inline LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2, ErrorKind::shape, "logits must be [N x K], got " + shape_str(logits.shape));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  require(labels.size() == n, ErrorKind::shape, "label count does not match batch size");
  require(n > 0, ErrorKind::validation, "empty batch");
  LossResult r{0.0, Tensor(logits.shape)};
  for (std::size_t b = 0; b < n; ++b) {
    const int y = labels[b];
    require(y >= 0 && static_cast<std::size_t>(y) < k, ErrorKind::validation,
            "label " + std::to_string(y) + " out of range [0, " + std::to_string(k) + ")");
    const double* z = logits.data() + b * k;
    const double zmax = *std::max_element(z, z + k);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
    const double log_norm = zmax + std::log(sum);
    r.loss += log_norm - z[y];
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(z[j] - log_norm);
      r.logit_grad[b * k + j] = (p - (static_cast<int>(j) == y ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  r.loss /= static_cast<double>(n);
  return r;
}

/// Adam with bias correction; one moment pair per parameter tensor.
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

inline void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  require(state.m.size() == params.size(), ErrorKind::shape, "Adam state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->grad.size() == params[i]->size() && state.m[i].size() == params[i]->size(), ErrorKind::shape,
            "Adam: gradient/moment shape mismatch for parameter " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace restfuse::nn
