#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "restfuse/layers.hpp"
#include "restfuse/optim.hpp"

using namespace restfuse;
using namespace restfuse::nn;

namespace {

constexpr double tolerance = 1e-4;
constexpr std::size_t coords = 32;

// Checks parameter and input gradients of `layer` against central differences
// of L = sum(forward(x) * R).
void check_gradients(Layer& layer, const Shape& in_shape, std::uint64_t seed) {
  Rng rng(seed, "gradcheck");
  Rng init = rng.fork("init");
  layer.initialize(init);
  Tensor x = oracle::random_tensor(in_shape, rng);
  const Rng forward_rng(seed, "forward");
  const auto run = [&] {
    Rng r = forward_rng;
    return layer.forward(x, Mode::train, r);
  };
  const Tensor y = run();
  const Tensor weights = oracle::random_tensor(y.shape, rng);
  for (auto& p : layer.parameters()) p.tensor->zero_grad();
  const Tensor gx = layer.backward(weights);
  const auto loss = [&] { return oracle::weighted_sum(run(), weights); };

  for (auto& p : layer.parameters()) {
    const std::vector<double> analytic = p.tensor->grad;
    const double err = oracle::max_relative_error(*p.tensor, analytic, loss, coords, rng);
    INFO(p.name);
    CHECK(err < tolerance);
  }
  if (layer.input_grad_required) {
    const double err = oracle::max_relative_error(x, gx.values, loss, coords, rng);
    INFO(layer.name() << " input");
    CHECK(err < tolerance);
  }
}

// y[n,o,h,w] = b[o] + sum over the group's inputs and kernel taps, with
// "same" padding (left (kw-1)/2) along w.
Tensor naive_conv(const Tensor& x, Conv2d& conv) {
  const auto& s = conv.spec();
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t hout = h - s.kernel_h + 1, cin_g = s.in_channels / s.groups, cout_g = s.out_channels / s.groups;
  const long padl = static_cast<long>((s.kernel_w - 1) / 2);
  Tensor y({n, s.out_channels, hout, w});
  const auto& W = conv.weight();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t oh = 0; oh < hout; ++oh)
        for (std::size_t ow = 0; ow < w; ++ow) {
          double acc = s.bias ? conv.bias()[o] : 0.0;
          for (std::size_t i = 0; i < cin_g; ++i)
            for (std::size_t kh = 0; kh < s.kernel_h; ++kh)
              for (std::size_t kw = 0; kw < s.kernel_w; ++kw) {
                const long src = static_cast<long>(ow) + static_cast<long>(kw) - padl;
                if (src < 0 || src >= static_cast<long>(w)) continue;
                const std::size_t ic = (o / cout_g) * cin_g + i;
                acc += W[((o * cin_g + i) * s.kernel_h + kh) * s.kernel_w + kw] *
                       x[((b * s.in_channels + ic) * h + oh + kh) * w + static_cast<std::size_t>(src)];
              }
          y[((b * s.out_channels + o) * hout + oh) * w + ow] = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("convolution forward matches explicit loops") {
  Rng rng(51);
  for (auto spec : {ConvSpec{1, 4, 1, 7, 1, false, 0}, ConvSpec{4, 8, 3, 1, 4, false, 0}, ConvSpec{6, 4, 2, 4, 2, true, 0},
                    ConvSpec{3, 5, 1, 1, 1, false, 0}}) {
    Conv2d conv("c", spec);
    conv.initialize(rng);
    const Tensor x = oracle::random_tensor({2, spec.in_channels, 4, 11}, rng);
    Rng r(0);
    const Tensor y = conv.forward(x, Mode::eval, r);
    const Tensor ref = naive_conv(x, conv);
    REQUIRE(y.shape == ref.shape);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("gradient checks: convolutions") {
  Conv2d temporal("temporal", {1, 4, 1, 8, 1, false, 0});
  check_gradients(temporal, {3, 1, 2, 20}, 1);
  Conv2d grouped("grouped", {4, 6, 2, 3, 2, true, 0});
  check_gradients(grouped, {2, 4, 3, 9}, 2);
  auto depth = Conv2d::depthwise("spatial", 3, 2, 4, 1, 1.0);
  check_gradients(depth, {3, 3, 4, 10}, 3);
  auto point = Conv2d::pointwise("point", 5, 3);
  check_gradients(point, {2, 5, 1, 7}, 4);
}

TEST_CASE("gradient checks: batch norm, ELU, pooling, dropout, flatten, linear") {
  BatchNorm bn4("bn4", 3);
  check_gradients(bn4, {4, 3, 2, 5}, 5);
  BatchNorm bn2("bn2", 4);
  check_gradients(bn2, {6, 4}, 6);
  Elu elu("elu");
  check_gradients(elu, {2, 3, 2, 6}, 7);
  AvgPool pool("pool", 4);
  check_gradients(pool, {2, 2, 1, 18}, 8);
  Dropout drop("drop", 0.25);
  check_gradients(drop, {2, 3, 1, 8}, 9);
  Flatten flat("flat");
  check_gradients(flat, {2, 3, 1, 4}, 10);
  Linear lin("lin", 7, 3);
  check_gradients(lin, {5, 7}, 11);
}

TEST_CASE("gradient check: concatenation") {
  Rng rng(12);
  Concat cat;
  Tensor a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({3, 2}, rng);
  const Tensor y = cat.forward(a, b);
  CHECK(y.shape == Shape{3, 6});
  CHECK(y[0 * 6 + 4] == b[0]);
  const Tensor w = oracle::random_tensor(y.shape, rng);
  const auto [ga, gb] = cat.backward(w);
  const auto loss = [&] {
    Concat c;
    return oracle::weighted_sum(c.forward(a, b), w);
  };
  CHECK(oracle::max_relative_error(a, ga.values, loss, coords, rng) < tolerance);
  CHECK(oracle::max_relative_error(b, gb.values, loss, coords, rng) < tolerance);
}

TEST_CASE("gradient check: softmax cross-entropy") {
  Rng rng(13);
  Tensor z = oracle::random_tensor({6, 3}, rng, 2.0);
  const std::vector<int> labels{0, 2, 1, 1, 0, 2};
  const auto r = softmax_cross_entropy(z, labels);
  const auto loss = [&] { return softmax_cross_entropy(z, labels).loss; };
  CHECK(oracle::max_relative_error(z, r.logit_grad.values, loss, 18, rng) < tolerance);
  // uniform logits give log(K)
  CHECK(softmax_cross_entropy(Tensor({2, 4}), std::vector<int>{1, 3}).loss == Catch::Approx(std::log(4.0)));
  CHECK_THROWS_AS(softmax_cross_entropy(z, std::vector<int>{0, 1}), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(z, std::vector<int>{0, 1, 2, 3, 0, 1}), Error);
}

TEST_CASE("batch norm normalizes in training and uses running statistics in eval") {
  Rng rng(14);
  BatchNorm bn("bn", 2);
  Tensor x = oracle::random_tensor({8, 2, 1, 16}, rng, 10.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 3.0;
  const Tensor y = bn.forward(x, Mode::train, rng);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t t = 0; t < 16; ++t) m += y[((n * 2 + c) * 1) * 16 + t];
    m /= 128;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t t = 0; t < 16; ++t) v += std::pow(y[(n * 2 + c) * 16 + t] - m, 2);
    v /= 128;
    CHECK(std::abs(m) < 1e-12);
    CHECK(v == Catch::Approx(1.0).margin(1e-6));
  }
  // running stats moved 10% of the way from (0, 1) to the batch statistics
  double mean0 = 0;
  for (std::size_t n = 0; n < 8; ++n)
    for (std::size_t t = 0; t < 16; ++t) mean0 += x[(n * 2) * 16 + t];
  mean0 /= 128;
  CHECK(bn.running_mean()[0] == Catch::Approx(0.1 * mean0).epsilon(1e-12));
  double ss = 0;
  for (std::size_t n = 0; n < 8; ++n)
    for (std::size_t t = 0; t < 16; ++t) ss += std::pow(x[(n * 2) * 16 + t] - mean0, 2);
  CHECK(bn.running_var()[0] == Catch::Approx(0.9 + 0.1 * ss / 127).epsilon(1e-12));

  const Tensor e = bn.forward(x, Mode::eval, rng);
  const double expect = (x[0] - bn.running_mean()[0]) / std::sqrt(bn.running_var()[0] + 1e-5);
  CHECK(e[0] == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("dropout is identity in eval and scales kept units in training") {
  Rng rng(15);
  Dropout d("d", 0.25);
  const Tensor x = oracle::random_tensor({1, 1, 1, 40000}, rng);
  CHECK(d.forward(x, Mode::eval, rng).values == x.values);
  const Tensor y = d.forward(x, Mode::train, rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] != 0.0) {
      ++kept;
      CHECK(y[i] == Catch::Approx(x[i] / 0.75));
    }
  }
  CHECK(static_cast<double>(kept) / x.size() == Catch::Approx(0.75).margin(0.01));
}

TEST_CASE("pooling floors the width and averages") {
  AvgPool p("p", 4);
  Tensor x({1, 1, 1, 10});
  for (std::size_t i = 0; i < 10; ++i) x[i] = static_cast<double>(i);
  Rng r(0);
  const Tensor y = p.forward(x, Mode::eval, r);
  CHECK(y.shape == Shape{1, 1, 1, 2});
  CHECK(y[0] == 1.5);
  CHECK(y[1] == 5.5);
}

TEST_CASE("ELU values") {
  Elu e("e");
  Tensor x({1, 3});
  x[0] = -1.0;
  x[1] = 0.0;
  x[2] = 2.0;
  Rng r(0);
  const Tensor y = e.forward(x, Mode::eval, r);
  CHECK(y[0] == Catch::Approx(std::exp(-1.0) - 1.0));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
}

TEST_CASE("max-norm rescales oversized slices only") {
  Tensor w({2, 2});
  w[0] = 3;
  w[1] = 4;
  w[2] = 0.3;
  w[3] = 0.4;
  apply_max_norm(w, 1.0);
  CHECK(w[0] == Catch::Approx(0.6));
  CHECK(w[1] == Catch::Approx(0.8));
  CHECK(w[2] == 0.3);
  CHECK(w[3] == 0.4);
}

TEST_CASE("backward without a training forward is a state error") {
  Linear l("l", 3, 2);
  Rng r(0);
  try {
    l.backward(Tensor({1, 2}));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::state);
  }
  l.forward(Tensor({1, 3}), Mode::eval, r);
  CHECK_THROWS_AS(l.backward(Tensor({1, 2})), Error);
}

TEST_CASE("shape mismatches are shape errors") {
  Conv2d c("c", {2, 2, 3, 1, 1, false, 0});
  Rng r(0);
  CHECK_THROWS_AS(c.forward(Tensor({1, 1, 4, 4}), Mode::eval, r), Error);
  CHECK_THROWS_AS(c.forward(Tensor({1, 2, 2, 4}), Mode::eval, r), Error);
  Linear l("l", 3, 2);
  CHECK_THROWS_AS(l.forward(Tensor({1, 4}), Mode::eval, r), Error);
}

TEST_CASE("Adam matches the reference update") {
  Tensor p({2});
  p[0] = 1.0;
  p[1] = -2.0;
  p.enable_grad();
  AdamState st;
  st.lr = 0.1;
  double m0 = 0, v0 = 0, x0 = 1.0;
  std::vector<Tensor*> params{&p};
  for (int t = 1; t <= 5; ++t) {
    p.grad[0] = 2 * p[0];  // d/dx x^2
    p.grad[1] = 0.0;
    const double g = 2 * x0;
    m0 = 0.9 * m0 + 0.1 * g;
    v0 = 0.999 * v0 + 0.001 * g * g;
    const double mh = m0 / (1 - std::pow(0.9, t)), vh = v0 / (1 - std::pow(0.999, t));
    x0 -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    adam_step(params, st);
    CHECK(p[0] == Catch::Approx(x0).epsilon(1e-14));
    CHECK(p[1] == -2.0);
  }
  CHECK(st.step == 5);
}
