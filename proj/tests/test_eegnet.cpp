#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "restfuse/checkpoint.hpp"
#include "restfuse/connectivity.hpp"
#include "restfuse/eegnet.hpp"
#include "restfuse/optim.hpp"

using namespace restfuse;

namespace {

EegnetConfig tiny_config(FusionMode mode, HeadKind head) {
  EegnetConfig c = default_eegnet_config(3, 64, 32);
  c.f1 = 2;
  c.depth = 2;
  c.f2 = 4;
  c.separable_kernel = 4;
  c.pool1 = 4;
  c.pool2 = 2;
  c.head_hidden = 5;
  c.head = head;
  c.fusion_mode = mode;
  c.rest_dim = mode == FusionMode::none ? 0 : 6;
  return c;
}

Tensor rest_rows(const EegnetConfig& c, std::size_t n, Rng& rng) {
  return c.rest_dim ? oracle::random_tensor({n, c.rest_dim}, rng) : Tensor({n, 0});
}

}  // namespace

TEST_CASE("Dreyer configuration widths") {
  auto c = default_eegnet_config(27, 3 * 512, 512);
  CHECK(c.temporal_kernel == 256);
  CHECK(flatten_width(c) == 768);
  c.fusion_mode = FusionMode::rest;
  c.rest_dim = feature_length(27, 3, 2);
  CHECK(head_input_width(c) == 2874);
  EegNet net(c, 1);
  const auto trace = net.trace_shapes();
  const auto find = [&](const std::string& name) {
    for (const auto& [n, s] : trace)
      if (n == name) return s;
    FAIL("missing layer " << name);
    return Shape{};
  };
  CHECK(find("flatten") == Shape{1, 768});
  CHECK(find("concat") == Shape{1, 2874});
  CHECK(find("classifier") == Shape{1, 2});
  CHECK(find("spatial") == Shape{1, 16, 1, 1536});
  CHECK(find("pool1") == Shape{1, 16, 1, 384});
  CHECK(find("pool2") == Shape{1, 16, 1, 48});
}

TEST_CASE("BCI IV IIa configuration widths") {
  auto c = default_eegnet_config(22, 3 * 250, 250);
  CHECK(c.temporal_kernel == 126);
  CHECK(flatten_width(c) == 368);
  c.fusion_mode = FusionMode::rest;
  c.rest_dim = feature_length(22, 3, 2);
  CHECK(c.rest_dim == 1386);
  CHECK(head_input_width(c) == 1754);
  EegNet net(c, 1);
  CHECK(net.trace_shapes().back().second == Shape{1, 2});
}

TEST_CASE("invalid configurations are rejected") {
  auto c = tiny_config(FusionMode::none, HeadKind::mlp);
  c.f2 = 5;
  CHECK_THROWS_AS(EegNet(c), Error);
  c = tiny_config(FusionMode::rest, HeadKind::mlp);
  c.rest_dim = 0;
  CHECK_THROWS_AS(EegNet(c), Error);
  c = tiny_config(FusionMode::none, HeadKind::mlp);
  c.rest_dim = 3;
  CHECK_THROWS_AS(EegNet(c), Error);
  c = tiny_config(FusionMode::none, HeadKind::mlp);
  c.n_times = 4;
  CHECK_THROWS_AS(EegNet(c), Error);
}

TEST_CASE("composed network passes finite-difference checks") {
  for (auto mode : {FusionMode::none, FusionMode::rest}) {
    for (auto head : {HeadKind::mlp, HeadKind::linear}) {
      const auto cfg = tiny_config(mode, head);
      EegNet net(cfg, 3);
      Rng rng(61, to_string(mode));
      const std::size_t n = 4;
      const Tensor x = oracle::random_tensor(net.input_shape(n), rng);
      const Tensor r = rest_rows(cfg, n, rng);
      const std::vector<int> labels{0, 1, 1, 0};
      const Rng drop(62);
      const auto loss = [&] {
        Rng d = drop;
        return nn::softmax_cross_entropy(net.forward(x, r, nn::Mode::train, d), labels).loss;
      };
      net.zero_grad();
      Rng d = drop;
      const auto out = nn::softmax_cross_entropy(net.forward(x, r, nn::Mode::train, d), labels);
      net.backward(out.logit_grad);
      for (auto& p : net.parameters()) {
        const std::vector<double> analytic = p.tensor->grad;
        INFO(to_string(mode) << "/" << to_string(head) << " " << p.name);
        CHECK(oracle::max_relative_error(*p.tensor, analytic, loss, 32, rng) < 1e-4);
      }
    }
  }
}

TEST_CASE("initialization is seeded per layer") {
  const auto cfg = tiny_config(FusionMode::rest, HeadKind::mlp);
  EegNet a(cfg, 5), b(cfg, 5), c(cfg, 6);
  CHECK(a.state_dict() == b.state_dict());
  CHECK_FALSE(a.state_dict() == c.state_dict());
  // fusion mode does not change the backbone initialization
  EegNet plain(tiny_config(FusionMode::none, HeadKind::mlp), 5);
  CHECK(plain.layer("temporal").parameters()[0].tensor->values == a.layer("temporal").parameters()[0].tensor->values);
}

TEST_CASE("eval forward is deterministic and ignores dropout") {
  const auto cfg = tiny_config(FusionMode::rest, HeadKind::mlp);
  EegNet net(cfg, 7);
  Rng rng(63);
  const Tensor x = oracle::random_tensor(net.input_shape(3), rng);
  const Tensor r = rest_rows(cfg, 3, rng);
  Rng r1(1), r2(2);
  CHECK(net.forward(x, r, nn::Mode::eval, r1).values == net.forward(x, r, nn::Mode::eval, r2).values);
  CHECK_THROWS_AS(net.forward(x, Tensor({3, 5}), nn::Mode::eval, r1), Error);
}

TEST_CASE("constraints bound the spatial filters and the classifier") {
  auto cfg = tiny_config(FusionMode::none, HeadKind::linear);
  EegNet net(cfg, 8);
  for (auto& p : net.parameters())
    for (auto& v : p.tensor->values) v *= 50.0;
  net.apply_constraints();
  const auto row_norms = [](const Tensor& t) {
    std::vector<double> out;
    const std::size_t len = t.size() / t.dim(0);
    for (std::size_t s = 0; s < t.dim(0); ++s) {
      double ss = 0;
      for (std::size_t i = 0; i < len; ++i) ss += t[s * len + i] * t[s * len + i];
      out.push_back(std::sqrt(ss));
    }
    return out;
  };
  for (double n : row_norms(*net.layer("spatial").parameters()[0].tensor)) CHECK(n <= 1.0 + 1e-12);
  for (double n : row_norms(*net.layer("classifier").parameters()[0].tensor)) CHECK(n <= 0.25 + 1e-12);
}

TEST_CASE("checkpoints round-trip and are byte-stable") {
  oracle::TempDir dir("ckpt");
  const auto cfg = tiny_config(FusionMode::rest, HeadKind::mlp);
  EegNet net(cfg, 9);
  Rng rng(64);
  const Tensor x = oracle::random_tensor(net.input_shape(2), rng);
  const Tensor r = rest_rows(cfg, 2, rng);
  Rng d(0);
  net.forward(x, r, nn::Mode::train, d);  // move BN running stats away from defaults
  save_checkpoint(net, dir / "a.eegm", {{"seed", 9}});
  save_checkpoint(net, dir / "b.eegm", {{"seed", 9}});
  CHECK(oracle::slurp(dir.path / "a.eegm") == oracle::slurp(dir.path / "b.eegm"));
  auto loaded = load_checkpoint(dir / "a.eegm");
  CHECK(loaded.header.at("seed") == 9);
  CHECK(loaded.model.config() == cfg);
  CHECK(loaded.model.state_dict() == net.state_dict());
  Rng e1(0), e2(0);
  CHECK(loaded.model.forward(x, r, nn::Mode::eval, e1).values == net.forward(x, r, nn::Mode::eval, e2).values);

  std::string bytes = oracle::slurp(dir.path / "a.eegm");
  std::ofstream(dir / "short.eegm", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.eegm"), Error);
  bytes[0] = 'Z';
  std::ofstream(dir / "bad.eegm", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.eegm"), Error);
}

TEST_CASE("configuration JSON round-trip") {
  const auto cfg = tiny_config(FusionMode::random, HeadKind::linear);
  CHECK(eegnet_config_from_json(nlohmann::json::parse(to_json(cfg).dump())) == cfg);
  CHECK(parse_fusion_mode("rest") == FusionMode::rest);
  CHECK_THROWS_AS(parse_fusion_mode("bogus"), Error);
  CHECK(parse_head("linear") == HeadKind::linear);
  CHECK_THROWS_AS(parse_head("deep"), Error);
}
