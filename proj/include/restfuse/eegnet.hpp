#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/error.hpp"
#include "restfuse/layers.hpp"
#include "restfuse/rng.hpp"
#include "restfuse/tensor.hpp"

namespace restfuse {

enum class FusionMode { none, rest, random };
enum class HeadKind { mlp, linear };

inline const char* to_string(FusionMode m) {
  switch (m) {
    case FusionMode::none: return "none";
    case FusionMode::rest: return "rest";
    case FusionMode::random: return "random";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "none") return FusionMode::none;
  if (s == "rest") return FusionMode::rest;
  if (s == "random") return FusionMode::random;
  fail(ErrorKind::validation, "unknown fusion mode '" + s + "' (expected none, rest or random)");
}

inline const char* to_string(HeadKind h) { return h == HeadKind::mlp ? "mlp" : "linear"; }

inline HeadKind parse_head(const std::string& s) {
  if (s == "mlp") return HeadKind::mlp;
  if (s == "linear") return HeadKind::linear;
  fail(ErrorKind::validation, "unknown head '" + s + "' (expected mlp or linear)");
}

/// EEGNet-8,2 defaults plus the fusion head.
struct EegnetConfig {
  std::size_t n_channels = 0;
  std::size_t n_times = 0;
  std::size_t f1 = 8;
  std::size_t depth = 2;
  std::size_t f2 = 16;
  std::size_t temporal_kernel = 64;
  std::size_t separable_kernel = 16;
  std::size_t pool1 = 4;
  std::size_t pool2 = 8;
  double dropout = 0.25;
  std::size_t head_hidden = 64;
  HeadKind head = HeadKind::mlp;
  FusionMode fusion_mode = FusionMode::none;
  std::size_t rest_dim = 0;
  std::size_t n_classes = 2;
  double depthwise_max_norm = 1.0;
  double classifier_max_norm = 0.25;

  bool operator==(const EegnetConfig&) const = default;
};

/// Half the sample rate, rounded to an even tap count.
inline std::size_t default_temporal_kernel(double sample_rate) {
  auto k = static_cast<std::size_t>(std::llround(sample_rate / 2.0));
  if (k % 2 == 1) ++k;
  return std::max<std::size_t>(k, 2);
}

inline EegnetConfig default_eegnet_config(std::size_t n_channels, std::size_t n_times, double sample_rate) {
  EegnetConfig c;
  c.n_channels = n_channels;
  c.n_times = n_times;
  c.temporal_kernel = default_temporal_kernel(sample_rate);
  return c;
}

inline std::size_t flatten_width(const EegnetConfig& c) { return c.f2 * ((c.n_times / c.pool1) / c.pool2); }

inline std::size_t head_input_width(const EegnetConfig& c) { return flatten_width(c) + c.rest_dim; }

inline void validate(const EegnetConfig& c) {
  require(c.n_channels >= 1 && c.n_times >= 1, ErrorKind::validation, "EEGNet needs positive channel and time counts");
  require(c.f1 > 0 && c.depth > 0 && c.f2 > 0 && c.temporal_kernel > 0 && c.separable_kernel > 0 && c.pool1 > 0 &&
              c.pool2 > 0 && c.head_hidden > 0 && c.n_classes >= 2,
          ErrorKind::validation, "EEGNet sizes must be positive");
  require(c.f2 == c.f1 * c.depth, ErrorKind::validation,
          "F2 must equal F1 x D (" + std::to_string(c.f2) + " != " + std::to_string(c.f1 * c.depth) + ")");
  require(c.dropout >= 0.0 && c.dropout < 1.0, ErrorKind::validation, "dropout must be in [0, 1)");
  require(flatten_width(c) > 0, ErrorKind::validation,
          "n_times=" + std::to_string(c.n_times) + " too short for pooling " + std::to_string(c.pool1) + "x" +
              std::to_string(c.pool2));
  require((c.fusion_mode == FusionMode::none) == (c.rest_dim == 0), ErrorKind::validation,
          "rest_dim must be 0 exactly when fusion mode is none");
}

inline nlohmann::ordered_json to_json(const EegnetConfig& c) {
  return {{"n_channels", c.n_channels},
          {"n_times", c.n_times},
          {"F1", c.f1},
          {"D", c.depth},
          {"F2", c.f2},
          {"temporal_kernel", c.temporal_kernel},
          {"separable_kernel", c.separable_kernel},
          {"pool1", c.pool1},
          {"pool2", c.pool2},
          {"dropout", c.dropout},
          {"head_hidden", c.head_hidden},
          {"head", to_string(c.head)},
          {"fusion_mode", to_string(c.fusion_mode)},
          {"rest_dim", c.rest_dim},
          {"n_classes", c.n_classes},
          {"depthwise_max_norm", c.depthwise_max_norm},
          {"classifier_max_norm", c.classifier_max_norm}};
}

inline EegnetConfig eegnet_config_from_json(const nlohmann::json& j) {
  EegnetConfig c;
  try {
    c.n_channels = j.at("n_channels").get<std::size_t>();
    c.n_times = j.at("n_times").get<std::size_t>();
    c.f1 = j.at("F1").get<std::size_t>();
    c.depth = j.at("D").get<std::size_t>();
    c.f2 = j.at("F2").get<std::size_t>();
    c.temporal_kernel = j.at("temporal_kernel").get<std::size_t>();
    c.separable_kernel = j.at("separable_kernel").get<std::size_t>();
    c.pool1 = j.at("pool1").get<std::size_t>();
    c.pool2 = j.at("pool2").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.head_hidden = j.at("head_hidden").get<std::size_t>();
    c.head = parse_head(j.at("head").get<std::string>());
    c.fusion_mode = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
    c.rest_dim = j.at("rest_dim").get<std::size_t>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.depthwise_max_norm = j.at("depthwise_max_norm").get<double>();
    c.classifier_max_norm = j.at("classifier_max_norm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("malformed EEGNet config: ") + e.what());
  }
  validate(c);
  return c;
}

/// Named copy of every parameter and buffer; used for best-epoch snapshots.
struct StateDict {
  std::vector<std::pair<std::string, Tensor>> entries;
  bool operator==(const StateDict& o) const {
    if (entries.size() != o.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].first != o.entries[i].first || entries[i].second.shape != o.entries[i].second.shape ||
          entries[i].second.values != o.entries[i].second.values)
        return false;
    return true;
  }
};

/// EEGNet backbone, flatten, concatenation with the rest-feature row, and
/// classification head.
///
///   Block 1: temporal conv (1 x K, F1) -> BN -> depthwise spatial conv
///            (C x 1, x D, max-norm) -> BN -> ELU -> avgpool(p1) -> dropout
///   Block 2: depthwise (1 x 16) + pointwise (F2) -> BN -> ELU -> avgpool(p2)
///            -> dropout -> flatten
///   Head:    concat(flatten, rest) -> linear(hidden) -> ELU -> linear(2)
///            (or a single linear layer when head == linear)
class EegNet {
 public:
  explicit EegNet(EegnetConfig config, std::uint64_t init_seed = 0) : config_(std::move(config)) {
    validate(config_);
    const auto& c = config_;
    const std::size_t f1d = c.f1 * c.depth;
    add(std::make_unique<nn::Conv2d>("temporal", nn::ConvSpec{1, c.f1, 1, c.temporal_kernel, 1, false, 0.0}));
    add(std::make_unique<nn::BatchNorm>("bn1", c.f1));
    add(std::make_unique<nn::Conv2d>(nn::Conv2d::depthwise("spatial", c.f1, c.depth, c.n_channels, 1, c.depthwise_max_norm)));
    add(std::make_unique<nn::BatchNorm>("bn2", f1d));
    add(std::make_unique<nn::Elu>("elu1"));
    add(std::make_unique<nn::AvgPool>("pool1", c.pool1));
    add(std::make_unique<nn::Dropout>("drop1", c.dropout));
    add(std::make_unique<nn::Conv2d>(nn::Conv2d::depthwise("separable_depth", f1d, 1, 1, c.separable_kernel)));
    add(std::make_unique<nn::Conv2d>(nn::Conv2d::pointwise("separable_point", f1d, c.f2)));
    add(std::make_unique<nn::BatchNorm>("bn3", c.f2));
    add(std::make_unique<nn::Elu>("elu2"));
    add(std::make_unique<nn::AvgPool>("pool2", c.pool2));
    add(std::make_unique<nn::Dropout>("drop2", c.dropout));
    add(std::make_unique<nn::Flatten>("flatten"));
    backbone_.front()->input_grad_required = false;

    const std::size_t in = head_input_width(c);
    if (c.head == HeadKind::mlp) {
      head_.push_back(std::make_unique<nn::Linear>("fc1", in, c.head_hidden));
      head_.push_back(std::make_unique<nn::Elu>("elu3"));
      head_.push_back(std::make_unique<nn::Linear>("classifier", c.head_hidden, c.n_classes, c.classifier_max_norm));
    } else {
      head_.push_back(std::make_unique<nn::Linear>("classifier", in, c.n_classes, c.classifier_max_norm));
    }
    initialize(init_seed);
  }

  EegNet(const EegNet&) = delete;
  EegNet& operator=(const EegNet&) = delete;
  EegNet(EegNet&&) = default;
  EegNet& operator=(EegNet&&) = default;

  const EegnetConfig& config() const { return config_; }

  /// Each layer draws from its own stream keyed by (seed, layer name).
  void initialize(std::uint64_t seed) {
    const Rng base(seed, "init");
    for (auto* l : all_layers()) {
      Rng r = base.fork(l->name());
      l->initialize(r);
    }
  }

  Shape input_shape(std::size_t batch) const { return {batch, 1, config_.n_channels, config_.n_times}; }

  /// task: [N x 1 x C x T]; rest: [N x rest_dim] (may be empty when rest_dim == 0).
  Tensor forward(const Tensor& task, const Tensor& rest, nn::Mode mode, Rng& rng) {
    require_shape(task, input_shape(task.rank() ? task.dim(0) : 0), "EEGNet input");
    const std::size_t n = task.dim(0);
    Tensor x = task;
    for (auto& l : backbone_) x = l->forward(x, mode, rng);
    Tensor r = rest;
    if (config_.rest_dim == 0 && rest.size() == 0) r = Tensor({n, 0});
    require_shape(r, {n, config_.rest_dim}, "rest features");
    x = concat_.forward(x, r);
    for (auto& l : head_) x = l->forward(x, mode, rng);
    return x;
  }

  /// Accumulates parameter gradients from dLoss/dLogits.
  void backward(const Tensor& logit_grad) {
    Tensor g = logit_grad;
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) g = (*it)->backward(g);
    g = concat_.backward(g).first;
    for (auto it = backbone_.rbegin(); it != backbone_.rend(); ++it) g = (*it)->backward(g);
  }

  void zero_grad() {
    for (auto& p : parameters()) p.tensor->zero_grad();
  }

  void apply_constraints() {
    for (auto* l : all_layers()) l->apply_constraints();
  }

  std::vector<nn::NamedTensor> parameters() {
    std::vector<nn::NamedTensor> out;
    for (auto* l : all_layers())
      for (auto& p : l->parameters()) out.push_back(p);
    return out;
  }

  std::vector<nn::NamedTensor> buffers() {
    std::vector<nn::NamedTensor> out;
    for (auto* l : all_layers())
      for (auto& p : l->buffers()) out.push_back(p);
    return out;
  }

  std::vector<Tensor*> parameter_tensors() {
    std::vector<Tensor*> out;
    for (auto& p : parameters()) out.push_back(p.tensor);
    return out;
  }

  StateDict state_dict() {
    StateDict s;
    for (auto& p : parameters()) s.entries.emplace_back(p.name, Tensor(*p.tensor));
    for (auto& b : buffers()) s.entries.emplace_back(b.name, Tensor(*b.tensor));
    for (auto& [name, t] : s.entries) t.grad.clear();
    return s;
  }

  void load_state_dict(const StateDict& s) {
    auto targets = parameters();
    for (auto& b : buffers()) targets.push_back(b);
    require(targets.size() == s.entries.size(), ErrorKind::validation, "state dict has wrong number of tensors");
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto& [name, t] = s.entries[i];
      require(name == targets[i].name, ErrorKind::validation, "state dict entry '" + name + "' where '" +
                                                                  targets[i].name + "' expected");
      require_shape(t, targets[i].tensor->shape, "state dict entry " + name);
      targets[i].tensor->values = t.values;
    }
  }

  nn::Layer& layer(const std::string& name) {
    for (auto* l : all_layers())
      if (l->name() == name) return *l;
    fail(ErrorKind::validation, "no layer named '" + name + "'");
  }

  std::vector<nn::Layer*> all_layers() {
    std::vector<nn::Layer*> out;
    for (auto& l : backbone_) out.push_back(l.get());
    for (auto& l : head_) out.push_back(l.get());
    return out;
  }

  /// Output shape after each backbone layer for a batch of one.
  std::vector<std::pair<std::string, Shape>> trace_shapes() const {
    std::vector<std::pair<std::string, Shape>> out;
    Shape s = input_shape(1);
    for (const auto& l : backbone_) {
      s = l->output_shape(s);
      out.emplace_back(l->name(), s);
    }
    Shape h{1, s[1] + config_.rest_dim};
    out.emplace_back("concat", h);
    for (const auto& l : head_) {
      h = l->output_shape(h);
      out.emplace_back(l->name(), h);
    }
    return out;
  }

 private:
  void add(std::unique_ptr<nn::Layer> l) { backbone_.push_back(std::move(l)); }

  EegnetConfig config_;
  std::vector<std::unique_ptr<nn::Layer>> backbone_;
  nn::Concat concat_;
  std::vector<std::unique_ptr<nn::Layer>> head_;
};

}  // namespace restfuse
