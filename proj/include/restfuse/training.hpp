#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/checkpoint.hpp"
#include "restfuse/eegnet.hpp"
#include "restfuse/error.hpp"
#include "restfuse/optim.hpp"
#include "restfuse/rng.hpp"
#include "restfuse/tensor.hpp"

namespace restfuse {

/// Task epochs, class indices (0/1) and the per-trial rest-feature rows.
struct FusionBatch {
  Tensor task;                           // [N x 1 x C x T]
  std::vector<int> labels;               // [N], class index
  Tensor rest;                           // [N x rest_dim]
  std::vector<std::string> subject_ids;  // [N]

  std::size_t size() const { return labels.size(); }
};

inline void validate(const FusionBatch& b, const EegnetConfig& c, const std::string& what) {
  require(b.task.shape == Shape{b.size(), 1, c.n_channels, c.n_times}, ErrorKind::shape,
          what + ": task tensor " + shape_str(b.task.shape) + " does not match config [N x 1 x " +
              std::to_string(c.n_channels) + " x " + std::to_string(c.n_times) + "]");
  require(b.rest.shape == Shape{b.size(), c.rest_dim}, ErrorKind::shape,
          what + ": rest rows " + shape_str(b.rest.shape) + " do not match rest_dim " + std::to_string(c.rest_dim));
}

inline FusionBatch gather(const FusionBatch& src, std::span<const std::size_t> idx) {
  FusionBatch out;
  const std::size_t per_task = src.size() ? src.task.size() / src.size() : 0;
  const std::size_t per_rest = src.size() ? src.rest.size() / src.size() : 0;
  Shape ts = src.task.shape;
  ts[0] = idx.size();
  out.task = Tensor(ts);
  out.rest = Tensor({idx.size(), src.rest.rank() == 2 ? src.rest.dim(1) : 0});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    std::copy_n(src.task.data() + i * per_task, per_task, out.task.data() + k * per_task);
    std::copy_n(src.rest.data() + i * per_rest, per_rest, out.rest.data() + k * per_rest);
    out.labels.push_back(src.labels[i]);
    out.subject_ids.push_back(src.subject_ids[i]);
  }
  return out;
}

/// Per-trial rest rows: the subject's connectivity vector (rest), one
/// seeded uniform [0,1) vector per subject (random), or zero width (none).
inline Tensor make_rest_rows(const std::vector<std::string>& trial_subjects,
                             const std::map<std::string, std::vector<double>>& features, FusionMode mode,
                             std::uint64_t seed, std::size_t rest_dim) {
  const std::size_t n = trial_subjects.size();
  if (mode == FusionMode::none) return Tensor({n, 0});
  require(rest_dim > 0, ErrorKind::validation, "rest_dim must be positive for fusion mode " + std::string(to_string(mode)));
  Tensor rows({n, rest_dim});
  std::map<std::string, std::vector<double>> random_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& subject = trial_subjects[i];
    const std::vector<double>* src = nullptr;
    if (mode == FusionMode::rest) {
      auto it = features.find(subject);
      require(it != features.end(), ErrorKind::validation, "no connectivity features for subject '" + subject + "'");
      require(it->second.size() == rest_dim, ErrorKind::validation,
              "connectivity features for '" + subject + "' have length " + std::to_string(it->second.size()) +
                  ", expected " + std::to_string(rest_dim));
      src = &it->second;
    } else {
      auto [it, fresh] = random_rows.try_emplace(subject);
      if (fresh) {
        Rng rng(seed, "random-rest/" + subject);
        it->second.resize(rest_dim);
        for (auto& v : it->second) v = rng.uniform();
      }
      src = &it->second;
    }
    std::copy(src->begin(), src->end(), rows.data() + i * rest_dim);
  }
  return rows;
}

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
};

struct TrainReport {
  EegnetConfig config;
  std::uint64_t seed = 0;
  double lr = 0;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;  // 1-based; 0 if no epochs ran
  double best_val_accuracy = 0;
  double best_train_accuracy = 0;
  std::string best_checkpoint;
  std::string final_checkpoint;
};

inline nlohmann::ordered_json to_json(const TrainReport& r) {
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& m : r.history)
    hist.push_back({{"epoch", m.epoch},
                    {"train_loss", m.train_loss},
                    {"train_accuracy", m.train_accuracy},
                    {"val_accuracy", m.val_accuracy}});
  return {{"config", to_json(r.config)},
          {"seed", r.seed},
          {"lr", r.lr},
          {"epochs", r.epochs},
          {"batch_size", r.batch_size},
          {"best_epoch", r.best_epoch},
          {"best_val_accuracy", r.best_val_accuracy},
          {"best_train_accuracy", r.best_train_accuracy},
          {"best_checkpoint", r.best_checkpoint},
          {"final_checkpoint", r.final_checkpoint},
          {"history", std::move(hist)}};
}

/// Eval-mode predictions, processed in chunks to bound memory.
inline std::vector<int> predict(EegNet& model, const FusionBatch& batch, std::size_t chunk = 256) {
  validate(batch, model.config(), "predict");
  std::vector<int> out;
  out.reserve(batch.size());
  Rng unused;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    idx.resize(std::min(chunk, batch.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const FusionBatch part = gather(batch, idx);
    const Tensor logits = model.forward(part.task, part.rest, nn::Mode::eval, unused);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const double* z = logits.data() + i * k;
      out.push_back(static_cast<int>(std::max_element(z, z + k) - z));
    }
  }
  return out;
}

/// Proportion of correctly classified epochs.
inline double evaluate(EegNet& model, const FusionBatch& batch) {
  require(batch.size() > 0, ErrorKind::validation, "cannot evaluate on an empty batch");
  const auto pred = predict(model, batch);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

struct FitOptions {
  double lr = 5e-4;
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: keep checkpoints in memory only
};

struct FitResult {
  TrainReport report;
  EegNet model;  // restored to the best-validation epoch
};

/// Mini-batch Adam with per-epoch validation. The best-validation state
/// (earliest epoch on ties) is kept and restored at the end.
inline FitResult fit(const FusionBatch& train, const FusionBatch& val, const EegnetConfig& config,
                     const FitOptions& opt) {
  validate(config);
  validate(train, config, "training batch");
  validate(val, config, "validation batch");
  require(train.size() > 0 && val.size() > 0, ErrorKind::validation, "training and validation sets must be non-empty");
  require(opt.batch_size > 0, ErrorKind::validation, "batch size must be positive");
  require(opt.lr >= 0 && std::isfinite(opt.lr), ErrorKind::validation, "learning rate must be finite and >= 0");

  EegNet model(config, opt.seed);
  nn::AdamState adam;
  adam.lr = opt.lr;
  const auto params = model.parameter_tensors();

  TrainReport report;
  report.config = config;
  report.seed = opt.seed;
  report.lr = opt.lr;
  report.epochs = opt.epochs;
  report.batch_size = opt.batch_size;

  StateDict best = model.state_dict();
  double best_val = -1.0;
  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng(opt.seed, "shuffle", epoch).shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t count = std::min(opt.batch_size, order.size() - start);
      const FusionBatch b = gather(train, std::span<const std::size_t>(order).subspan(start, count));
      Rng dropout(opt.seed, "dropout", step++);
      model.zero_grad();
      const Tensor logits = model.forward(b.task, b.rest, nn::Mode::train, dropout);
      const auto loss = nn::softmax_cross_entropy(logits, b.labels);
      if (!std::isfinite(loss.loss)) {
        fail(ErrorKind::numerical, "training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step) + " (lr=" + std::to_string(opt.lr) + ")");
      }
      model.backward(loss.logit_grad);
      nn::adam_step(params, adam);
      model.apply_constraints();
      loss_sum += loss.loss * static_cast<double>(count);
      const std::size_t k = logits.dim(1);
      for (std::size_t i = 0; i < count; ++i) {
        const double* z = logits.data() + i * k;
        correct += static_cast<int>(std::max_element(z, z + k) - z) == b.labels[i];
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    m.val_accuracy = evaluate(model, val);
    report.history.push_back(m);
    if (m.val_accuracy > best_val) {
      best_val = m.val_accuracy;
      best = model.state_dict();
      report.best_epoch = epoch;
      report.best_val_accuracy = m.val_accuracy;
      report.best_train_accuracy = m.train_accuracy;
    }
  }
  if (opt.epochs == 0) report.best_val_accuracy = evaluate(model, val);

  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& m : report.history) history.push_back({m.train_loss, m.train_accuracy, m.val_accuracy});
  if (!opt.checkpoint_dir.empty()) {
    std::filesystem::create_directories(opt.checkpoint_dir);
    report.final_checkpoint = (std::filesystem::path(opt.checkpoint_dir) / "final.eegm").string();
    save_checkpoint(model, report.final_checkpoint,
                    {{"seed", opt.seed}, {"epoch", opt.epochs}, {"history", history}});
  }
  model.load_state_dict(best);
  if (!opt.checkpoint_dir.empty()) {
    report.best_checkpoint = (std::filesystem::path(opt.checkpoint_dir) / "best.eegm").string();
    save_checkpoint(model, report.best_checkpoint,
                    {{"seed", opt.seed}, {"epoch", report.best_epoch}, {"history", history}});
  }
  return {std::move(report), std::move(model)};
}

}  // namespace restfuse
