#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/connectivity.hpp"
#include "restfuse/eegnet.hpp"
#include "restfuse/epochs.hpp"
#include "restfuse/error.hpp"
#include "restfuse/filter.hpp"
#include "restfuse/manifest.hpp"
#include "restfuse/splits.hpp"
#include "restfuse/training.hpp"
#include "restfuse/version.hpp"

namespace restfuse {

struct PreprocessOptions {
  double band_low = 0.5;
  double band_high = 40.0;
  double task_start = 0.0;  // seconds relative to the cue
  double task_end = 3.0;
  double rest_start = 0.0;  // seconds relative to trial start
  double rest_end = 2.0;
  bool baseline_task = false;
};

inline nlohmann::ordered_json to_json(const PreprocessOptions& p) {
  return {{"band", {p.band_low, p.band_high}},
          {"task_window", {p.task_start, p.task_end}},
          {"rest_window", {p.rest_start, p.rest_end}},
          {"baseline_task", p.baseline_task}};
}

struct RunData {
  EpochSet task;
  EpochSet rest;
};

/// Band-pass the continuous recording, then cut task epochs after each cue
/// and rest epochs after each trial start. Rest epochs are always
/// baseline-corrected; task epochs only when requested.
inline RunData preprocess_run(const DatasetManifest& m, const SubjectEntry& subject, const RunEntry& run,
                              const PreprocessOptions& opt) {
  return with_stage("preprocess " + subject.subject_id + "/" + run.run_id, [&] {
    const Recording raw = read_recording(m.resolve(run.recording));
    const EventList events = read_events(m.resolve(run.events));
    const FilterSpec spec = design_bandpass(opt.band_low, opt.band_high, raw.sample_rate);
    const Recording rec = filtfilt(raw, spec);
    RunData d;
    d.task = extract_epochs(rec, events, opt.task_start, opt.task_end - opt.task_start, {left_hand, right_hand},
                            EpochKind::task, subject.subject_id, run.run_id);
    d.rest = baseline_correct(extract_epochs(rec, events, opt.rest_start, opt.rest_end - opt.rest_start,
                                             {trial_start}, EpochKind::rest, subject.subject_id, run.run_id));
    if (opt.baseline_task) d.task = baseline_correct(std::move(d.task));
    return d;
  });
}

/// Records every access to preprocessed subject data, tagged with the
/// experiment phase at the time of access.
class AccessAudit {
 public:
  struct Entry {
    std::string phase;
    std::string subject_id;
    std::string run_id;
    RunRole role;
  };

  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }
  void record(const std::string& subject, const std::string& run, RunRole role) {
    entries_.push_back({phase_, subject, run, role});
  }
  const std::vector<Entry>& entries() const { return entries_; }

  std::set<std::string> subjects_in_phase(const std::string& phase) const {
    std::set<std::string> out;
    for (const auto& e : entries_)
      if (e.phase == phase) out.insert(e.subject_id);
    return out;
  }

 private:
  std::string phase_ = "setup";
  std::vector<Entry> entries_;
};

/// Loads and preprocesses runs on demand.
class DataCache {
 public:
  DataCache(const DatasetManifest& m, PreprocessOptions opt, AccessAudit* audit)
      : manifest_(m), opt_(opt), audit_(audit) {}

  const RunData& run(const std::string& subject_id, const std::string& run_id) {
    const SubjectEntry& s = manifest_.subject(subject_id);
    const RunEntry* entry = nullptr;
    for (const auto& r : s.runs)
      if (r.run_id == run_id) entry = &r;
    require(entry != nullptr, ErrorKind::validation, "unknown run " + subject_id + "/" + run_id);
    if (audit_) audit_->record(subject_id, run_id, entry->role);
    auto key = subject_id + "/" + run_id;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, preprocess_run(manifest_, s, *entry, opt_)).first;
    return it->second;
  }

  /// All acquisition-run rest epochs of one subject.
  EpochSet acquisition_rest(const std::string& subject_id) {
    EpochSet out;
    for (const auto& r : manifest_.subject(subject_id).runs)
      if (r.role == RunRole::acquisition) append(out, run(subject_id, r.run_id).rest);
    return out;
  }

 private:
  const DatasetManifest& manifest_;
  PreprocessOptions opt_;
  AccessAudit* audit_;
  std::map<std::string, RunData> cache_;
};

struct ExperimentOptions {
  FusionMode mode = FusionMode::none;
  SplitKind split = SplitKind::kfold;
  std::size_t folds = 5;
  double lr = 5e-4;
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  HeadKind head = HeadKind::mlp;
  std::string holdout = "last:9";
  std::vector<BandSpec> bands = default_bands();
  std::vector<Metric> metrics = {Metric::coh, Metric::plv};
  double samples_per_hz = 4.0;
  PreprocessOptions preprocess;
  bool sample_sd = false;
  std::string checkpoint_dir;  // per-fold best/final checkpoints when set
};

inline nlohmann::ordered_json to_json(const ExperimentOptions& o) {
  std::vector<std::string> bands, metrics;
  for (const auto& b : o.bands) bands.push_back(b.name);
  for (auto m : o.metrics) metrics.push_back(to_string(m));
  return {{"mode", to_string(o.mode)},
          {"split", to_string(o.split)},
          {"folds", o.folds},
          {"lr", o.lr},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"seed", o.seed},
          {"head", to_string(o.head)},
          {"holdout", o.split == SplitKind::lso ? nlohmann::ordered_json(o.holdout) : nlohmann::ordered_json()},
          {"bands", bands},
          {"metrics", metrics},
          {"samples_per_hz", o.samples_per_hz},
          {"preprocess", to_json(o.preprocess)},
          {"sd", o.sample_sd ? "sample" : "population"}};
}

struct Summary {
  double mean = 0;
  double sd = 0;
};

inline Summary summarize(const std::vector<double>& xs, bool sample_sd) {
  require(!xs.empty(), ErrorKind::validation, "cannot summarize an empty list");
  Summary s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  const double dof = sample_sd ? static_cast<double>(xs.size()) - 1.0 : static_cast<double>(xs.size());
  s.sd = dof > 0 ? std::sqrt(ss / dof) : 0.0;
  return s;
}

struct RunReport {
  ExperimentOptions options;
  EegnetConfig model_config;
  SplitPlan plan;
  std::vector<double> fold_val_accuracy;
  std::vector<double> fold_train_accuracy;
  std::vector<double> fold_test_accuracy;  // empty for kfold
  std::vector<TrainReport> fold_reports;
  Summary val;
  double mean_train_accuracy = 0;
  std::optional<double> test_accuracy;  // best fold model on the test trials
  std::size_t best_fold = 0;            // 1-based
  ConnectivityDiagnostics diagnostics;
};

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.fold_val_accuracy.size(); ++i) {
    nlohmann::ordered_json f = {{"fold", i + 1},
                                {"n_train", r.plan.folds[i].train.size()},
                                {"n_val", r.plan.folds[i].val.size()},
                                {"best_epoch", r.fold_reports[i].best_epoch},
                                {"train_accuracy", r.fold_train_accuracy[i]},
                                {"val_accuracy", r.fold_val_accuracy[i]}};
    if (!r.fold_test_accuracy.empty()) f["test_accuracy"] = r.fold_test_accuracy[i];
    folds.push_back(std::move(f));
  }
  nlohmann::ordered_json training = nlohmann::ordered_json::array();
  for (const auto& t : r.fold_reports) training.push_back(to_json(t));
  nlohmann::ordered_json j = {
      {"version", version_string},
      {"options", to_json(r.options)},
      {"model", to_json(r.model_config)},
      {"train_subjects", r.plan.train_subjects},
      {"test_subjects", r.plan.test_subjects},
      {"n_test", r.plan.test.size()},
      {"folds", std::move(folds)},
      {"mean_train_accuracy", r.mean_train_accuracy},
      {"mean_val_accuracy", r.val.mean},
      {"sd_val_accuracy", r.val.sd},
      {"test_accuracy", r.test_accuracy ? nlohmann::ordered_json(*r.test_accuracy) : nlohmann::ordered_json()},
      {"best_fold", r.best_fold},
      {"diagnostics",
       {{"zero_phasor_points", r.diagnostics.zero_phasor_points},
        {"zero_power_points", r.diagnostics.zero_power_points},
        {"warnings", r.diagnostics.warnings}}},
      {"training", std::move(training)}};
  return j;
}

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

/// Per-fold table: Average Training Accuracy, k=1..k=K, Mean Accuracy with SD.
inline std::string to_csv(const RunReport& r) {
  std::string out = "ID,accuracy\n";
  out += "Average Training Accuracy," + percent(r.mean_train_accuracy) + "\n";
  for (std::size_t i = 0; i < r.fold_val_accuracy.size(); ++i)
    out += "k=" + std::to_string(i + 1) + "," + percent(r.fold_val_accuracy[i]) + "\n";
  out += "Mean Accuracy with SD," + percent(r.val.mean) + " +- " + percent(r.val.sd) + "\n";
  if (r.test_accuracy) out += "Test Accuracy," + percent(*r.test_accuracy) + "\n";
  return out;
}

inline SplitPlan make_plan(const DatasetManifest& m, const std::vector<TrialInfo>& trials,
                           const ExperimentOptions& o) {
  switch (o.split) {
    case SplitKind::kfold: return kfold_plan(m, trials, o.folds, o.seed);
    case SplitKind::online: return online_split(m, trials, o.folds, o.seed);
    case SplitKind::lso: return lso_split(m, trials, o.holdout, o.folds, o.seed);
  }
  fail(ErrorKind::validation, "unknown split kind");
}

namespace detail {

inline FusionBatch build_batch(DataCache& cache, const std::vector<TrialInfo>& trials,
                               const std::vector<std::size_t>& ids, const std::map<std::string, std::vector<double>>& features,
                               FusionMode mode, std::uint64_t seed, std::size_t rest_dim) {
  require(!ids.empty(), ErrorKind::validation, "empty trial selection");
  const auto& first = cache.run(trials[ids[0]].subject_id, trials[ids[0]].run_id).task;
  const std::size_t nc = first.n_channels, nt = first.n_times;
  FusionBatch b;
  b.task = Tensor({ids.size(), 1, nc, nt});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const TrialInfo& t = trials[ids[k]];
    const EpochSet& ep = cache.run(t.subject_id, t.run_id).task;
    require(ep.n_channels == nc && ep.n_times == nt, ErrorKind::shape,
            "run " + t.subject_id + "/" + t.run_id + " has a different epoch shape");
    require(t.index_in_run < ep.size() && ep.labels[t.index_in_run] == t.label, ErrorKind::validation,
            "trial table out of step with epochs of " + t.subject_id + "/" + t.run_id);
    const auto src = ep.epoch(t.index_in_run);
    std::copy(src.begin(), src.end(), b.task.data() + k * nc * nt);
    b.labels.push_back(t.label - 1);
    b.subject_ids.push_back(t.subject_id);
  }
  b.rest = make_rest_rows(b.subject_ids, features, mode, seed, rest_dim);
  return b;
}

inline std::vector<TrialInfo> subset(const std::vector<TrialInfo>& trials, const std::vector<std::size_t>& ids) {
  std::vector<TrialInfo> out;
  for (auto i : ids) out.push_back(trials[i]);
  return out;
}

inline std::vector<std::size_t> union_of(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Seed for the per-subject random rows, shared by every fold of a run.
inline std::uint64_t random_rest_seed(std::uint64_t experiment_seed) {
  return Rng(experiment_seed, "random-rest").next_u64();
}

/// Model-init / shuffle / dropout seed of one fold. Independent of the
/// fusion mode so ablation runs differ only in their rest rows.
inline std::uint64_t fold_seed(std::uint64_t experiment_seed, std::size_t fold) {
  return Rng(experiment_seed, "fold", fold).next_u64();
}

/// preprocess -> connectivity (rest mode) -> split -> fit per fold -> aggregate.
/// Test-side data (online runs, held-out subjects) is loaded only after
/// every fold has finished training.
inline RunReport run_experiment(const DatasetManifest& m, const ExperimentOptions& o, AccessAudit* audit = nullptr,
                                const SplitPlan* shared_plan = nullptr,
                                const std::vector<TrialInfo>* shared_trials = nullptr) {
  const std::vector<TrialInfo> own_trials = shared_trials ? std::vector<TrialInfo>{} : list_trials(m);
  const std::vector<TrialInfo>& trials = shared_trials ? *shared_trials : own_trials;
  RunReport report;
  report.options = o;
  report.plan = shared_plan ? *shared_plan : with_stage("split", [&] { return make_plan(m, trials, o); });
  const SplitPlan& plan = report.plan;

  AccessAudit local_audit;
  AccessAudit& log = audit ? *audit : local_audit;
  DataCache cache(m, o.preprocess, &log);

  // rest_dim is fixed by the montage; the header alone gives the channel count
  const auto header = read_recording_header(m.resolve(m.subjects.front().runs.front().recording));
  const std::size_t rest_dim =
      o.mode == FusionMode::none ? 0 : feature_length(header.channel_names.size(), o.bands.size(), o.metrics.size());
  const std::uint64_t random_seed = random_rest_seed(o.seed);

  log.set_phase("train");
  std::map<std::string, std::vector<double>> features;
  const auto add_features = [&](const std::vector<std::string>& subjects) {
    if (o.mode != FusionMode::rest) return;
    with_stage("connectivity", [&] {
      for (const auto& s : subjects) {
        auto r = connectivity_features(cache.acquisition_rest(s), o.bands, o.metrics, o.samples_per_hz);
        report.diagnostics.merge(r.diagnostics);
        features[s] = std::move(r.features.values);
      }
      return 0;
    });
  };
  add_features(plan.train_subjects);

  std::vector<std::size_t> dev = plan.folds.front().train;
  dev = detail::union_of(dev, plan.folds.front().val);
  const FusionBatch dev_batch =
      with_stage("batch", [&] { return detail::build_batch(cache, trials, dev, features, o.mode, random_seed, rest_dim); });
  std::map<std::size_t, std::size_t> row_of;
  for (std::size_t i = 0; i < dev.size(); ++i) row_of[dev[i]] = i;
  const auto rows = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> r;
    for (auto id : ids) {
      auto it = row_of.find(id);
      require(it != row_of.end(), ErrorKind::validation, "fold references a trial outside the development set");
      r.push_back(it->second);
    }
    return r;
  };

  EegnetConfig config = default_eegnet_config(dev_batch.task.dim(2), dev_batch.task.dim(3), header.sample_rate);
  config.fusion_mode = o.mode;
  config.rest_dim = rest_dim;
  config.head = o.head;
  report.model_config = config;

  std::vector<EegNet> models;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    FitOptions fo;
    fo.lr = o.lr;
    fo.epochs = o.epochs;
    fo.batch_size = o.batch_size;
    fo.seed = fold_seed(o.seed, f);
    if (!o.checkpoint_dir.empty())
      fo.checkpoint_dir = (std::filesystem::path(o.checkpoint_dir) / ("fold" + std::to_string(f + 1))).string();
    auto result = with_stage("fit fold " + std::to_string(f + 1), [&] {
      return fit(gather(dev_batch, rows(plan.folds[f].train)), gather(dev_batch, rows(plan.folds[f].val)), config, fo);
    });
    report.fold_val_accuracy.push_back(result.report.best_val_accuracy);
    report.fold_train_accuracy.push_back(result.report.best_train_accuracy);
    report.fold_reports.push_back(std::move(result.report));
    models.push_back(std::move(result.model));
  }
  report.val = summarize(report.fold_val_accuracy, o.sample_sd);
  report.mean_train_accuracy = summarize(report.fold_train_accuracy, false).mean;
  report.best_fold = static_cast<std::size_t>(
                         std::max_element(report.fold_val_accuracy.begin(), report.fold_val_accuracy.end()) -
                         report.fold_val_accuracy.begin()) +
                     1;

  if (!plan.test.empty()) {
    log.set_phase("test");
    std::vector<std::string> missing;
    for (const auto& s : plan.test_subjects)
      if (!features.contains(s)) missing.push_back(s);
    add_features(missing);
    const FusionBatch test_batch = with_stage(
        "test batch", [&] { return detail::build_batch(cache, trials, plan.test, features, o.mode, random_seed, rest_dim); });
    for (auto& model : models) report.fold_test_accuracy.push_back(evaluate(model, test_batch));
    report.test_accuracy = report.fold_test_accuracy[report.best_fold - 1];
  }
  log.set_phase("done");
  return report;
}

// ---------------------------------------------------------------------------

struct AblationRow {
  std::string experiment;
  double without = 0, with = 0, random = 0;              // headline accuracy (fraction)
  double without_sd = 0, with_sd = 0, random_sd = 0;     // fold SD (kfold only)
};

struct AblationResult {
  std::vector<AblationRow> rows;
  RunReport none, rest, random;
};

/// Headline number: mean fold accuracy for kfold, test accuracy otherwise.
inline double headline(const RunReport& r) { return r.test_accuracy ? *r.test_accuracy : r.val.mean; }

/// Runs the three fusion modes with one shared split plan and fold seeds.
inline AblationResult ablate(const DatasetManifest& m, ExperimentOptions o, const std::string& experiment_id,
                             AccessAudit* audit = nullptr) {
  const auto trials = list_trials(m);
  const SplitPlan plan = with_stage("split", [&] { return make_plan(m, trials, o); });
  const std::string ckpt = o.checkpoint_dir;
  const auto run_mode = [&](FusionMode mode) {
    ExperimentOptions mo = o;
    mo.mode = mode;
    if (!ckpt.empty()) mo.checkpoint_dir = (std::filesystem::path(ckpt) / to_string(mode)).string();
    return run_experiment(m, mo, audit, &plan, &trials);
  };
  AblationResult out{{}, run_mode(FusionMode::none), run_mode(FusionMode::rest), run_mode(FusionMode::random)};
  const bool cv = o.split == SplitKind::kfold;
  out.rows.push_back({experiment_id, headline(out.none), headline(out.rest), headline(out.random),
                      cv ? out.none.val.sd : 0.0, cv ? out.rest.val.sd : 0.0, cv ? out.random.val.sd : 0.0});
  return out;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "experiment,without,with,random\n";
  for (const auto& r : rows)
    out += r.experiment + "," + percent(r.without) + "," + percent(r.with) + "," + percent(r.random) + "\n";
  return out;
}

/// Per-fold comparison in the three-column layout.
inline std::string ablation_folds_csv(const AblationResult& a) {
  std::string out = "ID,without,with,random\n";
  out += "Average Training Accuracy," + percent(a.none.mean_train_accuracy) + "," + percent(a.rest.mean_train_accuracy) +
         "," + percent(a.random.mean_train_accuracy) + "\n";
  for (std::size_t i = 0; i < a.none.fold_val_accuracy.size(); ++i)
    out += "k=" + std::to_string(i + 1) + "," + percent(a.none.fold_val_accuracy[i]) + "," +
           percent(a.rest.fold_val_accuracy[i]) + "," + percent(a.random.fold_val_accuracy[i]) + "\n";
  const auto cell = [](const RunReport& r) { return percent(r.val.mean) + " +- " + percent(r.val.sd); };
  out += "Mean Accuracy with SD," + cell(a.none) + "," + cell(a.rest) + "," + cell(a.random) + "\n";
  return out;
}

inline nlohmann::ordered_json to_json(const AblationResult& a) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : a.rows)
    rows.push_back({{"experiment", r.experiment},
                    {"without", r.without},
                    {"with", r.with},
                    {"random", r.random},
                    {"without_sd", r.without_sd},
                    {"with_sd", r.with_sd},
                    {"random_sd", r.random_sd}});
  return {{"version", version_string},
          {"columns", {"Without Concatenation", "With Concatenation", "Random Concatenation"}},
          {"rows", std::move(rows)},
          {"plan", to_json(a.none.plan)}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open for writing: " + path);
  os << text;
  os.flush();
  require(static_cast<bool>(os), ErrorKind::io, "write failed: " + path);
}

}  // namespace restfuse
