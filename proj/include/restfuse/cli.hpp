#pragma once

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "restfuse/connectivity.hpp"
#include "restfuse/epochs.hpp"
#include "restfuse/error.hpp"
#include "restfuse/experiment.hpp"
#include "restfuse/manifest.hpp"
#include "restfuse/synth.hpp"
#include "restfuse/version.hpp"

namespace restfuse::cli {

namespace fs = std::filesystem;

/// "a:b" -> {a, b}
inline std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  require(colon != std::string::npos, ErrorKind::validation, flag + " expects LOW:HIGH, got '" + text + "'");
  try {
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    const double lo = std::stod(a, &used_a), hi = std::stod(b, &used_b);
    require(used_a == a.size() && used_b == b.size(), ErrorKind::validation, "");
    return {lo, hi};
  } catch (const std::exception&) {
    fail(ErrorKind::validation, flag + " expects LOW:HIGH, got '" + text + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct PreprocessFlags {
  std::string band = "0.5:40";
  std::string task_window = "0:3";
  std::string rest_window = "0:2";
  bool baseline_task = false;

  void add_to(CLI::App* app) {
    app->add_option("--band", band, "band-pass edges in Hz, LOW:HIGH")->capture_default_str();
    app->add_option("--task-window", task_window, "task window in s relative to the cue")->capture_default_str();
    app->add_option("--rest-window", rest_window, "rest window in s relative to trial start")->capture_default_str();
    app->add_flag("--baseline-task", baseline_task, "baseline-correct task epochs");
  }

  PreprocessOptions options() const {
    PreprocessOptions p;
    std::tie(p.band_low, p.band_high) = parse_range(band, "--band");
    std::tie(p.task_start, p.task_end) = parse_range(task_window, "--task-window");
    std::tie(p.rest_start, p.rest_end) = parse_range(rest_window, "--rest-window");
    require(p.task_end > p.task_start, ErrorKind::validation, "--task-window must have positive length");
    require(p.rest_end > p.rest_start, ErrorKind::validation, "--rest-window must have positive length");
    p.baseline_task = baseline_task;
    return p;
  }
};

struct SpectralFlags {
  std::string bands = "theta,alpha,beta";
  std::string metrics = "coh,plv";
  double samples_per_hz = 4.0;

  void add_to(CLI::App* app) {
    app->add_option("--bands", bands, "comma-separated bands")->capture_default_str();
    app->add_option("--metric", metrics, "comma-separated metrics (coh, plv)")->capture_default_str();
    app->add_option("--samples-per-hz", samples_per_hz, "wavelet frequencies per Hz")->capture_default_str();
  }

  std::vector<BandSpec> band_list() const {
    std::vector<BandSpec> out;
    for (const auto& b : split_list(bands)) out.push_back(band_by_name(b));
    require(!out.empty(), ErrorKind::validation, "--bands must name at least one band");
    return out;
  }
  std::vector<Metric> metric_list() const {
    std::vector<Metric> out;
    for (const auto& m : split_list(metrics)) out.push_back(parse_metric(m));
    require(!out.empty(), ErrorKind::validation, "--metric must name at least one metric");
    return out;
  }
};

struct ExperimentFlags {
  std::string split = "kfold";
  std::size_t folds = 5;
  double lr = 5e-4;
  std::size_t epochs = 500;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  std::string head = "mlp";
  std::string holdout = "last:9";
  std::string sd = "population";

  void add_to(CLI::App* app) {
    app->add_option("--split", split, "kfold, online or lso")->capture_default_str();
    app->add_option("--seed", seed, "experiment seed")->required();
    app->add_option("--folds", folds, "number of folds")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--epochs", epochs, "training epochs per fold")->capture_default_str();
    app->add_option("--batch", batch, "mini-batch size")->capture_default_str();
    app->add_option("--head", head, "classifier head: mlp or linear")->capture_default_str();
    app->add_option("--holdout", holdout, "held-out subjects for lso: last:N or ids:a,b")->capture_default_str();
    app->add_option("--sd", sd, "fold SD formula: population or sample")->capture_default_str();
  }

  void apply(ExperimentOptions& o) const {
    o.split = parse_split(split);
    o.folds = folds;
    o.lr = lr;
    o.epochs = epochs;
    o.batch_size = batch;
    o.seed = seed;
    o.head = parse_head(head);
    o.holdout = holdout;
    require(sd == "population" || sd == "sample", ErrorKind::validation, "--sd must be population or sample");
    o.sample_sd = sd == "sample";
  }
};

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

/// Checkpoint paths inside a report are stored relative to the output
/// directory so that reports do not depend on where they were written.
inline void relativize_checkpoints(RunReport& r, const std::string& out_dir) {
  for (auto& t : r.fold_reports) {
    if (!t.best_checkpoint.empty()) t.best_checkpoint = fs::relative(t.best_checkpoint, out_dir).generic_string();
    if (!t.final_checkpoint.empty()) t.final_checkpoint = fs::relative(t.final_checkpoint, out_dir).generic_string();
  }
}

inline void print_warnings(const ConnectivityDiagnostics& d, std::ostream& err) {
  for (const auto& w : d.warnings) err << "warning: " << w << "\n";
}

inline int cmd_synth(const SynthConfig& cfg, const std::string& out, std::ostream& os) {
  const auto m = synth_dataset(cfg, out);
  os << "wrote " << m.subjects.size() << " subjects to " << (fs::path(out) / "manifest.json").string() << "\n";
  return 0;
}

inline int cmd_preprocess(const std::string& manifest_path, const PreprocessOptions& p, std::string out,
                          std::ostream& os) {
  const auto m = load_manifest(manifest_path);
  if (out.empty()) out = (fs::path(manifest_path).parent_path() / "epochs").string();
  ensure_dir(out);
  nlohmann::ordered_json summary = {{"version", version_string}, {"preprocess", to_json(p)}};
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  std::size_t n_task = 0, n_rest = 0;
  for (const auto& s : m.subjects) {
    ensure_dir((fs::path(out) / s.subject_id).string());
    for (const auto& r : s.runs) {
      const RunData d = preprocess_run(m, s, r, p);
      const std::string task_rel = s.subject_id + "/" + r.run_id + "_task.eegepo";
      const std::string rest_rel = s.subject_id + "/" + r.run_id + "_rest.eegepo";
      write_epochs(d.task, (fs::path(out) / task_rel).string());
      write_epochs(d.rest, (fs::path(out) / rest_rel).string());
      runs.push_back({{"subject_id", s.subject_id},
                      {"run_id", r.run_id},
                      {"role", to_string(r.role)},
                      {"task", task_rel},
                      {"rest", rest_rel},
                      {"n_task", d.task.size()},
                      {"n_rest", d.rest.size()}});
      n_task += d.task.size();
      n_rest += d.rest.size();
    }
  }
  summary["runs"] = std::move(runs);
  write_text((fs::path(out) / "preprocess.json").string(), dump(summary));
  os << "wrote " << n_task << " task and " << n_rest << " rest epochs to " << out << "\n";
  return 0;
}

inline int cmd_connectivity(const std::string& manifest_path, const PreprocessOptions& p, const SpectralFlags& sf,
                            const std::string& out, std::ostream& os, std::ostream& err) {
  const auto m = load_manifest(manifest_path);
  const auto bands = sf.band_list();
  const auto metrics = sf.metric_list();
  DataCache cache(m, p, nullptr);
  std::vector<ConnectivityFeatures> all;
  ConnectivityDiagnostics diag;
  for (const auto& s : m.subjects) {
    auto r = with_stage("connectivity " + s.subject_id, [&] {
      return connectivity_features(cache.acquisition_rest(s.subject_id), bands, metrics, sf.samples_per_hz);
    });
    diag.merge(r.diagnostics);
    all.push_back(std::move(r.features));
  }
  print_warnings(diag, err);
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  write_features(all, out);
  os << "wrote features for " << all.size() << " subjects to " << out << "\n";
  return 0;
}

inline int cmd_train(const std::string& manifest_path, ExperimentOptions o, const std::string& out,
                     std::ostream& os, std::ostream& err) {
  const auto m = load_manifest(manifest_path);
  ensure_dir(out);
  o.checkpoint_dir = (fs::path(out) / "checkpoints").string();
  RunReport r = run_experiment(m, o);
  relativize_checkpoints(r, out);
  print_warnings(r.diagnostics, err);
  write_text((fs::path(out) / "report.json").string(), dump(to_json(r)));
  write_text((fs::path(out) / "report.csv").string(), to_csv(r));
  os << to_csv(r);
  return 0;
}

inline int cmd_ablate(const std::string& manifest_path, ExperimentOptions o, const std::string& experiment_id,
                      const std::string& out, std::ostream& os, std::ostream& err) {
  const auto m = load_manifest(manifest_path);
  ensure_dir(out);
  o.checkpoint_dir = (fs::path(out) / "checkpoints").string();
  AblationResult a = ablate(m, o, experiment_id);
  for (RunReport* r : {&a.none, &a.rest, &a.random}) {
    relativize_checkpoints(*r, out);
    const std::string mode = to_string(r->options.mode);
    write_text((fs::path(out) / ("report_" + mode + ".json")).string(), dump(to_json(*r)));
    write_text((fs::path(out) / ("report_" + mode + ".csv")).string(), to_csv(*r));
  }
  print_warnings(a.rest.diagnostics, err);
  write_text((fs::path(out) / "ablation.csv").string(), ablation_csv(a.rows));
  write_text((fs::path(out) / "ablation.json").string(), dump(to_json(a)));
  write_text((fs::path(out) / "folds.csv").string(), ablation_folds_csv(a));
  os << ablation_csv(a.rows);
  return 0;
}

/// Entry point shared by the executable and in-process tests.
/// Exit codes: 0 success, 2 validation, 3 numerical, 1 anything else.
inline int run_cli(std::vector<std::string> args, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Motor-imagery EEG decoding with resting-state connectivity fusion", "restfuse"};
  app.set_version_flag("--version", version_string);
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
  s->add_option("--out", synth_out, "output directory")->required();
  s->add_option("--subjects", synth.n_subjects, "number of subjects")->required();
  s->add_option("--trials", synth.trials_per_run, "trials per run (even)")->required();
  s->add_option("--snr", synth.snr, "class signal to background amplitude ratio")->required();
  s->add_option("--rest-coupling", synth.rest_coupling_strength, "rest fingerprint strength in [0,1]")->required();
  s->add_option("--seed", synth.seed, "generator seed")->required();
  s->add_option("--sample-rate", synth.sample_rate, "sample rate in Hz")->capture_default_str();
  s->add_option("--channels", synth.n_channels, "channel count")->capture_default_str();
  s->add_option("--runs-acquisition", synth.runs_acquisition, "acquisition runs per subject")->capture_default_str();
  s->add_option("--runs-online", synth.runs_online, "online runs per subject")->capture_default_str();

  std::string manifest, pre_out;
  PreprocessFlags pre;
  auto* p = app.add_subcommand("preprocess", "filter and epoch every run");
  p->add_option("--manifest", manifest, "dataset manifest")->required();
  pre.add_to(p);
  p->add_option("--out", pre_out, "output directory (default: epochs/ next to the manifest)");

  SpectralFlags spec;
  std::string conn_out;
  auto* c = app.add_subcommand("connectivity", "per-subject resting-state connectivity features");
  c->add_option("--manifest", manifest, "dataset manifest")->required();
  spec.add_to(c);
  c->add_option("--out", conn_out, "output JSON file")->required();
  pre.add_to(c);

  ExperimentFlags exp;
  std::string mode = "none", train_out = "train-out";
  auto* t = app.add_subcommand("train", "train and evaluate under one fusion mode");
  t->add_option("--manifest", manifest, "dataset manifest")->required();
  t->add_option("--mode", mode, "none, rest or random")->capture_default_str();
  exp.add_to(t);
  t->add_option("--out", train_out, "output directory")->capture_default_str();
  pre.add_to(t);
  spec.add_to(t);

  std::string ablate_out, experiment_id;
  auto* a = app.add_subcommand("ablate", "compare no, rest and random concatenation");
  a->add_option("--manifest", manifest, "dataset manifest")->required();
  exp.add_to(a);
  a->add_option("--out", ablate_out, "output directory")->required();
  a->add_option("--experiment", experiment_id, "row label (default: split name)");
  pre.add_to(a);
  spec.add_to(a);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, os, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, os, err);
    return 2;
  }

  const auto experiment_options = [&] {
    ExperimentOptions o;
    exp.apply(o);
    o.preprocess = pre.options();
    o.bands = spec.band_list();
    o.metrics = spec.metric_list();
    o.samples_per_hz = spec.samples_per_hz;
    return o;
  };

  try {
    if (s->parsed()) return cmd_synth(synth, synth_out, os);
    if (p->parsed()) return cmd_preprocess(manifest, pre.options(), pre_out, os);
    if (c->parsed()) return cmd_connectivity(manifest, pre.options(), spec, conn_out, os, err);
    if (t->parsed()) {
      ExperimentOptions o = experiment_options();
      o.mode = parse_fusion_mode(mode);
      return cmd_train(manifest, o, train_out, os, err);
    }
    if (a->parsed()) {
      ExperimentOptions o = experiment_options();
      return cmd_ablate(manifest, o, experiment_id.empty() ? exp.split : experiment_id, ablate_out, os, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), os, err);
}

}  // namespace restfuse::cli
