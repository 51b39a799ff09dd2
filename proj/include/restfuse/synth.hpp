#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "restfuse/error.hpp"
#include "restfuse/fft.hpp"
#include "restfuse/manifest.hpp"
#include "restfuse/recording.hpp"
#include "restfuse/rng.hpp"

namespace restfuse {

/// Controls the synthetic stand-in dataset.
///
/// Every trial lasts 8 s: fixation (code 0) at 0 s, cue (code 1 or 2) at 2 s.
/// A 10 Hz rhythm of amplitude `snr` (relative to a unit-RMS 1/f background)
/// is present on every channel. During the 3 s after the cue it is suppressed
/// on the channel group contralateral to the imagined hand. During fixation
/// the rhythm is phase-coupled across channels following a subject-specific
/// network whose intensity is `rest_coupling_strength`.
struct SynthConfig {
  std::size_t n_subjects = 4;
  std::size_t trials_per_run = 40;
  std::size_t runs_acquisition = 2;
  std::size_t runs_online = 4;
  std::uint32_t sample_rate = 512;
  std::size_t n_channels = 27;
  double snr = 5.0;
  double rest_coupling_strength = 0.8;
  std::uint64_t seed = 0;

  double rhythm_hz = 10.0;
  double erd_depth = 0.8;  // fraction of amplitude removed contralaterally
  std::size_t n_rest_sources = 2;
};

namespace synth_timing {
inline constexpr double lead_s = 1.0;
inline constexpr double trial_s = 8.0;
inline constexpr double cue_s = 2.0;
inline constexpr double rest_s = 2.0;
inline constexpr double task_s = 3.0;
inline constexpr double tail_s = 1.0;
}  // namespace synth_timing

inline void validate(const SynthConfig& c) {
  require(c.n_subjects >= 1 && c.trials_per_run >= 1 && c.runs_acquisition >= 1 && c.runs_online >= 1,
          ErrorKind::validation, "synthetic dataset counts must all be >= 1");
  require(c.trials_per_run % 2 == 0, ErrorKind::validation,
          "trials_per_run must be even so classes 1 and 2 balance exactly");
  require(c.snr > 0.0 && std::isfinite(c.snr), ErrorKind::validation, "snr must be > 0");
  require(c.rest_coupling_strength >= 0.0 && c.rest_coupling_strength <= 1.0, ErrorKind::validation,
          "rest_coupling_strength must be in [0, 1]");
  require(c.n_channels >= 2 && c.n_channels <= 255, ErrorKind::validation, "n_channels must be in [2, 255]");
  require(c.sample_rate > 2 * c.rhythm_hz, ErrorKind::validation, "sample_rate too low for the 10 Hz rhythm");
  require(c.n_rest_sources >= 1, ErrorKind::validation, "n_rest_sources must be >= 1");
}

inline std::string subject_label(std::size_t index) {
  const std::string num = std::to_string(index + 1);
  return "s" + std::string(num.size() < 2 ? "0" : "") + num;
}

/// Channel c belongs to the left group when c < n/2 and to the right group
/// when c >= n - n/2; the middle channel of an odd montage is in neither.
enum class Hemisphere { left, right, midline };

inline Hemisphere hemisphere_of(std::size_t c, std::size_t n) {
  if (c < n / 2) return Hemisphere::left;
  if (c >= n - n / 2) return Hemisphere::right;
  return Hemisphere::midline;
}

inline std::vector<std::string> synth_channel_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) {
    const auto h = hemisphere_of(c, n);
    const char side = h == Hemisphere::left ? 'L' : h == Hemisphere::right ? 'R' : 'Z';
    const std::string num = std::to_string(c + 1);
    names.push_back(side + std::string(num.size() < 2 ? "0" : "") + num);
  }
  return names;
}

/// Unit-RMS noise with a 1/f power spectrum, shaped in the frequency domain.
inline std::vector<double> pink_noise(std::size_t n, double sample_rate, Rng rng) {
  const std::size_t nfft = next_power_of_two(n);
  std::vector<cplx> spec(nfft, cplx{});
  for (std::size_t k = 1; k <= nfft / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
    const double scale = 1.0 / std::sqrt(f);
    const double re = rng.normal();
    const double im = rng.normal();
    if (k == nfft / 2) {
      spec[k] = {re * scale, 0.0};
    } else {
      spec[k] = {re * scale, im * scale};
      spec[nfft - k] = std::conj(spec[k]);
    }
  }
  fft_inplace(spec, true);
  std::vector<double> out(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (out[i] = spec[i].real());
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (auto& v : out) {
    v -= mean;
    ss += v * v;
  }
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0.0)
    for (auto& v : out) v /= rms;
  return out;
}

/// Subject-level resting network: each channel loads on one latent 10 Hz
/// source with a fixed phase lag and a coupling weight in [0, 1].
struct RestFingerprint {
  std::vector<std::size_t> source;
  std::vector<double> weight;
  std::vector<double> lag;
};

inline RestFingerprint make_fingerprint(const SynthConfig& cfg, const std::string& subject) {
  Rng rng(cfg.seed, "fingerprint/" + subject);
  RestFingerprint fp;
  for (std::size_t c = 0; c < cfg.n_channels; ++c) {
    fp.source.push_back(static_cast<std::size_t>(rng.below(cfg.n_rest_sources)));
    fp.weight.push_back(cfg.rest_coupling_strength * rng.uniform(0.2, 1.0));
    fp.lag.push_back(rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4));
  }
  return fp;
}

struct SynthRun {
  Recording recording;
  EventList events;
};

inline SynthRun synth_run(const SynthConfig& cfg, const std::string& subject, const std::string& run_id,
                          const RestFingerprint& fp) {
  using namespace synth_timing;
  const double fs = cfg.sample_rate;
  const auto secs = [fs](double s) { return static_cast<std::size_t>(std::llround(s * fs)); };
  const std::size_t nc = cfg.n_channels;
  const std::size_t n = secs(lead_s + trial_s * static_cast<double>(cfg.trials_per_run) + tail_s);
  const std::string key = subject + "/" + run_id;

  std::vector<int> classes(cfg.trials_per_run);
  for (std::size_t k = 0; k < classes.size(); ++k) classes[k] = k % 2 == 0 ? left_hand : right_hand;
  Rng(cfg.seed, "labels/" + key).shuffle(std::span<int>(classes));

  SynthRun out;
  auto& rec = out.recording;
  rec.channel_names = synth_channel_names(nc);
  rec.sample_rate = cfg.sample_rate;
  rec.n_samples = n;
  rec.samples.resize(nc * n);

  std::vector<std::vector<double>> sig(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    sig[c] = pink_noise(n, fs, Rng(cfg.seed, "noise/" + key + "/" + std::to_string(c)));
  }

  const double w = 2.0 * std::numbers::pi * cfg.rhythm_hz / fs;
  const double amp = cfg.snr;
  Rng phase_rng(cfg.seed, "phase/" + key);
  const auto add_tone = [&](std::size_t c, std::size_t from, std::size_t to, double a, double phase) {
    for (std::size_t t = from; t < std::min(to, n); ++t) sig[c][t] += a * std::cos(w * static_cast<double>(t) + phase);
  };
  const auto random_phase = [&] { return phase_rng.uniform(0.0, 2.0 * std::numbers::pi); };

  // lead-in and tail carry the uncoupled rhythm
  const std::size_t trials_end = secs(lead_s + trial_s * static_cast<double>(cfg.trials_per_run));
  for (std::size_t c = 0; c < nc; ++c) {
    add_tone(c, 0, secs(lead_s), amp, random_phase());
    add_tone(c, trials_end, n, amp, random_phase());
  }

  for (std::size_t k = 0; k < cfg.trials_per_run; ++k) {
    const std::size_t start = secs(lead_s + trial_s * static_cast<double>(k));
    const std::size_t cue = start + secs(cue_s);
    const std::size_t task_end = cue + secs(task_s);
    const std::size_t trial_end = start + secs(trial_s);
    out.events.push_back({start, trial_start});
    out.events.push_back({cue, classes[k]});

    std::vector<double> source_phase(cfg.n_rest_sources);
    for (auto& p : source_phase) p = random_phase();

    // left-hand imagery desynchronizes the right hemisphere and vice versa
    const Hemisphere suppressed = classes[k] == left_hand ? Hemisphere::right : Hemisphere::left;
    for (std::size_t c = 0; c < nc; ++c) {
      const double g = fp.weight[c];
      add_tone(c, start, start + secs(rest_s), amp * g, source_phase[fp.source[c]] + fp.lag[c]);
      add_tone(c, start, start + secs(rest_s), amp * std::sqrt(1.0 - g * g), random_phase());

      const double task_amp = hemisphere_of(c, nc) == suppressed ? amp * (1.0 - cfg.erd_depth) : amp;
      add_tone(c, cue, task_end, task_amp, random_phase());
      add_tone(c, task_end, trial_end, amp, random_phase());
    }
  }

  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t t = 0; t < n; ++t) rec.samples[c * n + t] = static_cast<float>(sig[c][t]);
  }
  return out;
}

/// Writes <out_dir>/<subject>/<run>.eegrec + <run>_events.csv and
/// <out_dir>/manifest.json. Output bytes are a pure function of `cfg`.
inline DatasetManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorKind::io, "cannot create directory " + out_dir + ": " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = fs::absolute(out_dir);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    SubjectEntry subject{subject_label(s), {}};
    fs::create_directories(fs::path(out_dir) / subject.subject_id, ec);
    require(!ec, ErrorKind::io, "cannot create subject directory: " + ec.message());
    const auto fp = make_fingerprint(cfg, subject.subject_id);

    const auto emit = [&](const std::string& run_id, RunRole role) {
      const auto run = synth_run(cfg, subject.subject_id, run_id, fp);
      RunEntry entry{run_id, role, subject.subject_id + "/" + run_id + ".eegrec",
                     subject.subject_id + "/" + run_id + "_events.csv"};
      write_recording(run.recording, manifest.resolve(entry.recording));
      write_events(run.events, manifest.resolve(entry.events));
      subject.runs.push_back(std::move(entry));
    };
    for (std::size_t r = 0; r < cfg.runs_acquisition; ++r) emit("acq" + std::to_string(r + 1), RunRole::acquisition);
    for (std::size_t r = 0; r < cfg.runs_online; ++r) emit("onl" + std::to_string(r + 1), RunRole::online);
    manifest.subjects.push_back(std::move(subject));
  }
  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace restfuse
