#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "restfuse/binary_io.hpp"
#include "restfuse/error.hpp"
#include "restfuse/recording.hpp"

namespace restfuse {

enum class EpochKind : std::uint8_t { task = 0, rest = 1 };

inline const char* to_string(EpochKind k) { return k == EpochKind::task ? "task" : "rest"; }

/// Fixed-length segments, stored [epoch][channel][time] in double precision.
/// Task epochs carry a class label (1 or 2); rest epochs carry none.
struct EpochSet {
  EpochKind kind = EpochKind::task;
  std::uint32_t sample_rate = 0;
  std::size_t n_channels = 0;
  std::size_t n_times = 0;
  std::vector<std::string> channel_names;
  std::vector<double> data;
  std::vector<int> labels;  // empty for rest
  std::vector<std::string> subject_ids;
  std::vector<std::string> run_ids;

  std::size_t size() const { return subject_ids.size(); }
  bool empty() const { return subject_ids.empty(); }
  std::size_t epoch_stride() const { return n_channels * n_times; }

  std::span<const double> epoch(std::size_t e) const { return {data.data() + e * epoch_stride(), epoch_stride()}; }
  std::span<double> epoch(std::size_t e) { return {data.data() + e * epoch_stride(), epoch_stride()}; }
  std::span<const double> row(std::size_t e, std::size_t c) const {
    return {data.data() + e * epoch_stride() + c * n_times, n_times};
  }
  std::span<double> row(std::size_t e, std::size_t c) { return {data.data() + e * epoch_stride() + c * n_times, n_times}; }

  bool operator==(const EpochSet&) const = default;
};

inline void validate(const EpochSet& s) {
  const std::size_t n = s.size();
  require(s.run_ids.size() == n, ErrorKind::validation, "epoch run ids out of step with subject ids");
  require(s.data.size() == n * s.epoch_stride(), ErrorKind::validation, "epoch data size mismatch");
  require(s.channel_names.size() == s.n_channels, ErrorKind::validation, "epoch channel names mismatch");
  if (s.kind == EpochKind::task) {
    require(s.labels.size() == n, ErrorKind::validation, "task epochs must all carry labels");
    for (int l : s.labels) require(l == left_hand || l == right_hand, ErrorKind::validation, "task label not in {1,2}");
  } else {
    require(s.labels.empty(), ErrorKind::validation, "rest epochs carry no labels");
  }
}

/// Converts a duration in seconds to an exact sample count; non-integral
/// products are rejected so every epoch has identical length.
inline std::int64_t exact_samples(double seconds, double sample_rate, const std::string& what) {
  const double v = seconds * sample_rate;
  const double r = std::round(v);
  require(std::abs(v - r) < 1e-9, ErrorKind::parameter,
          what + " of " + std::to_string(seconds) + " s is not a whole number of samples at " +
              std::to_string(sample_rate) + " Hz");
  return static_cast<std::int64_t>(r);
}

/// One epoch per event whose code is in `trigger_codes`, covering samples
/// [onset + start*fs, onset + (start+len)*fs).
inline EpochSet extract_epochs(const Recording& rec, const EventList& events, double window_start_s,
                               double window_len_s, const std::set<int>& trigger_codes, EpochKind kind,
                               const std::string& subject_id = {}, const std::string& run_id = {}) {
  validate(rec);
  const double fs = rec.sample_rate;
  const std::int64_t offset = exact_samples(window_start_s, fs, "window start");
  const std::int64_t len = exact_samples(window_len_s, fs, "window length");
  require(len > 0, ErrorKind::parameter, "window length must be positive");

  EpochSet out;
  out.kind = kind;
  out.sample_rate = rec.sample_rate;
  out.n_channels = rec.n_channels();
  out.n_times = static_cast<std::size_t>(len);
  out.channel_names = rec.channel_names;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!trigger_codes.contains(ev.code)) continue;
    const std::int64_t begin = static_cast<std::int64_t>(ev.onset_sample) + offset;
    const std::int64_t end = begin + len;
    require(begin >= 0 && end <= static_cast<std::int64_t>(rec.n_samples), ErrorKind::range,
            "window [" + std::to_string(begin) + ", " + std::to_string(end) + ") of event #" + std::to_string(i) +
                " (onset " + std::to_string(ev.onset_sample) + ", code " + std::to_string(ev.code) +
                ") exceeds recording of " + std::to_string(rec.n_samples) + " samples");
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      const auto src = rec.channel(c).subspan(static_cast<std::size_t>(begin), out.n_times);
      out.data.insert(out.data.end(), src.begin(), src.end());
    }
    if (kind == EpochKind::task) out.labels.push_back(ev.code);
    out.subject_ids.push_back(subject_id);
    out.run_ids.push_back(run_id);
  }
  return out;
}

/// Subtracts each channel's mean over the whole epoch.
inline EpochSet baseline_correct(EpochSet epochs) {
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    for (std::size_t c = 0; c < epochs.n_channels; ++c) {
      auto r = epochs.row(e, c);
      double mean = 0.0;
      for (double v : r) mean += v;
      mean /= static_cast<double>(r.size());
      for (double& v : r) v -= mean;
    }
  }
  return epochs;
}

/// Appends `more` to `into`; shapes and kind must agree (an empty target adopts them).
inline void append(EpochSet& into, const EpochSet& more) {
  if (into.empty() && into.data.empty() && into.n_times == 0) {
    into = more;
    return;
  }
  require(into.kind == more.kind && into.n_channels == more.n_channels && into.n_times == more.n_times &&
              into.sample_rate == more.sample_rate,
          ErrorKind::shape, "cannot append epoch sets of different shape or kind");
  into.data.insert(into.data.end(), more.data.begin(), more.data.end());
  into.labels.insert(into.labels.end(), more.labels.begin(), more.labels.end());
  into.subject_ids.insert(into.subject_ids.end(), more.subject_ids.begin(), more.subject_ids.end());
  into.run_ids.insert(into.run_ids.end(), more.run_ids.begin(), more.run_ids.end());
}

inline EpochSet select(const EpochSet& src, std::span<const std::size_t> indices) {
  EpochSet out;
  out.kind = src.kind;
  out.sample_rate = src.sample_rate;
  out.n_channels = src.n_channels;
  out.n_times = src.n_times;
  out.channel_names = src.channel_names;
  out.data.reserve(indices.size() * src.epoch_stride());
  for (std::size_t i : indices) {
    require(i < src.size(), ErrorKind::range, "epoch index out of range");
    const auto e = src.epoch(i);
    out.data.insert(out.data.end(), e.begin(), e.end());
    if (src.kind == EpochKind::task) out.labels.push_back(src.labels[i]);
    out.subject_ids.push_back(src.subject_ids[i]);
    out.run_ids.push_back(src.run_ids[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// .eegepo: "EEGE" | version u16 | kind u8 | n_channels u16 | sample_rate u32 |
// n_epochs u32 | n_times u64 | channel names | payload f32 [epoch][time][channel] |
// per epoch: label i8 (-1 for rest), subject_id, run_id (u8-prefixed strings)

namespace eegepo {
inline constexpr char magic[5] = "EEGE";
inline constexpr std::uint16_t version = 1;
}  // namespace eegepo

inline void write_epochs(const EpochSet& s, const std::string& path) {
  validate(s);
  auto os = binio::open_out(path);
  binio::put_bytes(os, eegepo::magic, 4);
  binio::put<std::uint16_t>(os, eegepo::version);
  binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(s.kind));
  binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(s.n_channels));
  binio::put<std::uint32_t>(os, s.sample_rate);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  binio::put<std::uint64_t>(os, s.n_times);
  for (const auto& name : s.channel_names) binio::put_short_string(os, name);
  std::vector<float> frame(s.n_channels);
  for (std::size_t e = 0; e < s.size(); ++e) {
    for (std::size_t t = 0; t < s.n_times; ++t) {
      for (std::size_t c = 0; c < s.n_channels; ++c) frame[c] = static_cast<float>(s.row(e, c)[t]);
      binio::put_bytes(os, frame.data(), frame.size() * sizeof(float));
    }
  }
  for (std::size_t e = 0; e < s.size(); ++e) {
    binio::put<std::int8_t>(os, static_cast<std::int8_t>(s.kind == EpochKind::task ? s.labels[e] : -1));
    binio::put_short_string(os, s.subject_ids[e]);
    binio::put_short_string(os, s.run_ids[e]);
  }
  binio::finish_write(os, path);
}

inline EpochSet read_epochs(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, eegepo::magic, path);
  const auto ver = binio::get<std::uint16_t>(is, "version");
  require(ver == eegepo::version, ErrorKind::format, "unsupported epoch file version in " + path);
  EpochSet s;
  const auto kind = binio::get<std::uint8_t>(is, "kind");
  require(kind <= 1, ErrorKind::format, "bad epoch kind in " + path);
  s.kind = static_cast<EpochKind>(kind);
  s.n_channels = binio::get<std::uint16_t>(is, "n_channels");
  s.sample_rate = binio::get<std::uint32_t>(is, "sample_rate");
  const auto n_epochs = binio::get<std::uint32_t>(is, "n_epochs");
  s.n_times = binio::get<std::uint64_t>(is, "n_times");
  for (std::size_t c = 0; c < s.n_channels; ++c) s.channel_names.push_back(binio::get_short_string(is, "channel name"));
  std::vector<float> payload(static_cast<std::size_t>(n_epochs) * s.n_times * s.n_channels);
  binio::get_bytes(is, payload.data(), payload.size() * sizeof(float), "epoch payload of " + path);
  s.data.resize(payload.size());
  for (std::size_t e = 0; e < n_epochs; ++e)
    for (std::size_t t = 0; t < s.n_times; ++t)
      for (std::size_t c = 0; c < s.n_channels; ++c)
        s.data[(e * s.n_channels + c) * s.n_times + t] = payload[(e * s.n_times + t) * s.n_channels + c];
  for (std::size_t e = 0; e < n_epochs; ++e) {
    const auto label = binio::get<std::int8_t>(is, "label");
    if (s.kind == EpochKind::task) s.labels.push_back(label);
    s.subject_ids.push_back(binio::get_short_string(is, "subject id"));
    s.run_ids.push_back(binio::get_short_string(is, "run id"));
  }
  validate(s);
  return s;
}

}  // namespace restfuse
