#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "restfuse/binary_io.hpp"
#include "restfuse/error.hpp"

namespace restfuse {

/// Multichannel raw EEG. Samples are held channel-major as 32-bit floats,
/// exactly what the .eegrec payload stores; processing promotes to double.
struct Recording {
  std::vector<std::string> channel_names;
  std::uint32_t sample_rate = 0;
  std::size_t n_samples = 0;
  std::vector<float> samples;  // [channel][sample]

  std::size_t n_channels() const { return channel_names.size(); }

  std::span<float> channel(std::size_t c) { return {samples.data() + c * n_samples, n_samples}; }
  std::span<const float> channel(std::size_t c) const { return {samples.data() + c * n_samples, n_samples}; }

  bool operator==(const Recording&) const = default;
};

inline void validate(const Recording& r) {
  require(r.n_channels() >= 2, ErrorKind::validation,
          "recording needs at least 2 channels, has " + std::to_string(r.n_channels()));
  require(r.n_channels() <= 0xFFFF, ErrorKind::validation, "too many channels for .eegrec");
  require(r.n_samples >= 1, ErrorKind::validation, "recording has no samples");
  require(r.sample_rate > 0, ErrorKind::validation, "sample rate must be positive");
  require(r.samples.size() == r.n_channels() * r.n_samples, ErrorKind::validation,
          "sample buffer size does not match channels x samples");
}

namespace eegrec {
inline constexpr char magic[5] = "EEGR";
inline constexpr std::uint16_t version = 1;

struct Header {
  std::vector<std::string> channel_names;
  std::uint32_t sample_rate = 0;
  std::uint64_t n_samples = 0;
};

inline Header read_header(std::istream& is, const std::string& path) {
  binio::expect_magic(is, magic, path);
  const auto ver = binio::get<std::uint16_t>(is, "version");
  require(ver == version, ErrorKind::format,
          "unsupported .eegrec version " + std::to_string(ver) + " in " + path);
  Header h;
  const auto n_channels = binio::get<std::uint16_t>(is, "n_channels");
  h.sample_rate = binio::get<std::uint32_t>(is, "sample_rate");
  h.n_samples = binio::get<std::uint64_t>(is, "n_samples");
  h.channel_names.reserve(n_channels);
  for (std::uint16_t c = 0; c < n_channels; ++c) {
    h.channel_names.push_back(binio::get_short_string(is, "channel name"));
  }
  require(n_channels >= 2, ErrorKind::format, path + ": fewer than 2 channels");
  require(h.sample_rate > 0, ErrorKind::format, path + ": zero sample rate");
  require(h.n_samples >= 1, ErrorKind::format, path + ": zero samples");
  return h;
}
}  // namespace eegrec

/// Reads and validates only the header; used when checking manifests.
inline eegrec::Header read_recording_header(const std::string& path) {
  auto is = binio::open_in(path);
  return eegrec::read_header(is, path);
}

inline void write_recording(const Recording& r, const std::string& path) {
  validate(r);
  auto os = binio::open_out(path);
  binio::put_bytes(os, eegrec::magic, 4);
  binio::put<std::uint16_t>(os, eegrec::version);
  binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(r.n_channels()));
  binio::put<std::uint32_t>(os, r.sample_rate);
  binio::put<std::uint64_t>(os, r.n_samples);
  for (const auto& name : r.channel_names) binio::put_short_string(os, name);

  // frame-interleaved: all channels of sample 0, then sample 1, ...
  const std::size_t nc = r.n_channels();
  std::vector<float> frame(nc);
  for (std::size_t t = 0; t < r.n_samples; ++t) {
    for (std::size_t c = 0; c < nc; ++c) frame[c] = r.samples[c * r.n_samples + t];
    binio::put_bytes(os, frame.data(), nc * sizeof(float));
  }
  binio::finish_write(os, path);
}

inline Recording read_recording(const std::string& path) {
  auto is = binio::open_in(path);
  auto h = eegrec::read_header(is, path);
  Recording r;
  r.channel_names = std::move(h.channel_names);
  r.sample_rate = h.sample_rate;
  r.n_samples = h.n_samples;
  const std::size_t nc = r.n_channels();

  std::vector<float> interleaved(nc * r.n_samples);
  binio::get_bytes(is, interleaved.data(), interleaved.size() * sizeof(float), "sample payload of " + path);
  r.samples.resize(interleaved.size());
  for (std::size_t t = 0; t < r.n_samples; ++t) {
    for (std::size_t c = 0; c < nc; ++c) r.samples[c * r.n_samples + t] = interleaved[t * nc + c];
  }
  validate(r);
  return r;
}

// ---------------------------------------------------------------------------
// Events

enum EventCode : int { trial_start = 0, left_hand = 1, right_hand = 2 };

struct Event {
  std::uint64_t onset_sample = 0;
  int code = 0;
  bool operator==(const Event&) const = default;
};

using EventList = std::vector<Event>;

inline void validate(const EventList& events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    require(e.code == trial_start || e.code == left_hand || e.code == right_hand, ErrorKind::validation,
            "unknown event code " + std::to_string(e.code) + " at row " + std::to_string(i + 1));
    if (i > 0) {
      require(e.onset_sample > events[i - 1].onset_sample, ErrorKind::validation,
              "event onsets not strictly increasing at row " + std::to_string(i + 1) + " (" +
                  std::to_string(events[i - 1].onset_sample) + " then " + std::to_string(e.onset_sample) + ")");
    }
  }
}

/// Parses "onset_sample,code" CSV text. The header line is optional.
inline EventList parse_events(const std::string& text, const std::string& origin = "<events>") {
  EventList events;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "onset_sample,code") continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorKind::validation,
            origin + ":" + std::to_string(line_no) + ": expected 'onset_sample,code'");
    try {
      std::size_t used = 0;
      const std::string onset_s = line.substr(0, comma);
      const std::string code_s = line.substr(comma + 1);
      require(!onset_s.empty() && onset_s[0] != '-', ErrorKind::validation, "negative onset");
      const unsigned long long onset = std::stoull(onset_s, &used);
      require(used == onset_s.size(), ErrorKind::validation, "trailing characters");
      const int code = std::stoi(code_s, &used);
      require(used == code_s.size(), ErrorKind::validation, "trailing characters");
      events.push_back({onset, code});
    } catch (const Error& e) {
      fail(ErrorKind::validation, origin + ":" + std::to_string(line_no) + ": " + e.message());
    } catch (const std::exception&) {
      fail(ErrorKind::validation, origin + ":" + std::to_string(line_no) + ": not an integer pair: " + line);
    }
  }
  validate(events);
  return events;
}

inline EventList read_events(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open events file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_events(ss.str(), path);
}

inline void write_events(const EventList& events, const std::string& path) {
  validate(events);
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open for writing: " + path);
  os << "onset_sample,code\n";
  for (const auto& e : events) os << e.onset_sample << ',' << e.code << '\n';
  os.flush();
  require(static_cast<bool>(os), ErrorKind::io, "write failed: " + path);
}

}  // namespace restfuse
