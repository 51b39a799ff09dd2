#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/epochs.hpp"
#include "restfuse/error.hpp"
#include "restfuse/wavelet.hpp"

namespace restfuse {

enum class Metric { coh, plv };

inline const char* to_string(Metric m) { return m == Metric::coh ? "coh" : "plv"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "coh") return Metric::coh;
  if (s == "plv") return Metric::plv;
  fail(ErrorKind::validation, "unknown metric '" + s + "' (expected coh or plv)");
}

/// Below this many epochs the across-epoch expectation is poorly estimated
/// (with one epoch, coherence is identically 1).
inline constexpr std::size_t min_connectivity_epochs = 8;

struct ConnectivityDiagnostics {
  std::size_t zero_phasor_points = 0;  // |S_xy| == 0, counted as a zero phasor
  std::size_t zero_power_points = 0;   // S_xx * S_yy == 0, coherence taken as 0
  std::vector<std::string> warnings;

  void merge(const ConnectivityDiagnostics& o) {
    zero_phasor_points += o.zero_phasor_points;
    zero_power_points += o.zero_power_points;
    warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
  }
};

namespace detail {

struct PairRowSums {
  double coh = 0;  // sum over time of COH(f, t)
  double plv = 0;  // sum over time of PLV(f, t)
};

// Expectations over epochs at each time point of one frequency row, summed
// over time. Both the single-pair API and the feature extractor go through
// here so their summation order is identical.
inline PairRowSums pair_row_sums(const Tfr& tfr, std::size_t i, std::size_t j, std::size_t f,
                                 ConnectivityDiagnostics& diag) {
  const std::size_t ne = tfr.n_epochs;
  PairRowSums sums;
  for (std::size_t t = 0; t < tfr.n_times; ++t) {
    cplx sxy{};
    cplx phasor{};
    double sxx = 0.0, syy = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const cplx wi = tfr.row(e, i, f)[t];
      const cplx wj = tfr.row(e, j, f)[t];
      const cplx cross = wi * std::conj(wj);
      sxy += cross;
      sxx += std::norm(wi);
      syy += std::norm(wj);
      const double mag = std::abs(cross);
      if (mag > 0.0) {
        phasor += cross / mag;
      } else {
        ++diag.zero_phasor_points;
      }
    }
    const double inv = 1.0 / static_cast<double>(ne);
    const double denom = std::sqrt((sxx * inv) * (syy * inv));
    if (denom > 0.0) {
      sums.coh += std::min(1.0, std::abs(sxy * inv) / denom);
    } else {
      ++diag.zero_power_points;
    }
    sums.plv += std::min(1.0, std::abs(phasor * inv));
  }
  return sums;
}

inline void check_pair(const Tfr& tfr, std::size_t i, std::size_t j, const std::vector<std::size_t>& rows) {
  require(tfr.n_epochs >= 1, ErrorKind::validation, "connectivity needs at least one epoch");
  require(i < j && j < tfr.n_channels, ErrorKind::parameter, "channel pair must satisfy i < j < n_channels");
  require(!rows.empty(), ErrorKind::parameter, "no frequency rows selected");
  for (auto f : rows) require(f < tfr.n_freqs, ErrorKind::parameter, "frequency row out of range");
}

}  // namespace detail

/// Coherence |E[S_xy]| / sqrt(E[S_xx] E[S_yy]) with E over epochs, averaged
/// over the selected frequency rows and all time points.
inline double coherence(const Tfr& tfr, std::size_t i, std::size_t j, const std::vector<std::size_t>& band_rows,
                        ConnectivityDiagnostics* diag = nullptr) {
  detail::check_pair(tfr, i, j, band_rows);
  ConnectivityDiagnostics local;
  double total = 0.0;
  for (auto f : band_rows) total += detail::pair_row_sums(tfr, i, j, f, local).coh;
  if (diag) diag->merge(local);
  return total / static_cast<double>(band_rows.size() * tfr.n_times);
}

/// Phase-locking value |E[S_xy / |S_xy|]|, averaged like `coherence`.
inline double plv(const Tfr& tfr, std::size_t i, std::size_t j, const std::vector<std::size_t>& band_rows,
                  ConnectivityDiagnostics* diag = nullptr) {
  detail::check_pair(tfr, i, j, band_rows);
  ConnectivityDiagnostics local;
  double total = 0.0;
  for (auto f : band_rows) total += detail::pair_row_sums(tfr, i, j, f, local).plv;
  if (diag) diag->merge(local);
  return total / static_cast<double>(band_rows.size() * tfr.n_times);
}

inline std::vector<std::size_t> all_rows(const Tfr& tfr) {
  std::vector<std::size_t> r(tfr.n_freqs);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

/// Per-subject resting-state fingerprint. Layout: band-major, then metric,
/// then upper-triangle channel pairs (i < j) in row-major order.
struct ConnectivityFeatures {
  std::string subject_id;
  std::size_t n_channels = 0;
  std::vector<std::string> bands;
  std::vector<std::string> metrics;
  std::vector<double> values;

  bool operator==(const ConnectivityFeatures&) const = default;
};

inline std::size_t n_pairs(std::size_t n_channels) { return n_channels * (n_channels - 1) / 2; }

inline std::size_t feature_length(std::size_t n_channels, std::size_t n_bands, std::size_t n_metrics) {
  return n_bands * n_metrics * n_pairs(n_channels);
}

struct FeatureResult {
  ConnectivityFeatures features;
  ConnectivityDiagnostics diagnostics;
};

/// Uses all of one subject's rest epochs as the expectation ensemble.
/// Processes one frequency at a time so memory stays O(epochs x channels x times).
inline FeatureResult connectivity_features(const EpochSet& rest, const std::vector<BandSpec>& bands,
                                           const std::vector<Metric>& metrics, double samples_per_hz = 4.0) {
  require(rest.kind == EpochKind::rest, ErrorKind::validation, "connectivity features need rest epochs");
  require(!rest.empty(), ErrorKind::validation, "connectivity features need at least one rest epoch");
  require(!bands.empty() && !metrics.empty(), ErrorKind::validation, "need at least one band and one metric");
  require(rest.n_channels >= 2, ErrorKind::validation, "connectivity needs at least 2 channels");
  const std::string& subject = rest.subject_ids.front();
  for (const auto& s : rest.subject_ids)
    require(s == subject, ErrorKind::validation, "rest epochs mix subjects '" + subject + "' and '" + s + "'");

  FeatureResult result;
  auto& feat = result.features;
  feat.subject_id = subject;
  feat.n_channels = rest.n_channels;
  for (const auto& b : bands) feat.bands.push_back(b.name);
  for (auto m : metrics) feat.metrics.push_back(to_string(m));
  if (rest.size() < min_connectivity_epochs) {
    result.diagnostics.warnings.push_back("subject " + subject + ": only " + std::to_string(rest.size()) +
                                          " rest epochs (fewer than " + std::to_string(min_connectivity_epochs) +
                                          "); connectivity estimates are biased towards 1");
  }

  const std::size_t nc = rest.n_channels;
  const std::size_t np = n_pairs(nc);
  feat.values.assign(feature_length(nc, bands.size(), metrics.size()), 0.0);

  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto grid = band_freq_grid(bands[b], samples_per_hz);
    std::vector<double> coh_acc(np, 0.0), plv_acc(np, 0.0);
    for (std::size_t f = 0; f < grid.size(); ++f) {
      const FreqGrid single{{grid.freqs[f]}, {grid.n_cycles[f]}};
      const Tfr tfr = cwt(rest, single);
      std::size_t p = 0;
      for (std::size_t i = 0; i < nc; ++i) {
        for (std::size_t j = i + 1; j < nc; ++j, ++p) {
          const auto s = detail::pair_row_sums(tfr, i, j, 0, result.diagnostics);
          coh_acc[p] += s.coh;
          plv_acc[p] += s.plv;
        }
      }
    }
    const double norm = static_cast<double>(grid.size() * rest.n_times);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      const auto& acc = metrics[m] == Metric::coh ? coh_acc : plv_acc;
      double* dst = feat.values.data() + (b * metrics.size() + m) * np;
      for (std::size_t p = 0; p < np; ++p) dst[p] = std::clamp(acc[p] / norm, 0.0, 1.0);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON: values written with 17 significant digits so they parse back exactly.

inline std::string format_double17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string features_to_json(const ConnectivityFeatures& f) {
  std::ostringstream os;
  const auto str_list = [&](const std::vector<std::string>& xs) {
    os << '[';
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << nlohmann::json(xs[i]).dump();
    os << ']';
  };
  os << "{\"subject_id\":" << nlohmann::json(f.subject_id).dump() << ",\"n_channels\":" << f.n_channels
     << ",\"bands\":";
  str_list(f.bands);
  os << ",\"metrics\":";
  str_list(f.metrics);
  os << ",\"values\":[";
  for (std::size_t i = 0; i < f.values.size(); ++i) os << (i ? "," : "") << format_double17(f.values[i]);
  os << "]}";
  return os.str();
}

inline ConnectivityFeatures features_from_json(const nlohmann::json& j) {
  ConnectivityFeatures f;
  try {
    f.subject_id = j.at("subject_id").get<std::string>();
    f.n_channels = j.at("n_channels").get<std::size_t>();
    f.bands = j.at("bands").get<std::vector<std::string>>();
    f.metrics = j.at("metrics").get<std::vector<std::string>>();
    f.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed connectivity features: ") + e.what());
  }
  require(f.n_channels >= 2 && f.values.size() == feature_length(f.n_channels, f.bands.size(), f.metrics.size()),
          ErrorKind::validation, "connectivity feature length does not match its layout");
  return f;
}

/// A file holds a JSON array of per-subject feature objects.
inline void write_features(const std::vector<ConnectivityFeatures>& all, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open for writing: " + path);
  os << "[\n";
  for (std::size_t i = 0; i < all.size(); ++i) os << features_to_json(all[i]) << (i + 1 < all.size() ? ",\n" : "\n");
  os << "]\n";
  require(static_cast<bool>(os), ErrorKind::io, "write failed: " + path);
}

inline std::vector<ConnectivityFeatures> read_features(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open features file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, "features file " + path + " is not valid JSON: " + e.what());
  }
  require(j.is_array(), ErrorKind::validation, "features file must hold a JSON array");
  std::vector<ConnectivityFeatures> out;
  for (const auto& item : j) out.push_back(features_from_json(item));
  return out;
}

}  // namespace restfuse
