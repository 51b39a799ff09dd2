#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/error.hpp"
#include "restfuse/manifest.hpp"
#include "restfuse/recording.hpp"
#include "restfuse/rng.hpp"

namespace restfuse {

/// One task trial, identified from event files alone (no EEG samples read).
struct TrialInfo {
  std::size_t id = 0;  // position in manifest order
  std::string subject_id;
  std::string run_id;
  RunRole role = RunRole::acquisition;
  int label = 0;               // class code 1 or 2
  std::size_t index_in_run = 0;  // position among the run's task epochs
};

/// Walks subjects, runs and events in manifest order.
inline std::vector<TrialInfo> list_trials(const DatasetManifest& m) {
  std::vector<TrialInfo> out;
  for (const auto& s : m.subjects) {
    for (const auto& r : s.runs) {
      const auto events = with_stage("events " + s.subject_id + "/" + r.run_id, [&] { return read_events(m.resolve(r.events)); });
      std::size_t k = 0;
      for (const auto& e : events) {
        if (e.code != left_hand && e.code != right_hand) continue;
        out.push_back({out.size(), s.subject_id, r.run_id, r.role, e.code, k++});
      }
    }
  }
  return out;
}

enum class SplitKind { kfold, online, lso };

inline const char* to_string(SplitKind k) {
  switch (k) {
    case SplitKind::kfold: return "kfold";
    case SplitKind::online: return "online";
    case SplitKind::lso: return "lso";
  }
  return "?";
}

inline SplitKind parse_split(const std::string& s) {
  if (s == "kfold") return SplitKind::kfold;
  if (s == "online") return SplitKind::online;
  if (s == "lso") return SplitKind::lso;
  fail(ErrorKind::validation, "unknown split '" + s + "' (expected kfold, online or lso)");
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Folds partition the development trials; `test` is empty for kfold.
struct SplitPlan {
  SplitKind kind = SplitKind::kfold;
  std::vector<Fold> folds;
  std::vector<std::size_t> test;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::uint64_t seed = 0;
};

/// Stratified k-fold over the given trials. Each class is shuffled with its
/// own seeded stream and dealt round-robin, continuing across classes so
/// fold sizes differ by at most one.
inline std::vector<Fold> kfold_split(const std::vector<TrialInfo>& trials, std::size_t k, std::uint64_t seed) {
  require(k >= 2, ErrorKind::parameter, "k-fold needs k >= 2, got " + std::to_string(k));
  std::map<int, std::vector<std::size_t>> by_class;
  for (const auto& t : trials) by_class[t.label].push_back(t.id);
  require(!by_class.empty(), ErrorKind::validation, "no trials to split");
  for (const auto& [label, ids] : by_class) {
    require(ids.size() >= k, ErrorKind::validation,
            "class " + std::to_string(label) + " has " + std::to_string(ids.size()) + " trials, fewer than k=" +
                std::to_string(k));
  }
  std::vector<std::vector<std::size_t>> members(k);
  std::size_t next = 0;
  for (auto& [label, ids] : by_class) {
    Rng(seed, "kfold/class" + std::to_string(label)).shuffle(std::span<std::size_t>(ids));
    for (auto id : ids) {
      members[next].push_back(id);
      next = (next + 1) % k;
    }
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].val = members[f];
    std::sort(folds[f].val.begin(), folds[f].val.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

inline std::vector<std::string> subject_ids(const DatasetManifest& m) {
  std::vector<std::string> ids;
  for (const auto& s : m.subjects) ids.push_back(s.subject_id);
  return ids;
}

/// "last:N" (default last:9) or "ids:a,b,c".
inline std::vector<std::string> resolve_holdout(const DatasetManifest& m, const std::string& spec) {
  const auto all = subject_ids(m);
  std::vector<std::string> out;
  if (spec.rfind("last:", 0) == 0) {
    std::size_t n = 0;
    try {
      n = std::stoul(spec.substr(5));
    } catch (const std::exception&) {
      fail(ErrorKind::validation, "bad holdout count in '" + spec + "'");
    }
    require(n >= 1, ErrorKind::validation, "holdout must name at least one subject");
    require(n < all.size(), ErrorKind::validation,
            "holdout of " + std::to_string(n) + " subjects leaves none of " + std::to_string(all.size()) + " for training");
    out.assign(all.end() - static_cast<std::ptrdiff_t>(n), all.end());
  } else if (spec.rfind("ids:", 0) == 0) {
    std::stringstream ss(spec.substr(4));
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (id.empty()) continue;
      require(std::find(all.begin(), all.end(), id) != all.end(), ErrorKind::validation,
              "holdout subject '" + id + "' is not in the manifest");
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    require(!out.empty(), ErrorKind::validation, "holdout list is empty");
  } else {
    fail(ErrorKind::validation, "holdout must be 'last:N' or 'ids:a,b,...', got '" + spec + "'");
  }
  require(out.size() < all.size(), ErrorKind::validation, "holdout covers every subject; nothing left to train on");
  return out;
}

/// Pooled-subject k-fold over all acquisition trials.
inline SplitPlan kfold_plan(const DatasetManifest& m, const std::vector<TrialInfo>& trials, std::size_t k,
                            std::uint64_t seed) {
  SplitPlan plan;
  plan.kind = SplitKind::kfold;
  plan.seed = seed;
  plan.train_subjects = subject_ids(m);
  std::vector<TrialInfo> dev;
  for (const auto& t : trials)
    if (t.role == RunRole::acquisition) dev.push_back(t);
  plan.folds = kfold_split(dev, k, seed);
  return plan;
}

/// Train on acquisition runs, test on online runs of the same subjects;
/// the acquisition trials are further split into k folds for model selection.
inline SplitPlan online_split(const DatasetManifest& m, const std::vector<TrialInfo>& trials, std::size_t k,
                              std::uint64_t seed) {
  SplitPlan plan;
  plan.kind = SplitKind::online;
  plan.seed = seed;
  plan.train_subjects = subject_ids(m);
  plan.test_subjects = plan.train_subjects;
  std::vector<TrialInfo> dev;
  for (const auto& t : trials) {
    if (t.role == RunRole::acquisition) {
      dev.push_back(t);
    } else {
      plan.test.push_back(t.id);
    }
  }
  require(!plan.test.empty(), ErrorKind::validation, "online split needs online runs, but the manifest has none");
  plan.folds = kfold_split(dev, k, seed);
  return plan;
}

/// Leave-subjects-out: train on the acquisition trials of the remaining
/// subjects, test on every trial of the held-out subjects.
inline SplitPlan lso_split(const DatasetManifest& m, const std::vector<TrialInfo>& trials,
                           const std::string& holdout_spec, std::size_t k, std::uint64_t seed) {
  SplitPlan plan;
  plan.kind = SplitKind::lso;
  plan.seed = seed;
  plan.test_subjects = resolve_holdout(m, holdout_spec);
  const std::set<std::string> held(plan.test_subjects.begin(), plan.test_subjects.end());
  for (const auto& id : subject_ids(m))
    if (!held.contains(id)) plan.train_subjects.push_back(id);
  std::vector<TrialInfo> dev;
  for (const auto& t : trials) {
    if (held.contains(t.subject_id)) {
      plan.test.push_back(t.id);
    } else if (t.role == RunRole::acquisition) {
      dev.push_back(t);
    }
  }
  plan.folds = kfold_split(dev, k, seed);
  return plan;
}

inline nlohmann::ordered_json to_json(const SplitPlan& p) {
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : p.folds) folds.push_back({{"train", f.train}, {"val", f.val}});
  return {{"kind", to_string(p.kind)},
          {"seed", p.seed},
          {"train_subjects", p.train_subjects},
          {"test_subjects", p.test_subjects},
          {"folds", std::move(folds)},
          {"test", p.test}};
}

}  // namespace restfuse
