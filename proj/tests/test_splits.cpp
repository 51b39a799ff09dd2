#include <catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"
#include "restfuse/splits.hpp"
#include "restfuse/synth.hpp"

using namespace restfuse;

namespace {

std::vector<TrialInfo> balanced_trials(std::size_t n) {
  std::vector<TrialInfo> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, "s01", "acq1", RunRole::acquisition, i % 2 ? 2 : 1, i});
  return t;
}

// In-memory manifest and trial table: `trials` per run, runs acq1..acqA then onl1..onlO.
std::pair<DatasetManifest, std::vector<TrialInfo>> fake_dataset(std::size_t subjects, std::size_t acq, std::size_t onl,
                                                                std::size_t trials) {
  DatasetManifest m;
  std::vector<TrialInfo> all;
  for (std::size_t s = 0; s < subjects; ++s) {
    SubjectEntry e{subject_label(s), {}};
    const auto add = [&](const std::string& run, RunRole role) {
      e.runs.push_back({run, role, run + ".eegrec", run + ".csv"});
      for (std::size_t k = 0; k < trials; ++k)
        all.push_back({all.size(), e.subject_id, run, role, k % 2 ? 2 : 1, k});
    };
    for (std::size_t r = 0; r < acq; ++r) add("acq" + std::to_string(r + 1), RunRole::acquisition);
    for (std::size_t r = 0; r < onl; ++r) add("onl" + std::to_string(r + 1), RunRole::online);
    m.subjects.push_back(e);
  }
  return {m, all};
}

}  // namespace

TEST_CASE("100 balanced trials make five stratified folds of 20") {
  const auto trials = balanced_trials(100);
  const auto folds = kfold_split(trials, 5, 7);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.val.size() == 20);
    CHECK(f.train.size() == 80);
    std::size_t ones = 0;
    for (auto id : f.val) ones += trials[id].label == 1;
    CHECK(ones == 10);
    std::set<std::size_t> tr(f.train.begin(), f.train.end());
    for (auto id : f.val) {
      CHECK_FALSE(tr.contains(id));
      CHECK(seen.insert(id).second);
    }
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("fold sizes differ by at most one for uneven counts") {
  auto trials = balanced_trials(37);
  const auto folds = kfold_split(trials, 5, 1);
  std::size_t lo = 1000, hi = 0;
  for (const auto& f : folds) {
    lo = std::min(lo, f.val.size());
    hi = std::max(hi, f.val.size());
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("k-fold is deterministic per seed and rejects bad k") {
  const auto trials = balanced_trials(40);
  const auto a = kfold_split(trials, 5, 3), b = kfold_split(trials, 5, 3), c = kfold_split(trials, 5, 4);
  for (std::size_t f = 0; f < 5; ++f) CHECK(a[f].val == b[f].val);
  bool differs = false;
  for (std::size_t f = 0; f < 5; ++f) differs |= a[f].val != c[f].val;
  CHECK(differs);
  try {
    kfold_split(trials, 1, 0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parameter);
  }
  CHECK_THROWS_AS(kfold_split(balanced_trials(6), 5, 0), Error);
}

TEST_CASE("default holdout on 59 subjects leaves 50 for training") {
  auto [m, trials] = fake_dataset(59, 2, 0, 4);
  const auto plan = lso_split(m, trials, "last:9", 2, 0);
  CHECK(plan.train_subjects.size() == 50);
  CHECK(plan.test_subjects.size() == 9);
  CHECK(plan.test_subjects.front() == "s51");
  CHECK(plan.test.size() == 9 * 2 * 4);
}

TEST_CASE("explicit holdout and its errors") {
  auto [m, trials] = fake_dataset(4, 2, 1, 10);
  const auto plan = lso_split(m, trials, "ids:s01", 5, 0);
  CHECK(plan.train_subjects == std::vector<std::string>{"s02", "s03", "s04"});
  const std::set<std::string> train(plan.train_subjects.begin(), plan.train_subjects.end());
  for (auto id : plan.test) CHECK(trials[id].subject_id == "s01");
  for (const auto& f : plan.folds) {
    for (auto id : f.train) {
      CHECK(train.contains(trials[id].subject_id));
      CHECK(trials[id].role == RunRole::acquisition);
    }
  }
  CHECK(plan.test.size() == 30);
  CHECK_THROWS_AS(lso_split(m, trials, "ids:s09", 5, 0), Error);
  CHECK_THROWS_AS(lso_split(m, trials, "ids:s01,s02,s03,s04", 5, 0), Error);
  CHECK_THROWS_AS(lso_split(m, trials, "last:4", 5, 0), Error);
  CHECK_THROWS_AS(lso_split(m, trials, "first:1", 5, 0), Error);
}

TEST_CASE("online split counts") {
  auto [m, trials] = fake_dataset(3, 2, 4, 10);
  const auto plan = online_split(m, trials, 5, 0);
  std::size_t dev = 0;
  for (const auto& f : plan.folds) dev += f.val.size();
  CHECK(plan.test.size() == 2 * dev);
  CHECK(dev + plan.test.size() == trials.size());
  CHECK(plan.train_subjects == plan.test_subjects);
  for (auto id : plan.test) CHECK(trials[id].role == RunRole::online);

  auto [m2, t2] = fake_dataset(3, 2, 0, 10);
  CHECK_THROWS_AS(online_split(m2, t2, 5, 0), Error);
}

TEST_CASE("trial listing reads events in manifest order") {
  oracle::TempDir dir("splits_synth");
  SynthConfig c;
  c.n_subjects = 2;
  c.trials_per_run = 6;
  c.runs_acquisition = 2;
  c.runs_online = 1;
  c.sample_rate = 64;
  c.n_channels = 2;
  const auto m = synth_dataset(c, dir.path.string());
  const auto trials = list_trials(m);
  CHECK(trials.size() == 2 * 3 * 6);
  for (std::size_t i = 0; i < trials.size(); ++i) CHECK(trials[i].id == i);
  CHECK(trials[6].run_id == "acq2");
  CHECK(trials[6].index_in_run == 0);
  CHECK(trials[18].subject_id == "s02");
  const auto plan = kfold_plan(m, trials, 3, 0);
  std::size_t n = 0;
  for (const auto& f : plan.folds) n += f.val.size();
  CHECK(n == 2 * 2 * 6);
}
