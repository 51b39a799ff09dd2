#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "restfuse/error.hpp"
#include "restfuse/recording.hpp"

namespace restfuse {

enum class RunRole { acquisition, online };

inline const char* to_string(RunRole r) { return r == RunRole::acquisition ? "acquisition" : "online"; }

inline RunRole parse_role(const std::string& s) {
  if (s == "acquisition") return RunRole::acquisition;
  if (s == "online") return RunRole::online;
  fail(ErrorKind::validation, "unknown run role '" + s + "' (expected acquisition or online)");
}

struct RunEntry {
  std::string run_id;
  RunRole role = RunRole::acquisition;
  std::string recording;  // as written in the manifest (relative to base_dir)
  std::string events;
};

struct SubjectEntry {
  std::string subject_id;
  std::vector<RunEntry> runs;
};

struct DatasetManifest {
  std::vector<SubjectEntry> subjects;
  std::filesystem::path base_dir;  // directory holding manifest.json; not serialized

  std::string resolve(const std::string& rel) const { return (base_dir / rel).string(); }

  const SubjectEntry& subject(const std::string& id) const {
    for (const auto& s : subjects)
      if (s.subject_id == id) return s;
    fail(ErrorKind::validation, "unknown subject id '" + id + "'");
  }
};

inline nlohmann::ordered_json to_json(const DatasetManifest& m) {
  nlohmann::ordered_json subjects = nlohmann::ordered_json::array();
  for (const auto& s : m.subjects) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : s.runs) {
      runs.push_back({{"run_id", r.run_id}, {"role", to_string(r.role)}, {"recording", r.recording}, {"events", r.events}});
    }
    subjects.push_back({{"subject_id", s.subject_id}, {"runs", std::move(runs)}});
  }
  return {{"subjects", std::move(subjects)}};
}

/// Structural checks only (no file access).
inline void validate_structure(const DatasetManifest& m) {
  require(!m.subjects.empty(), ErrorKind::validation, "manifest lists no subjects");
  std::set<std::string> ids;
  for (const auto& s : m.subjects) {
    require(!s.subject_id.empty(), ErrorKind::validation, "empty subject_id");
    require(ids.insert(s.subject_id).second, ErrorKind::validation, "duplicate subject_id '" + s.subject_id + "'");
    bool has_acq = false;
    std::set<std::string> run_ids;
    for (const auto& r : s.runs) {
      require(run_ids.insert(r.run_id).second, ErrorKind::validation,
              "duplicate run_id '" + r.run_id + "' for subject " + s.subject_id);
      has_acq = has_acq || r.role == RunRole::acquisition;
    }
    require(has_acq, ErrorKind::validation, "subject " + s.subject_id + " has no acquisition run");
  }
}

/// Checks every referenced recording header and that event files exist.
inline void validate_files(const DatasetManifest& m) {
  for (const auto& s : m.subjects) {
    for (const auto& r : s.runs) {
      const auto rec = m.resolve(r.recording);
      with_stage("manifest " + s.subject_id + "/" + r.run_id, [&] { return read_recording_header(rec); });
      require(std::filesystem::is_regular_file(m.resolve(r.events)), ErrorKind::io,
              "events file not found: " + m.resolve(r.events));
    }
  }
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    for (const auto& js : j.at("subjects")) {
      SubjectEntry s;
      s.subject_id = js.at("subject_id").get<std::string>();
      for (const auto& jr : js.at("runs")) {
        RunEntry r;
        r.run_id = jr.at("run_id").get<std::string>();
        r.role = parse_role(jr.at("role").get<std::string>());
        r.recording = jr.at("recording").get<std::string>();
        r.events = jr.at("events").get<std::string>();
        s.runs.push_back(std::move(r));
      }
      m.subjects.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed manifest: ") + e.what());
  }
  validate_structure(m);
  return m;
}

inline DatasetManifest load_manifest(const std::string& path, bool check_files = true) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open manifest: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, "manifest " + path + " is not valid JSON: " + e.what());
  }
  auto m = manifest_from_json(j, std::filesystem::absolute(path).parent_path());
  if (check_files) validate_files(m);
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  validate_structure(m);
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open for writing: " + path);
  os << to_json(m).dump(2) << '\n';
  require(static_cast<bool>(os), ErrorKind::io, "write failed: " + path);
}

}  // namespace restfuse
