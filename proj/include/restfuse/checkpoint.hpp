#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "restfuse/binary_io.hpp"
#include "restfuse/eegnet.hpp"
#include "restfuse/error.hpp"

namespace restfuse {

// "EEGM" | version u16 | header_len u64 | header JSON | n_blobs u32 |
// per blob: name_len u16 + name | rank u8 | dims u64[rank] | f64 values
namespace eegm {
inline constexpr char magic[5] = "EEGM";
inline constexpr std::uint16_t version = 1;
}  // namespace eegm

/// `extra` is merged into the header next to the architecture config
/// (seed, epoch, metric history, ...).
inline void save_checkpoint(EegNet& model, const std::string& path, const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json header;
  header["config"] = to_json(model.config());
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) header[it.key()] = it.value();
  const std::string text = header.dump();

  const StateDict state = model.state_dict();
  auto os = binio::open_out(path);
  binio::put_bytes(os, eegm::magic, 4);
  binio::put<std::uint16_t>(os, eegm::version);
  binio::put<std::uint64_t>(os, text.size());
  binio::put_bytes(os, text.data(), text.size());
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(state.entries.size()));
  for (const auto& [name, t] : state.entries) {
    binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    binio::put_bytes(os, name.data(), name.size());
    binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape) binio::put<std::uint64_t>(os, d);
    binio::put_bytes(os, t.values.data(), t.values.size() * sizeof(double));
  }
  binio::finish_write(os, path);
}

struct LoadedCheckpoint {
  nlohmann::json header;
  EegNet model;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, eegm::magic, path);
  const auto ver = binio::get<std::uint16_t>(is, "version");
  require(ver == eegm::version, ErrorKind::format, "unsupported checkpoint version in " + path);
  const auto len = binio::get<std::uint64_t>(is, "header length");
  require(len < (1ULL << 30), ErrorKind::format, "implausible checkpoint header length");
  std::string text(len, '\0');
  binio::get_bytes(is, text.data(), len, "checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "checkpoint header is not JSON: " + std::string(e.what()));
  }
  EegNet model(eegnet_config_from_json(header.at("config")));

  StateDict state;
  const auto n = binio::get<std::uint32_t>(is, "blob count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto name_len = binio::get<std::uint16_t>(is, "blob name length");
    std::string name(name_len, '\0');
    binio::get_bytes(is, name.data(), name_len, "blob name");
    const auto rank = binio::get<std::uint8_t>(is, "blob rank");
    require(rank >= 1 && rank <= 4, ErrorKind::format, "bad tensor rank for " + name);
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(binio::get<std::uint64_t>(is, "blob dim"));
    Tensor t(shape);
    binio::get_bytes(is, t.values.data(), t.values.size() * sizeof(double), "blob " + name);
    state.entries.emplace_back(std::move(name), std::move(t));
  }
  model.load_state_dict(state);
  return {std::move(header), std::move(model)};
}

}  // namespace restfuse
