#pragma once

#include <filesystem>

#include <json.hpp>

#include "infgnn/model.hpp"

namespace infgnn {

// Layout: 8-byte magic "INFGNNCK", u64 little-endian header length, JSON
// header (config, shapes, step, caller metadata under "extra"), then the
// little-endian f64 payload: params, first moments, second moments.
void write_checkpoint(const std::filesystem::path& file, const ModelState& state,
                      const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  ModelState state;
  nlohmann::json extra;
};

// Throws FormatError naming the byte offset of any truncation or overrun.
LoadedCheckpoint read_checkpoint(const std::filesystem::path& file);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace infgnn
