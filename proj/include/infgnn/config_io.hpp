#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "infgnn/synth.hpp"
#include "infgnn/trainer.hpp"

namespace infgnn {

// Flat key/value JSON mirroring the struct fields. Missing keys keep their
// defaults; an unknown key or a value of the wrong type throws ConfigError
// naming the key.
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& file);

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});
SynthConfig load_synth_config(const std::filesystem::path& file);

// Sets one TrainConfig key from its textual form ("0.1", "true", "exact").
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& text);

std::string to_string(HessianSetting h);
std::string to_string(BufferRanking r);

}  // namespace infgnn
