#pragma once

#include <json.hpp>

#include "pinet/model.hpp"
#include "pinet/nn.hpp"
#include "pinet/synth.hpp"

namespace pinet {

/// JSON bindings shared by checkpoints, config files, and run manifests.
/// from_* readers apply defaults for absent fields and throw ConfigError on
/// unknown keys or invalid values.

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const nn::TrainConfig& cfg);
nn::TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const synth::GenConfig& cfg);
synth::GenConfig gen_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const synth::NoiseConfig& cfg);
synth::NoiseConfig noise_config_from_json(const nlohmann::json& j);

/// Aggregate run configuration: {"model": ..., "train": ..., "gen": ...,
/// "noise": ...}; every section optional, defaults otherwise.
struct RunConfig {
  ModelConfig model;
  nn::TrainConfig train;
  synth::GenConfig gen;
  synth::NoiseConfig noise;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Parse a config file; parse errors carry file:line:column, value errors the
/// JSON path.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pinet
