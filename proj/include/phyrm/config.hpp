// JSON (de)serialization for run configurations. Keys mirror field names;
// absent keys keep their defaults, unknown keys are rejected.
#pragma once

#include "phyrm/synthgen.hpp"
#include "phyrm/trainer.hpp"

#include "json.hpp"

namespace phyrm {

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json gen_config_to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {});

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace phyrm
