#pragma once

#include <initializer_list>
#include <string>

#include "fuselab/datakit.hpp"
#include "fuselab/model.hpp"
#include "fuselab/trainer.hpp"
#include "json.hpp"

namespace fuselab::detail {

using nlohmann::json;

// ConfigError naming the first key of obj outside allowed.
void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& section);

json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j);

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

json to_json(const LabelSpace& s);
LabelSpace label_space_from_json(const json& j);

}  // namespace fuselab::detail
