#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ictn/model.hpp"
#include "ictn/train.hpp"

namespace ictn {

// JSON document with "model" and "train" sections. Unknown keys are
// rejected; missing keys take the defaults (the best-performing published
// hyperparameter row for the model, standard Adam settings for training).
struct ConfigFile {
  ModelConfig model;
  TrainConfig train;

  bool operator==(const ConfigFile&) const = default;
};

ConfigFile parse_config(const std::string& text);
std::string serialize_config(const ConfigFile& config);

ConfigFile load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ConfigFile& config);

// Published hyperparameter rows by name: mc, 2d, 3d, ic, ic-best,
// model1..model10, modelD, modelU, modelS.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Published parameter sizes for --diff-paper; throws for unknown presets.
double published_param_size(const std::string& preset_name);

}  // namespace ictn
