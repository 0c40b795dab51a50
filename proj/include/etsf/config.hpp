#pragma once

#include "etsf/data.hpp"
#include "etsf/model.hpp"
#include "etsf/trainer.hpp"

#include <json.hpp>

#include <string>

// JSON mapping of the configuration structs. Readers reject unknown keys
// and report missing required ones by their dotted path.
namespace etsf::config {

using Json = nlohmann::json;

struct DataConfig {
    data::SplitSpec split;
    std::size_t stride = 1;          // training windows
    std::size_t eval_stride = 1;     // validation / test windows
    // Synthetic instance files: replace validation and test instances by
    // their noiseless versions.
    bool noiseless_eval = false;
};

struct RunConfig {
    model::ModelConfig model;
    trainer::TrainConfig train;
    DataConfig data;
};

Json to_json(const model::ModelConfig& cfg);
Json to_json(const trainer::TrainConfig& cfg);
Json to_json(const data::AugmentConfig& cfg);
Json to_json(const DataConfig& cfg);
Json to_json(const RunConfig& cfg);

// `path` prefixes key names in error messages.
model::ModelConfig model_from_json(const Json& j, const std::string& path = "model");
trainer::TrainConfig train_from_json(const Json& j, const std::string& path = "train");
data::AugmentConfig augment_from_json(const Json& j, const std::string& path = "train.augment");
DataConfig data_from_json(const Json& j, const std::string& path = "data");

/// Required: model.lookback, model.horizon, train.lr, train.epochs.
RunConfig run_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

std::string padding_name(Padding p);
Padding padding_from_name(const std::string& name);

}  // namespace etsf::config
