#pragma once

#include <string>

#include <json.hpp>

#include "edlab/data.hpp"
#include "edlab/diversity.hpp"
#include "edlab/fisher.hpp"
#include "edlab/losses.hpp"
#include "edlab/pacbayes.hpp"
#include "edlab/trainers.hpp"

namespace edlab {

// Key order is fixed so emitted files are reproducible byte for byte.
using Json = nlohmann::ordered_json;

Json to_json(const MlpModel& model);
MlpModel model_from_json(const Json& j);

Json to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const Json& j);

Json to_json(const DecompositionReport& report);
Json to_json(const CovarianceReport& report);
Json to_json(const PacBoundReport& report);
Json to_json(const FisherReport& report);
Json to_json(const EpochLogEntry& entry);

Json to_json(const Task& task);
Task task_from_json(const Json& j);

LossKind loss_kind_from_name(const std::string& name);
TrainObjective objective_from_name(const std::string& name);
const char* objective_name(TrainObjective objective);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

void write_json_file(const Json& j, const std::string& path);
Json read_json_file(const std::string& path);

}  // namespace edlab
