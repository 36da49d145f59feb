#pragma once

// Internal JSON conversions shared by the persistence and experiment layers.
// Not installed; nlohmann::json stays out of the public headers.

#include <json.hpp>

#include "oma/dataset.hpp"
#include "oma/graph_model.hpp"
#include "oma/spectral.hpp"
#include "oma/truss.hpp"

namespace oma::io {

nlohmann::json to_json(const TrussStructure& t);
TrussStructure truss_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModalSolution& m);
ModalSolution modal_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PopulationConfig& c);
PopulationConfig population_from_json(const nlohmann::json& j);

nlohmann::json to_json(const WelchConfig& c);
WelchConfig welch_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SimConfig& c);
SimConfig sim_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_from_json(const nlohmann::json& j);

const char* to_string(RawRetention r);
RawRetention raw_from_string(const std::string& s);

}  // namespace oma::io
