#pragma once

#include <json.hpp>

#include <string>

#include "pdprog/dimred.hpp"
#include "pdprog/eval.hpp"
#include "pdprog/forest.hpp"
#include "pdprog/mixture.hpp"

namespace pdprog {

using Json = nlohmann::json;

Json to_json(const NormParams& params);
NormParams norm_params_from_json(const Json& j);

Json to_json(const ProgressionSpace& space);
ProgressionSpace space_from_json(const Json& j);

Json to_json(const GmmModel& model);
GmmModel gmm_from_json(const Json& j);
Json to_json(const ModelSelectionReport& report);

Json to_json(const ForestModel& model);
ForestModel forest_from_json(const Json& j);

Json to_json(const CvReport& report);
Json to_json(const ReplicationReport& report);

void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

}  // namespace pdprog
