#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mrn/network.hpp"

namespace mrn {

// Model JSON:
// {name, time_unit,
//  species:[{name,min,max,init}],
//  reactions:[{name, reactants:{sp:coef}, products:{sp:coef}, propensity:{kind, params:{...}}, convex?}],
//  reversible_pairs:[[forward, reverse]]}   (0-based reaction indices)
// Schema violations raise ConfigError whose message starts with a JSON pointer, e.g. "/reactions/0/propensity: ...".
Network network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const Network& net);

Network load_model_file(const std::string& path);
void save_model_file(const Network& net, const std::string& path);

}  // namespace mrn
