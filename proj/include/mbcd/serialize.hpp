#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mbcd/agent.hpp"
#include "mbcd/dynamics.hpp"
#include "mbcd/net.hpp"
#include "mbcd/policy.hpp"

namespace mbcd::ser {

using nlohmann::json;

inline constexpr const char* kParamsSchema = "mbcd-params/1";
inline constexpr const char* kLibrarySchema = "mbcd-library/1";

// Networks and models dump to flat, versioned JSON parameter records.
// Optimizer state and experience buffers are not part of a checkpoint.
json network_to_json(const nn::DenseNetwork& net);
nn::DenseNetwork network_from_json(const json& j);

json model_to_json(const dyn::ContextModel& model);
// Buffer capacity is supplied by the caller; the restored buffer is empty.
dyn::ContextModel model_from_json(const json& j, std::size_t buffer_capacity);

json policy_to_json(const sac::SacPolicy& policy);
sac::SacPolicy policy_from_json(const json& j);

// Library checkpoint: a directory holding manifest.json plus one model and
// one policy dump per context.
void save_library(const agent::MbcdAgent& agent, const std::string& dir);

struct LoadedLibrary {
    int current = 1;
    std::vector<dyn::ContextModel> models;
    std::vector<sac::SacPolicy> policies;
};

LoadedLibrary load_library(const std::string& dir, std::size_t buffer_capacity);

}  // namespace mbcd::ser
