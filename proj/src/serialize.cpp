#include "mbcd/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mbcd::ser {

namespace {

json write_file_checked(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("serialize: cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    return j;
}

json read_file_checked(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("serialize: cannot open " + path);
    json j;
    in >> j;
    return j;
}

void expect_schema(const json& j, const char* schema) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != schema) {
        throw std::runtime_error(std::string("serialize: expected schema ") + schema);
    }
}

}  // namespace

json network_to_json(const nn::DenseNetwork& net) {
    std::vector<std::size_t> dims;
    if (!net.layers().empty()) {
        dims.push_back(net.layers().front().in);
        for (const auto& l : net.layers()) dims.push_back(l.out);
    }
    return json{{"dims", dims}, {"params", net.params()}};
}

nn::DenseNetwork network_from_json(const json& j) {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    Rng scratch(0);
    nn::DenseNetwork net(dims, scratch);
    net.set_params(j.at("params").get<Vec>());
    return net;
}

json model_to_json(const dyn::ContextModel& model) {
    json members = json::array();
    for (const auto& m : model.members()) members.push_back(network_to_json(m));
    json norm;
    norm["mean"] = model.normalizer().mean;
    norm["stddev"] = model.normalizer().stddev;
    const dyn::ModelConfig& c = model.config();
    return json{{"schema", kParamsSchema},
                {"kind", "dynamics"},
                {"id", model.id()},
                {"state_dim", model.state_dim()},
                {"action_dim", model.action_dim()},
                {"config",
                 {{"ensemble_size", c.ensemble_size},
                  {"hidden", c.hidden},
                  {"lv_min", c.lv_min},
                  {"lv_max", c.lv_max},
                  {"predict_delta", c.predict_delta},
                  {"learning_rate", c.learning_rate}}},
                {"normalizer", norm},
                {"members", members}};
}

dyn::ContextModel model_from_json(const json& j, std::size_t buffer_capacity) {
    expect_schema(j, kParamsSchema);
    dyn::ModelConfig cfg;
    const json& c = j.at("config");
    cfg.ensemble_size = c.at("ensemble_size").get<std::size_t>();
    cfg.hidden = c.at("hidden").get<std::vector<std::size_t>>();
    cfg.lv_min = c.at("lv_min").get<double>();
    cfg.lv_max = c.at("lv_max").get<double>();
    cfg.predict_delta = c.at("predict_delta").get<bool>();
    cfg.learning_rate = c.at("learning_rate").get<double>();

    dyn::ContextModel model(j.at("id").get<int>(), j.at("state_dim").get<std::size_t>(),
                            j.at("action_dim").get<std::size_t>(), cfg, buffer_capacity, 0);
    const json& members = j.at("members");
    if (members.size() != model.members().size()) {
        throw std::runtime_error("serialize: member count mismatch");
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
        model.members()[i] = network_from_json(members[i]);
    }
    model.normalizer().mean = j.at("normalizer").at("mean").get<Vec>();
    model.normalizer().stddev = j.at("normalizer").at("stddev").get<Vec>();
    return model;
}

json policy_to_json(const sac::SacPolicy& policy) {
    const sac::SacConfig& c = policy.config();
    return json{{"schema", kParamsSchema},
                {"kind", "policy"},
                {"state_dim", policy.state_dim()},
                {"action_dim", policy.action_dim()},
                {"config",
                 {{"actor_hidden", c.actor_hidden},
                  {"critic_hidden", c.critic_hidden},
                  {"discount", c.discount},
                  {"tau", c.tau},
                  {"entropy_coef", c.entropy_coef},
                  {"actor_lr", c.actor_lr},
                  {"critic_lr", c.critic_lr},
                  {"batch", c.batch},
                  {"log_std_min", c.log_std_min},
                  {"log_std_max", c.log_std_max}}},
                {"actor", network_to_json(policy.actor())},
                {"critic1", network_to_json(policy.critic(0))},
                {"critic2", network_to_json(policy.critic(1))},
                {"target1", network_to_json(policy.target_critic(0))},
                {"target2", network_to_json(policy.target_critic(1))}};
}

sac::SacPolicy policy_from_json(const json& j) {
    expect_schema(j, kParamsSchema);
    sac::SacConfig cfg;
    const json& c = j.at("config");
    cfg.actor_hidden = c.at("actor_hidden").get<std::vector<std::size_t>>();
    cfg.critic_hidden = c.at("critic_hidden").get<std::vector<std::size_t>>();
    cfg.discount = c.at("discount").get<double>();
    cfg.tau = c.at("tau").get<double>();
    cfg.entropy_coef = c.at("entropy_coef").get<double>();
    cfg.actor_lr = c.at("actor_lr").get<double>();
    cfg.critic_lr = c.at("critic_lr").get<double>();
    cfg.batch = c.at("batch").get<std::size_t>();
    cfg.log_std_min = c.at("log_std_min").get<double>();
    cfg.log_std_max = c.at("log_std_max").get<double>();

    sac::SacPolicy policy(j.at("state_dim").get<std::size_t>(),
                          j.at("action_dim").get<std::size_t>(), cfg, 0);
    policy.actor() = network_from_json(j.at("actor"));
    policy.critic(0) = network_from_json(j.at("critic1"));
    policy.critic(1) = network_from_json(j.at("critic2"));
    policy.target_critic(0) = network_from_json(j.at("target1"));
    policy.target_critic(1) = network_from_json(j.at("target2"));
    return policy;
}

void save_library(const agent::MbcdAgent& agent, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest{{"schema", kLibrarySchema},
                  {"contexts", json::array()},
                  {"current", agent.context()}};
    for (std::size_t k = 1; k <= agent.context_count(); ++k) {
        const int id = static_cast<int>(k);
        const std::string model_file = "model_" + std::to_string(id) + ".json";
        const std::string policy_file = "policy_" + std::to_string(id) + ".json";
        write_file_checked(dir + "/" + model_file, model_to_json(agent.model(id)));
        write_file_checked(dir + "/" + policy_file, policy_to_json(agent.policy(id)));
        manifest["contexts"].push_back(
            {{"id", id}, {"model", model_file}, {"policy", policy_file}});
    }
    write_file_checked(dir + "/manifest.json", manifest);
}

LoadedLibrary load_library(const std::string& dir, std::size_t buffer_capacity) {
    const json manifest = read_file_checked(dir + "/manifest.json");
    expect_schema(manifest, kLibrarySchema);
    LoadedLibrary lib;
    lib.current = manifest.at("current").get<int>();
    for (const json& entry : manifest.at("contexts")) {
        lib.models.push_back(
            model_from_json(read_file_checked(dir + "/" + entry.at("model").get<std::string>()),
                            buffer_capacity));
        lib.policies.push_back(policy_from_json(
            read_file_checked(dir + "/" + entry.at("policy").get<std::string>())));
    }
    return lib;
}

}  // namespace mbcd::ser
