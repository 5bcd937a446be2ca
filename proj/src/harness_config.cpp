#include "mbcd/harness.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mbcd::harness {

namespace {

json threshold_to_json(double h) {
    if (std::isinf(h)) return "inf";
    return h;
}

double threshold_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("config: threshold must be a number or \"inf\"");
    }
    return j.get<double>();
}

json maze_to_json(const env::MazeSpec& m) {
    json walls = json::array();
    for (const auto& w : m.walls) {
        walls.push_back(json::array({json::array({w.a[0], w.a[1]}), json::array({w.b[0], w.b[1]})}));
    }
    return json{{"bound", m.bound},        {"goal", m.goal},
                {"bonus_radius", m.bonus_radius}, {"step_scale", m.step_scale},
                {"action_gain", m.action_gain},   {"drift", m.drift},
                {"walls", walls}};
}

env::MazeSpec maze_from_json(const json& j) {
    env::MazeSpec m;
    m.bound = j.value("bound", m.bound);
    if (j.contains("goal")) m.goal = j.at("goal").get<Vec>();
    m.bonus_radius = j.value("bonus_radius", m.bonus_radius);
    m.step_scale = j.value("step_scale", m.step_scale);
    if (j.contains("action_gain")) m.action_gain = j.at("action_gain").get<Vec>();
    if (j.contains("drift")) m.drift = j.at("drift").get<Vec>();
    if (j.contains("walls")) {
        for (const json& w : j.at("walls")) {
            m.walls.push_back(env::Wall{{w.at(0).at(0).get<double>(), w.at(0).at(1).get<double>()},
                                        {w.at(1).at(0).get<double>(), w.at(1).at(1).get<double>()}});
        }
    }
    return m;
}

}  // namespace

json schedule_to_json(const env::ContextSchedule& schedule) {
    json entries = json::array();
    for (const auto& [c, idx] : schedule.entries) entries.push_back(json::array({c, idx}));
    return json{{"entries", entries}};
}

env::ContextSchedule schedule_from_json(const json& j, long horizon) {
    env::ContextSchedule out;
    if (j.contains("entries")) {
        for (const json& e : j.at("entries")) {
            out.entries.push_back({e.at(0).get<long>(), e.at(1).get<int>()});
        }
    }
    if (j.contains("periodic")) {
        const json& p = j.at("periodic");
        const auto periodic = env::ContextSchedule::periodic(
            p.at("start").get<long>(), p.at("period").get<long>(),
            p.at("rotation").get<std::vector<int>>(), horizon);
        for (const auto& entry : periodic.entries) {
            if (out.entries.empty() || entry.first > out.entries.back().first) {
                out.entries.push_back(entry);
            }
        }
    }
    if (j.contains("random")) {
        const json& r = j.at("random");
        out = env::ContextSchedule::random_draws(r.at("seed").get<std::uint64_t>(),
                                                 r.at("pool_size").get<int>(),
                                                 r.at("min_len").get<long>(),
                                                 r.at("max_len").get<long>(), horizon);
    }
    if (out.entries.empty()) out = env::ContextSchedule::single(0);
    return out;
}

json agent_config_to_json(const agent::AgentConfig& c) {
    return json{{"h", threshold_to_json(c.detector.h)},
                {"delta", c.detector.delta},
                {"sqrt_shift", c.detector.sqrt_shift},
                {"ensemble_size", c.model.ensemble_size},
                {"model_hidden", c.model.hidden},
                {"lv_min", c.model.lv_min},
                {"lv_max", c.model.lv_max},
                {"predict_delta", c.model.predict_delta},
                {"model_lr", c.model.learning_rate},
                {"model_train_interval", c.model_train_interval},
                {"model_train_steps", c.model_train_steps},
                {"model_train_batch", c.model_train_batch},
                {"rollout_count", c.rollout_count},
                {"model_mix", c.model_mix},
                {"warmup_steps", c.warmup_steps},
                {"warmup_disagreement", c.warmup_disagreement},
                {"real_buffer_capacity", c.real_buffer_capacity},
                {"model_buffer_capacity", c.model_buffer_capacity},
                {"policy_update_start", c.policy_update_start},
                {"random_action_steps", c.random_action_steps},
                {"copy_critics_on_spawn", c.copy_critics_on_spawn},
                {"policy_updates", c.policy_updates},
                {"actor_hidden", c.sac.actor_hidden},
                {"critic_hidden", c.sac.critic_hidden},
                {"discount", c.sac.discount},
                {"tau", c.sac.tau},
                {"entropy_coef", c.sac.entropy_coef},
                {"actor_lr", c.sac.actor_lr},
                {"critic_lr", c.sac.critic_lr},
                {"batch", c.sac.batch},
                {"log_std_min", c.sac.log_std_min},
                {"log_std_max", c.sac.log_std_max}};
}

agent::AgentConfig agent_config_from_json(const json& j) {
    agent::AgentConfig c;
    if (j.contains("alpha") && !j.at("alpha").is_null()) {
        c.detector.h = cpd::threshold_from_alpha(j.at("alpha").get<double>());
    } else if (j.contains("h")) {
        c.detector.h = threshold_from_json(j.at("h"));
    }
    c.detector.delta = j.value("delta", c.detector.delta);
    c.detector.sqrt_shift = j.value("sqrt_shift", c.detector.sqrt_shift);
    c.model.ensemble_size = j.value("ensemble_size", c.model.ensemble_size);
    if (j.contains("model_hidden")) {
        c.model.hidden = j.at("model_hidden").get<std::vector<std::size_t>>();
    }
    c.model.lv_min = j.value("lv_min", c.model.lv_min);
    c.model.lv_max = j.value("lv_max", c.model.lv_max);
    c.model.predict_delta = j.value("predict_delta", c.model.predict_delta);
    c.model.learning_rate = j.value("model_lr", c.model.learning_rate);
    c.model_train_interval = j.value("model_train_interval", c.model_train_interval);
    c.model_train_steps = j.value("model_train_steps", c.model_train_steps);
    c.model_train_batch = j.value("model_train_batch", c.model_train_batch);
    c.rollout_count = j.value("rollout_count", c.rollout_count);
    c.model_mix = j.value("model_mix", c.model_mix);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.warmup_disagreement = j.value("warmup_disagreement", c.warmup_disagreement);
    c.real_buffer_capacity = j.value("real_buffer_capacity", c.real_buffer_capacity);
    c.model_buffer_capacity = j.value("model_buffer_capacity", c.model_buffer_capacity);
    c.policy_update_start = j.value("policy_update_start", c.policy_update_start);
    c.random_action_steps = j.value("random_action_steps", c.random_action_steps);
    c.copy_critics_on_spawn = j.value("copy_critics_on_spawn", c.copy_critics_on_spawn);
    c.policy_updates = j.value("policy_updates", c.policy_updates);
    if (j.contains("actor_hidden")) {
        c.sac.actor_hidden = j.at("actor_hidden").get<std::vector<std::size_t>>();
    }
    if (j.contains("critic_hidden")) {
        c.sac.critic_hidden = j.at("critic_hidden").get<std::vector<std::size_t>>();
    }
    c.sac.discount = j.value("discount", c.sac.discount);
    c.sac.tau = j.value("tau", c.sac.tau);
    c.sac.entropy_coef = j.value("entropy_coef", c.sac.entropy_coef);
    c.sac.actor_lr = j.value("actor_lr", c.sac.actor_lr);
    c.sac.critic_lr = j.value("critic_lr", c.sac.critic_lr);
    c.sac.batch = j.value("batch", c.sac.batch);
    c.sac.log_std_min = j.value("log_std_min", c.sac.log_std_min);
    c.sac.log_std_max = j.value("log_std_max", c.sac.log_std_max);
    return c;
}

json config_to_json(const ExperimentConfig& cfg) {
    json envj;
    envj["type"] = cfg.environment.type;
    envj["random_start"] = cfg.environment.random_start;
    envj["fixed_start"] = cfg.environment.fixed_start;
    if (cfg.environment.type == "maze") {
        json pool = json::array();
        for (const auto& m : cfg.environment.maze_pool) pool.push_back(maze_to_json(m));
        envj["pool"] = pool;
    } else {
        json pool = json::array();
        for (const auto& g : cfg.environment.stream_pool) {
            pool.push_back(json{{"mean", g.mean}, {"var", g.var}});
        }
        envj["pool"] = pool;
    }
    envj["schedule"] = schedule_to_json(cfg.environment.schedule);

    return json{{"schema", kConfigSchema},
                {"name", cfg.name},
                {"variant", cfg.variant},
                {"seeds", cfg.seeds},
                {"total_steps", cfg.total_steps},
                {"measure_from", cfg.measure_from},
                {"episode_cap", cfg.episode_cap},
                {"regret_gamma", cfg.regret_gamma},
                {"out_dir", cfg.out_dir},
                {"oracle_train_steps", cfg.oracle_train_steps},
                {"save_library", cfg.save_library},
                {"environment", envj},
                {"agent", agent_config_to_json(cfg.agent)},
                {"mpc",
                 {{"horizon", cfg.mpc.horizon},
                  {"candidates", cfg.mpc.candidates},
                  {"iterations", cfg.mpc.iterations},
                  {"elite_frac", cfg.mpc.elite_frac},
                  {"init_std", cfg.mpc.init_std},
                  {"known_reward", cfg.mpc.known_reward}}}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.variant = j.value("variant", cfg.variant);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.total_steps = j.value("total_steps", cfg.total_steps);
    cfg.measure_from = j.value("measure_from", cfg.measure_from);
    cfg.episode_cap = j.value("episode_cap", cfg.episode_cap);
    cfg.regret_gamma = j.value("regret_gamma", cfg.regret_gamma);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.oracle_train_steps = j.value("oracle_train_steps", cfg.oracle_train_steps);
    cfg.save_library = j.value("save_library", cfg.save_library);

    if (j.contains("environment")) {
        const json& e = j.at("environment");
        cfg.environment.type = e.value("type", cfg.environment.type);
        cfg.environment.random_start = e.value("random_start", cfg.environment.random_start);
        if (e.contains("fixed_start")) cfg.environment.fixed_start = e.at("fixed_start").get<Vec>();
        if (e.contains("pool")) {
            if (cfg.environment.type == "maze") {
                for (const json& m : e.at("pool")) {
                    cfg.environment.maze_pool.push_back(maze_from_json(m));
                }
            } else {
                for (const json& g : e.at("pool")) {
                    cfg.environment.stream_pool.push_back(
                        gauss::DiagonalGaussian{g.at("mean").get<Vec>(), g.at("var").get<Vec>()});
                }
            }
        }
        if (e.contains("schedule")) {
            cfg.environment.schedule = schedule_from_json(e.at("schedule"), cfg.total_steps);
        }
    }
    if (cfg.environment.schedule.entries.empty()) {
        cfg.environment.schedule = env::ContextSchedule::single(0);
    }
    if (j.contains("agent")) cfg.agent = agent_config_from_json(j.at("agent"));
    if (j.contains("mpc")) {
        const json& m = j.at("mpc");
        cfg.mpc.horizon = m.value("horizon", cfg.mpc.horizon);
        cfg.mpc.candidates = m.value("candidates", cfg.mpc.candidates);
        cfg.mpc.iterations = m.value("iterations", cfg.mpc.iterations);
        cfg.mpc.elite_frac = m.value("elite_frac", cfg.mpc.elite_frac);
        cfg.mpc.init_std = m.value("init_std", cfg.mpc.init_std);
        cfg.mpc.known_reward = m.value("known_reward", cfg.mpc.known_reward);
    }

    const int pool_size = cfg.environment.type == "maze"
                              ? static_cast<int>(cfg.environment.maze_pool.size())
                              : static_cast<int>(cfg.environment.stream_pool.size());
    if (pool_size > 0) cfg.environment.schedule.validate(pool_size);
    return cfg;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("override must look like key=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &config;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (key.empty()) throw std::invalid_argument("override has empty key segment: " + assignment);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            if (parsed.is_discarded()) parsed = value;  // treat as plain string
            (*node)[key] = parsed;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

agent::AgentConfig apply_variant(const std::string& variant, agent::AgentConfig base) {
    if (variant == "mbcd" || variant == "oracle") {
        return base;
    }
    if (variant == "single-model") {
        base.detector.h = std::numeric_limits<double>::infinity();
        return base;
    }
    if (variant == "model-free") {
        base.detector.h = std::numeric_limits<double>::infinity();
        base.rollout_count = 0;
        base.model_mix = 0.0;
        return base;
    }
    if (variant == "mbcd-mpc") {
        base.policy_updates = false;
        return base;
    }
    throw std::invalid_argument("unknown variant: " + variant);
}

namespace {

agent::AgentConfig desk_maze_agent() {
    agent::AgentConfig a;
    a.detector.h = 20.0;
    a.detector.delta = 2.5;
    a.model.ensemble_size = 5;
    a.model.hidden = {32, 32};
    a.model.lv_min = -3.0;
    a.model.lv_max = 4.0;
    a.model.learning_rate = 1e-3;
    a.model_train_interval = 250;
    a.model_train_steps = 150;
    a.model_train_batch = 64;
    a.rollout_count = 400;
    a.model_mix = 0.95;
    a.warmup_steps = 500;
    a.warmup_disagreement = 0.05;
    a.policy_update_start = 300;
    a.random_action_steps = 500;
    a.sac.actor_hidden = {64, 64};
    a.sac.critic_hidden = {64, 64};
    a.sac.batch = 128;
    a.sac.entropy_coef = 0.2;
    return a;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"maze-reid", "maze-fastswitch", "maze-nonstationary"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.agent = desk_maze_agent();
    cfg.out_dir = "runs/" + name;

    if (name == "maze-reid") {
        // Two structurally distinct configurations: the goal moves across the
        // arena and the wall relocates. A -> B -> A exercises re-identification.
        env::MazeSpec a;
        a.goal = {2.0, 2.0};
        a.walls = {env::Wall{{-2.0, -2.0}, {-2.0, 0.0}}};
        env::MazeSpec b;
        b.goal = {-2.0, -2.0};
        b.walls = {env::Wall{{0.0, 2.0}, {2.0, 2.0}}};
        cfg.environment.maze_pool = {a, b};
        cfg.environment.schedule =
            env::ContextSchedule::script({{0, 0}, {4000, 1}, {8000, 0}});
        cfg.total_steps = 10000;
        cfg.episode_cap = 200;
        return cfg;
    }
    if (name == "maze-fastswitch") {
        // Two goals, pre-learned in long blocks, then alternated every 25
        // steps while metrics accumulate.
        env::MazeSpec a;
        a.goal = {-1.5, 0.0};
        a.bonus_radius = 0.6;
        env::MazeSpec b;
        b.goal = {1.5, 0.0};
        b.bonus_radius = 0.6;
        cfg.environment.maze_pool = {a, b};
        cfg.environment.schedule = schedule_from_json(
            json{{"entries", json::array({json::array({0, 0}), json::array({3000, 1})})},
                 {"periodic", {{"start", 6000}, {"period", 25}, {"rotation", json::array({0, 1})}}}},
            8000);
        cfg.total_steps = 8000;
        cfg.measure_from = 6000;
        cfg.episode_cap = 250;
        cfg.oracle_train_steps = 3000;
        return cfg;
    }
    if (name == "maze-nonstationary") {
        // Showcase schedule mixing the archetypes: default, wind drift, and a
        // relocated goal behind a wall.
        env::MazeSpec base;
        base.goal = {2.0, 2.0};
        env::MazeSpec wind = base;
        wind.drift = {0.06, -0.06};
        env::MazeSpec moved;
        moved.goal = {-2.0, 1.0};
        moved.walls = {env::Wall{{-1.0, 0.5}, {1.0, 0.5}}};
        cfg.environment.maze_pool = {base, wind, moved};
        cfg.environment.schedule =
            env::ContextSchedule::random_draws(9, 3, 1500, 3000, 12000);
        cfg.total_steps = 12000;
        cfg.episode_cap = 200;
        return cfg;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

json summary_to_json(const RunSummary& s) {
    return json{{"seed", s.seed},
                {"variant", s.variant},
                {"steps", s.steps},
                {"total_reward", s.total_reward},
                {"measured_reward", s.measured_reward},
                {"measured_discounted", s.measured_discounted},
                {"k_final", s.k_final},
                {"detections", s.detections},
                {"new_contexts", s.new_contexts}};
}

}  // namespace mbcd::harness
