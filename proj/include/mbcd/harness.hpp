#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbcd/agent.hpp"
#include "mbcd/env.hpp"
#include "mbcd/gaussian.hpp"

namespace mbcd::harness {

using nlohmann::json;

inline constexpr const char* kConfigSchema = "mbcd-config/1";
inline constexpr const char* kRunLogSchema = "mbcd-runlog/1";

struct MpcParams {
    std::size_t horizon = 20;
    std::size_t candidates = 1000;
    std::size_t iterations = 5;
    double elite_frac = 0.1;
    double init_std = 0.5;
    // Plan on the true environment reward instead of the learned reward head.
    bool known_reward = false;
};

struct EnvironmentConfig {
    std::string type = "maze";  // maze | stream
    bool random_start = true;
    Vec fixed_start = {0.0, 0.0};
    std::vector<env::MazeSpec> maze_pool;
    std::vector<gauss::DiagonalGaussian> stream_pool;
    env::ContextSchedule schedule;
};

// One experiment: an environment, a schedule, an agent variant, and seeds.
struct ExperimentConfig {
    std::string name = "experiment";
    std::string variant = "mbcd";  // mbcd | mbcd-mpc | single-model | model-free | oracle
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6};
    long total_steps = 10000;
    long measure_from = 0;  // metrics accumulate from this step on
    long episode_cap = 200;
    double regret_gamma = 0.99;
    std::string out_dir = "runs/experiment";
    EnvironmentConfig environment;
    agent::AgentConfig agent;
    MpcParams mpc;
    long oracle_train_steps = 3000;
    bool save_library = false;
};

json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const json& j);

// Agent block only; the baseline-degeneracy check diffs these images.
json agent_config_to_json(const agent::AgentConfig& cfg);
agent::AgentConfig agent_config_from_json(const json& j);

json schedule_to_json(const env::ContextSchedule& schedule);
env::ContextSchedule schedule_from_json(const json& j, long horizon);

// Dotted-path override, e.g. "agent.h=25" or "seeds=[0,1]".
void apply_override(json& config, const std::string& assignment);

// Baseline variants are pure configuration images of MBCD:
//   single-model: detection disabled (h = infinity)
//   model-free:   detection disabled, no rollouts, no model data in batches
//   mbcd-mpc:     planner actions, SAC updates off
agent::AgentConfig apply_variant(const std::string& variant, agent::AgentConfig base);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

struct RunSummary {
    std::uint64_t seed = 0;
    std::string variant;
    long steps = 0;
    double total_reward = 0.0;
    double measured_reward = 0.0;
    double measured_discounted = 0.0;
    int k_final = 1;
    int detections = 0;
    int new_contexts = 0;
};

json summary_to_json(const RunSummary& s);

// Executes one seed of the configured variant, streaming the JSONL run log
// to log_path. Oracle runs train per-context policies first and then replay
// the schedule with zero-delay switching.
RunSummary run_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& log_path);

// All seeds; writes config echo, per-seed logs and summaries, and summary.csv
// under cfg.out_dir.
std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg);

// --- RunLog consumers (replay without re-simulation) ---

struct LogStep {
    long t = 0;
    int z = 1;
    double reward = 0.0;
    int k = 1;
    bool warmup = false;
    std::map<int, double> w;
    std::map<int, double> loglik;
    std::optional<cpd::DetectionEvent> event;
};

struct LoadedLog {
    json header;
    std::vector<LogStep> steps;
};

LoadedLog load_run_log(const std::string& path);

// Empirical discounted regret sum_t gamma^t (r_oracle - r_agent) from
// measure_from on. Logs must cover identical step ranges.
double regret(const LoadedLog& agent_log, const LoadedLog& oracle_log, double gamma,
              long measure_from = 0);

struct DetectionRow {
    long change_point = 0;
    long detection = -1;  // -1 when censored
    long delay = -1;
    bool censored = false;
};

struct DetectionReport {
    std::vector<DetectionRow> rows;
    int false_alarms = 0;
    double mean_delay = 0.0;
    long max_delay = 0;
};

DetectionReport detection_report(const LoadedLog& log, const env::ContextSchedule& schedule,
                                 long total_steps);

// --- Planner ---

using RewardFn = std::function<double(const Vec& s, const Vec& a, const Vec& s_next)>;

// Cross-entropy method over action sequences rolled through the dynamics
// model; returns the first action of the final mean sequence. reward_fn
// overrides the learned reward head when provided.
Vec mpc_act(const dyn::ContextModel& model, const Vec& s, const RewardFn* reward_fn,
            const MpcParams& params, Rng& rng);

// --- Gaussian-stream detection benches ---

struct FarBenchResult {
    double mean_run_length = 0.0;
    double alarm_fraction = 0.0;
    int streams = 0;
};

// Streams under the correct model; detections are false alarms by
// construction. Censored streams contribute the horizon, which only lowers
// the reported mean run length.
FarBenchResult far_bench(double h, double delta, int streams, long horizon, std::uint64_t seed);

struct DelayBenchResult {
    double mean_delay = 0.0;
    double predicted = 0.0;
    int trials = 0;
};

// Streams switch from `pre` to `post` at t = 0; measures steps until any
// candidate statistic fires. The candidate set holds both true models plus
// the new-context statistic.
DelayBenchResult delay_bench(double h, double delta, const gauss::DiagonalGaussian& pre,
                             const gauss::DiagonalGaussian& post, int trials, long cap,
                             std::uint64_t seed);

}  // namespace mbcd::harness
