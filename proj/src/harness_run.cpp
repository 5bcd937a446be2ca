#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mbcd/harness.hpp"
#include "mbcd/serialize.hpp"

namespace mbcd::harness {

namespace {

constexpr std::uint64_t kEnvSeedSalt = 0x9e3779b97f4a7c15ull;

std::string candidate_key(int k) {
    return k == cpd::kNewContext ? "new" : std::to_string(k);
}

int candidate_from_key(const std::string& key) {
    return key == "new" ? cpd::kNewContext : std::stoi(key);
}

std::unique_ptr<env::MazeEnv> make_maze_env(const ExperimentConfig& cfg) {
    if (cfg.environment.type != "maze") {
        throw std::invalid_argument("run: only maze environments drive the agent loop");
    }
    if (cfg.environment.maze_pool.empty()) {
        throw std::invalid_argument("run: empty maze pool");
    }
    return std::make_unique<env::MazeEnv>(cfg.environment.maze_pool, cfg.environment.schedule,
                                          cfg.environment.random_start,
                                          cfg.environment.fixed_start);
}

json header_record(const ExperimentConfig& cfg, std::uint64_t seed) {
    return json{{"schema", kRunLogSchema},
                {"name", cfg.name},
                {"variant", cfg.variant},
                {"seed", seed},
                {"total_steps", cfg.total_steps},
                {"measure_from", cfg.measure_from}};
}

struct SummaryAccumulator {
    const ExperimentConfig& cfg;
    RunSummary summary;

    SummaryAccumulator(const ExperimentConfig& c, std::uint64_t seed) : cfg(c) {
        summary.seed = seed;
        summary.variant = c.variant;
    }

    void add(long t0, double reward, bool detection, bool spawned, int k_now) {
        ++summary.steps;
        summary.total_reward += reward;
        if (t0 >= cfg.measure_from) {
            summary.measured_reward += reward;
            summary.measured_discounted +=
                std::pow(cfg.regret_gamma, static_cast<double>(t0 - cfg.measure_from)) * reward;
        }
        if (detection) ++summary.detections;
        if (spawned) ++summary.new_contexts;
        summary.k_final = k_now;
    }
};

void write_w_ll(json& rec, const std::map<int, double>& w, const std::map<int, double>& ll) {
    json wj = json::object();
    for (const auto& [k, v] : w) wj[candidate_key(k)] = v;
    json llj = json::object();
    for (const auto& [k, v] : ll) llj[candidate_key(k)] = v;
    rec["W"] = std::move(wj);
    rec["ll"] = std::move(llj);
}

RunSummary run_agent(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& log_path) {
    auto environment = make_maze_env(cfg);
    const agent::AgentConfig acfg = apply_variant(cfg.variant, cfg.agent);
    agent::MbcdAgent mbcd_agent(environment->state_dim(), environment->action_dim(), acfg, seed);

    if (cfg.variant == "mbcd-mpc") {
        const MpcParams params = cfg.mpc;
        const env::MazeEnv* env_ptr = environment.get();
        const bool known_reward = params.known_reward;
        mbcd_agent.set_action_override(
            [params, env_ptr, known_reward](const dyn::ContextModel& model, const Vec& s,
                                            Rng& rng) {
                RewardFn fn;
                const RewardFn* fn_ptr = nullptr;
                if (known_reward) {
                    fn = [env_ptr](const Vec& st, const Vec& a, const Vec&) {
                        auto [s2, r, term] = env::maze_step(env_ptr->active_spec(), st, a);
                        (void)s2;
                        (void)term;
                        return r;
                    };
                    fn_ptr = &fn;
                }
                return mpc_act(model, s, fn_ptr, params, rng);
            });
    }

    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("run: cannot open log file " + log_path);
    log << header_record(cfg, seed).dump() << '\n';

    SummaryAccumulator acc(cfg, seed);
    Rng env_rng(seed ^ kEnvSeedSalt);
    environment->reset(env_rng);
    long ep_steps = 0;
    bool ep_start = true;

    for (long t0 = 0; t0 < cfg.total_steps; ++t0) {
        const int true_ctx = environment->true_context();
        const agent::StepReport rep = mbcd_agent.step(*environment);
        ++ep_steps;

        json rec{{"t", t0},
                 {"z", rep.z_after},
                 {"K", rep.context_count},
                 {"r", rep.reward},
                 {"warm", rep.warmup},
                 {"tc", true_ctx},
                 {"dis", rep.disagreement}};
        if (ep_start) rec["reset"] = true;
        write_w_ll(rec, rep.w, rep.loglik);
        if (rep.event) {
            rec["event"] = json{{"to", candidate_key(rep.event->context)},
                                {"z", rep.z_after},
                                {"gamma", t0}};
        }
        if (rep.model_trained) rec["trained"] = true;
        log << rec.dump() << '\n';

        acc.add(t0, rep.reward, rep.event.has_value(),
                rep.event && rep.event->context == cpd::kNewContext,
                static_cast<int>(rep.context_count));

        ep_start = false;
        if (cfg.episode_cap > 0 && ep_steps >= cfg.episode_cap) {
            environment->reset(env_rng);
            ep_steps = 0;
            ep_start = true;
        }
    }

    if (cfg.save_library) {
        ser::save_library(mbcd_agent,
                          cfg.out_dir + "/seed" + std::to_string(seed) + "/library");
    }
    return acc.summary;
}

RunSummary run_oracle(const ExperimentConfig& cfg, std::uint64_t seed,
                      const std::string& log_path) {
    // One policy per pool context, trained in isolation on a stationary copy
    // of that context.
    Rng seeder(seed);
    std::vector<sac::SacPolicy> policies;
    for (std::size_t ctx = 0; ctx < cfg.environment.maze_pool.size(); ++ctx) {
        ExperimentConfig sub = cfg;
        sub.variant = "single-model";
        sub.environment.schedule = env::ContextSchedule::single(static_cast<int>(ctx));
        sub.total_steps = cfg.oracle_train_steps;

        auto environment = make_maze_env(sub);
        agent::MbcdAgent trainer(environment->state_dim(), environment->action_dim(),
                                 apply_variant(sub.variant, sub.agent), seeder.raw());
        Rng env_rng(seeder.raw());
        environment->reset(env_rng);
        long ep_steps = 0;
        for (long t = 0; t < sub.total_steps; ++t) {
            trainer.step(*environment);
            if (cfg.episode_cap > 0 && ++ep_steps >= cfg.episode_cap) {
                environment->reset(env_rng);
                ep_steps = 0;
            }
        }
        policies.push_back(trainer.policy(1));
    }

    // Measurement pass: context switched exactly at every change-point.
    auto environment = make_maze_env(cfg);
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("run: cannot open log file " + log_path);
    log << header_record(cfg, seed).dump() << '\n';

    SummaryAccumulator acc(cfg, seed);
    Rng env_rng(seed ^ kEnvSeedSalt);
    Rng act_rng(seeder.raw());
    environment->reset(env_rng);
    long ep_steps = 0;
    bool ep_start = true;
    int prev_ctx = environment->true_context();

    for (long t0 = 0; t0 < cfg.total_steps; ++t0) {
        const int ctx = environment->true_context();
        const Vec s = environment->state();
        const Vec a = policies[static_cast<std::size_t>(ctx)].act(s, true, act_rng);
        auto [reward, terminal] = environment->step(a);
        (void)terminal;
        ++ep_steps;

        json rec{{"t", t0},       {"z", ctx + 1}, {"K", policies.size()},
                 {"r", reward},   {"warm", false}, {"tc", ctx},
                 {"dis", 0.0},    {"W", json::object()}, {"ll", json::object()}};
        if (ep_start) rec["reset"] = true;
        if (ctx != prev_ctx) {
            rec["event"] = json{{"to", std::to_string(ctx + 1)}, {"z", ctx + 1}, {"gamma", t0}};
        }
        log << rec.dump() << '\n';
        acc.add(t0, reward, ctx != prev_ctx, false, static_cast<int>(policies.size()));

        prev_ctx = ctx;
        ep_start = false;
        if (cfg.episode_cap > 0 && ep_steps >= cfg.episode_cap) {
            environment->reset(env_rng);
            ep_steps = 0;
            ep_start = true;
        }
    }
    return acc.summary;
}

}  // namespace

RunSummary run_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& log_path) {
    if (cfg.variant == "oracle") return run_oracle(cfg, seed, log_path);
    return run_agent(cfg, seed, log_path);
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream cfg_out(cfg.out_dir + "/config.json");
        cfg_out << config_to_json(cfg).dump(2) << '\n';
    }

    std::vector<RunSummary> summaries;
    for (std::uint64_t seed : cfg.seeds) {
        const std::string seed_dir = cfg.out_dir + "/seed" + std::to_string(seed);
        fs::create_directories(seed_dir);
        RunSummary s = run_one(cfg, seed, seed_dir + "/log.jsonl");
        std::ofstream sum(seed_dir + "/summary.json");
        sum << summary_to_json(s).dump(2) << '\n';
        summaries.push_back(std::move(s));
    }

    std::ofstream csv(cfg.out_dir + "/summary.csv");
    csv << "seed,variant,steps,total_reward,measured_reward,measured_discounted,"
           "k_final,detections,new_contexts\n";
    for (const RunSummary& s : summaries) {
        csv << s.seed << ',' << s.variant << ',' << s.steps << ',' << s.total_reward << ','
            << s.measured_reward << ',' << s.measured_discounted << ',' << s.k_final << ','
            << s.detections << ',' << s.new_contexts << '\n';
    }
    return summaries;
}

LoadedLog load_run_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_run_log: cannot open " + path);
    LoadedLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.contains("schema")) {
            log.header = std::move(j);
            continue;
        }
        LogStep step;
        step.t = j.at("t").get<long>();
        step.z = j.at("z").get<int>();
        step.reward = j.at("r").get<double>();
        step.k = j.value("K", 1);
        step.warmup = j.value("warm", false);
        if (j.contains("W")) {
            for (const auto& [key, value] : j.at("W").items()) {
                step.w[candidate_from_key(key)] = value.get<double>();
            }
        }
        if (j.contains("ll")) {
            for (const auto& [key, value] : j.at("ll").items()) {
                step.loglik[candidate_from_key(key)] = value.get<double>();
            }
        }
        if (j.contains("event")) {
            cpd::DetectionEvent ev;
            ev.gamma = j.at("event").at("gamma").get<long>();
            ev.context = candidate_from_key(j.at("event").at("to").get<std::string>());
            step.event = ev;
        }
        log.steps.push_back(std::move(step));
    }
    return log;
}

double regret(const LoadedLog& agent_log, const LoadedLog& oracle_log, double gamma,
              long measure_from) {
    if (agent_log.steps.size() != oracle_log.steps.size()) {
        throw std::invalid_argument("regret: logs cover different step counts");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < agent_log.steps.size(); ++i) {
        const LogStep& a = agent_log.steps[i];
        const LogStep& o = oracle_log.steps[i];
        if (a.t != o.t) throw std::invalid_argument("regret: misaligned logs");
        if (a.t < measure_from) continue;
        total += std::pow(gamma, static_cast<double>(a.t - measure_from)) * (o.reward - a.reward);
    }
    return total;
}

DetectionReport detection_report(const LoadedLog& log, const env::ContextSchedule& schedule,
                                 long total_steps) {
    std::vector<long> detections;
    for (const LogStep& s : log.steps) {
        if (s.event) detections.push_back(s.t);
    }

    DetectionReport report;
    std::vector<bool> matched(detections.size(), false);
    double delay_sum = 0.0;
    long delay_count = 0;

    for (std::size_t i = 1; i < schedule.entries.size(); ++i) {
        const long c = schedule.entries[i].first;
        if (c >= total_steps) break;
        const long window_end =
            i + 1 < schedule.entries.size() ? schedule.entries[i + 1].first : total_steps;
        DetectionRow row;
        row.change_point = c;
        bool found = false;
        for (std::size_t d = 0; d < detections.size(); ++d) {
            if (!matched[d] && detections[d] >= c && detections[d] < window_end) {
                row.detection = detections[d];
                row.delay = detections[d] - c;
                matched[d] = true;
                found = true;
                break;
            }
        }
        if (!found) {
            row.censored = true;
            row.delay = window_end - c;
        } else {
            delay_sum += static_cast<double>(row.delay);
            ++delay_count;
            report.max_delay = std::max(report.max_delay, row.delay);
        }
        report.rows.push_back(row);
    }
    for (bool m : matched) {
        if (!m) ++report.false_alarms;
    }
    report.mean_delay = delay_count > 0 ? delay_sum / static_cast<double>(delay_count) : 0.0;
    return report;
}

Vec mpc_act(const dyn::ContextModel& model, const Vec& s, const RewardFn* reward_fn,
            const MpcParams& params, Rng& rng) {
    if (params.horizon < 1 || params.candidates < 1) {
        throw std::invalid_argument("mpc_act: horizon and candidate count must be positive");
    }
    const std::size_t da = model.action_dim();
    const std::size_t n = params.horizon * da;
    Vec mean(n, 0.0);
    Vec stddev(n, params.init_std);
    std::size_t elite_n = static_cast<std::size_t>(
        std::lround(params.elite_frac * static_cast<double>(params.candidates)));
    elite_n = std::clamp<std::size_t>(elite_n, 1, params.candidates);

    std::vector<Vec> plans(params.candidates, Vec(n));
    std::vector<double> scores(params.candidates);
    std::vector<std::size_t> order(params.candidates);

    for (std::size_t iter = 0; iter < params.iterations; ++iter) {
        for (std::size_t c = 0; c < params.candidates; ++c) {
            Vec& plan = plans[c];
            for (std::size_t i = 0; i < n; ++i) {
                plan[i] = std::clamp(mean[i] + stddev[i] * rng.normal(), -1.0, 1.0);
            }
            Vec cur = s;
            double total = 0.0;
            for (std::size_t hstep = 0; hstep < params.horizon; ++hstep) {
                Vec a(plan.begin() + static_cast<long>(hstep * da),
                      plan.begin() + static_cast<long>((hstep + 1) * da));
                Vec x = cur;
                x.insert(x.end(), a.begin(), a.end());
                auto [s_next, r_hat] = model.sample_next(x, rng);
                total += reward_fn ? (*reward_fn)(cur, a, s_next) : r_hat;
                cur = std::move(s_next);
            }
            scores[c] = total;
        }
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (std::size_t e = 0; e < elite_n; ++e) m += plans[order[e]][i];
            m /= static_cast<double>(elite_n);
            double v = 0.0;
            for (std::size_t e = 0; e < elite_n; ++e) {
                const double d = plans[order[e]][i] - m;
                v += d * d;
            }
            mean[i] = m;
            stddev[i] = std::max(std::sqrt(v / static_cast<double>(elite_n)), 0.02);
        }
    }
    Vec action(mean.begin(), mean.begin() + static_cast<long>(da));
    for (double& a : action) a = std::clamp(a, -1.0, 1.0);
    return action;
}

FarBenchResult far_bench(double h, double delta, int streams, long horizon, std::uint64_t seed) {
    const gauss::DiagonalGaussian model{{0.0}, {1.0}};
    const cpd::DetectorConfig cfg{h, delta, false};
    Rng seeder(seed);
    FarBenchResult result;
    result.streams = streams;
    double total = 0.0;
    int alarms = 0;
    for (int i = 0; i < streams; ++i) {
        Rng rng(seeder.raw());
        cpd::CusumBank bank;
        bank.add_candidate(cpd::kNewContext);
        bank.add_candidate(1);
        bank.current = 1;
        long run_length = horizon;
        for (long t = 1; t <= horizon; ++t) {
            const Vec y = gauss::sample(model, rng);
            cpd::bank_update(bank, {{1, model}}, y, cfg);
            if (cpd::decide_context(bank, cfg) != 1) {
                run_length = t;
                ++alarms;
                break;
            }
        }
        total += static_cast<double>(run_length);
    }
    result.mean_run_length = total / static_cast<double>(streams);
    result.alarm_fraction = static_cast<double>(alarms) / static_cast<double>(streams);
    return result;
}

DelayBenchResult delay_bench(double h, double delta, const gauss::DiagonalGaussian& pre,
                             const gauss::DiagonalGaussian& post, int trials, long cap,
                             std::uint64_t seed) {
    const cpd::DetectorConfig cfg{h, delta, false};
    Rng seeder(seed);
    DelayBenchResult result;
    result.trials = trials;
    result.predicted = cpd::predicted_worst_delay(h, gauss::kl_divergence(post, pre));
    double total = 0.0;
    for (int i = 0; i < trials; ++i) {
        Rng rng(seeder.raw());
        cpd::CusumBank bank;
        bank.add_candidate(cpd::kNewContext);
        bank.add_candidate(1);
        bank.add_candidate(2);
        bank.current = 1;
        long delay = cap;
        for (long t = 1; t <= cap; ++t) {
            const Vec y = gauss::sample(post, rng);
            cpd::bank_update(bank, {{1, pre}, {2, post}}, y, cfg);
            if (cpd::decide_context(bank, cfg) != 1) {
                delay = t;
                break;
            }
        }
        total += static_cast<double>(delay);
    }
    result.mean_delay = total / static_cast<double>(trials);
    return result;
}

}  // namespace mbcd::harness
