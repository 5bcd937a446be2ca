#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "mbcd/harness.hpp"

namespace {

using mbcd::harness::json;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

void print_summaries(const std::vector<mbcd::harness::RunSummary>& summaries) {
    std::cout << "seed  steps  total_reward  measured_reward  K  detections\n";
    for (const auto& s : summaries) {
        std::cout << s.seed << "  " << s.steps << "  " << s.total_reward << "  "
                  << s.measured_reward << "  " << s.k_final << "  " << s.detections << '\n';
    }
}

int cmd_run(const std::string& preset_name, const std::string& config_path,
            const std::vector<std::string>& overrides, const std::string& out_dir) {
    json config_json;
    if (!config_path.empty()) {
        config_json = load_json_file(config_path);
    } else if (!preset_name.empty()) {
        config_json = mbcd::harness::config_to_json(mbcd::harness::preset(preset_name));
    } else {
        std::cerr << "run: provide --preset or --config\n";
        return 2;
    }
    for (const std::string& o : overrides) mbcd::harness::apply_override(config_json, o);
    if (!out_dir.empty()) config_json["out_dir"] = out_dir;

    const auto cfg = mbcd::harness::config_from_json(config_json);
    const auto summaries = mbcd::harness::run_experiment(cfg);
    print_summaries(summaries);
    std::cout << "logs written under " << cfg.out_dir << '\n';
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const auto cfg = mbcd::harness::config_from_json(load_json_file(run_dir + "/config.json"));
    std::ofstream detections_csv(run_dir + "/detections.csv");
    detections_csv << "seed,change_point,detection,delay,censored\n";
    std::ofstream report_csv(run_dir + "/report.csv");
    report_csv << "seed,steps,total_reward,measured_reward,k_final,detections,"
                  "false_alarms,mean_delay,max_delay\n";

    for (const auto seed : cfg.seeds) {
        const std::string log_path = run_dir + "/seed" + std::to_string(seed) + "/log.jsonl";
        const auto log = mbcd::harness::load_run_log(log_path);
        double total = 0.0;
        double measured = 0.0;
        int k_final = 1;
        int detections = 0;
        for (const auto& s : log.steps) {
            total += s.reward;
            if (s.t >= cfg.measure_from) measured += s.reward;
            k_final = s.k;
            if (s.event) ++detections;
        }
        const auto det =
            mbcd::harness::detection_report(log, cfg.environment.schedule, cfg.total_steps);
        for (const auto& row : det.rows) {
            detections_csv << seed << ',' << row.change_point << ',' << row.detection << ','
                           << row.delay << ',' << (row.censored ? 1 : 0) << '\n';
        }
        report_csv << seed << ',' << log.steps.size() << ',' << total << ',' << measured << ','
                   << k_final << ',' << detections << ',' << det.false_alarms << ','
                   << det.mean_delay << ',' << det.max_delay << '\n';
    }
    std::cout << "wrote " << run_dir << "/report.csv and " << run_dir << "/detections.csv\n";
    return 0;
}

int cmd_detect_bench(const std::string& mode, double h, double delta, int streams, long horizon,
                     int trials, double mu_post, std::uint64_t seed) {
    if (mode == "far") {
        const auto r = mbcd::harness::far_bench(h, delta, streams, horizon, seed);
        std::cout << "streams=" << r.streams << " mean_run_length=" << r.mean_run_length
                  << " alarm_fraction=" << r.alarm_fraction << " bound=e^h=" << std::exp(h)
                  << '\n';
        return 0;
    }
    if (mode == "delay") {
        const mbcd::gauss::DiagonalGaussian pre{{0.0}, {1.0}};
        const mbcd::gauss::DiagonalGaussian post{{mu_post}, {1.0}};
        const auto r = mbcd::harness::delay_bench(h, delta, pre, post, trials, horizon, seed);
        std::cout << "trials=" << r.trials << " mean_delay=" << r.mean_delay
                  << " predicted=" << r.predicted << '\n';
        return 0;
    }
    std::cerr << "detect-bench: unknown mode " << mode << '\n';
    return 2;
}

int cmd_replay(const std::string& log_path, const std::string& what,
               const std::string& oracle_path, double gamma, const std::string& out_path) {
    const auto log = mbcd::harness::load_run_log(log_path);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot open " + out_path);
        out = &file;
    }

    if (what == "reward") {
        *out << "t,z,reward\n";
        for (const auto& s : log.steps) *out << s.t << ',' << s.z << ',' << s.reward << '\n';
        return 0;
    }
    if (what == "w" || what == "loglik") {
        const bool w_mode = what == "w";
        std::set<int> keys;
        for (const auto& s : log.steps) {
            for (const auto& [k, v] : (w_mode ? s.w : s.loglik)) keys.insert(k);
        }
        *out << "t";
        for (int k : keys) *out << ',' << (k == mbcd::cpd::kNewContext ? "new" : std::to_string(k));
        *out << '\n';
        for (const auto& s : log.steps) {
            *out << s.t;
            const auto& m = w_mode ? s.w : s.loglik;
            for (int k : keys) {
                const auto it = m.find(k);
                *out << ',';
                if (it != m.end()) *out << it->second;
            }
            *out << '\n';
        }
        return 0;
    }
    if (what == "regret") {
        if (oracle_path.empty()) {
            std::cerr << "replay --what regret needs --oracle\n";
            return 2;
        }
        const auto oracle = mbcd::harness::load_run_log(oracle_path);
        const long from = log.header.value("measure_from", 0L);
        *out << "regret," << mbcd::harness::regret(log, oracle, gamma, from) << '\n';
        return 0;
    }
    std::cerr << "replay: unknown extraction " << what << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context-detecting model-based RL simulator"};
    app.require_subcommand(1);

    std::string preset_name;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("--preset", preset_name, "named preset (see --list)");
    run->add_option("--config", config_path, "config JSON file");
    run->add_option("--set", overrides, "dotted-path override, e.g. agent.h=25");
    run->add_option("--out", out_dir, "output directory override");

    bool list_presets = false;
    run->add_flag("--list", list_presets, "list preset names and exit");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("--run", report_dir, "run directory (holds config.json)")->required();

    std::string bench_mode = "far";
    double bench_h = 5.0;
    double bench_delta = 2.0;
    int bench_streams = 200;
    long bench_horizon = 2000;
    int bench_trials = 500;
    double bench_mu = 2.0;
    std::uint64_t bench_seed = 0;
    auto* bench = app.add_subcommand("detect-bench", "Gaussian-stream FAR/delay suite");
    bench->add_option("--mode", bench_mode, "far | delay");
    bench->add_option("--threshold", bench_h, "detection threshold");
    bench->add_option("--delta", bench_delta, "new-context sensitivity");
    bench->add_option("--streams", bench_streams, "stream count (far)");
    bench->add_option("--steps", bench_horizon, "stream length / delay cap");
    bench->add_option("--trials", bench_trials, "trial count (delay)");
    bench->add_option("--mu", bench_mu, "post-change mean (delay)");
    bench->add_option("--seed", bench_seed, "bench seed");

    std::string replay_log;
    std::string replay_what = "reward";
    std::string replay_oracle;
    std::string replay_out;
    double replay_gamma = 0.99;
    auto* replay = app.add_subcommand("replay", "extract figure data from a run log");
    replay->add_option("--log", replay_log, "run log (JSONL)")->required();
    replay->add_option("--what", replay_what, "reward | w | loglik | regret");
    replay->add_option("--oracle", replay_oracle, "oracle log for regret");
    replay->add_option("--gamma", replay_gamma, "discount for regret");
    replay->add_option("--out", replay_out, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (list_presets) {
                for (const auto& name : mbcd::harness::preset_names()) std::cout << name << '\n';
                return 0;
            }
            return cmd_run(preset_name, config_path, overrides, out_dir);
        }
        if (report->parsed()) return cmd_report(report_dir);
        if (bench->parsed()) {
            return cmd_detect_bench(bench_mode, bench_h, bench_delta, bench_streams, bench_horizon,
                                    bench_trials, bench_mu, bench_seed);
        }
        if (replay->parsed()) {
            return cmd_replay(replay_log, replay_what, replay_oracle, replay_gamma, replay_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
