#pragma once

#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "mbcd/gaussian.hpp"
#include "mbcd/rng.hpp"

namespace mbcd::env {

// Axis-aligned wall segment between endpoints a and b (equal x or equal y).
struct Wall {
    Vec a;
    Vec b;
};

// One parameterization of the 2-D particle maze. Non-stationarity archetypes
// map onto the fields: goal/wall relocation directly, actuator malfunction
// via action_gain, constant wind via drift.
struct MazeSpec {
    double bound = 5.0;  // arena is [-bound, bound]^2
    std::vector<Wall> walls;
    Vec goal = {0.0, 0.0};
    double bonus_radius = 0.5;
    double step_scale = 0.5;
    Vec action_gain = {1.0, 1.0};
    Vec drift = {0.0, 0.0};
};

// One particle step: moves by step_scale * (gain .* clamp(a)) + drift, stops
// at the first wall hit, clamps to the arena, and rewards the negative
// distance to the goal plus a +1 bonus inside the goal radius. Episodes end
// by step limit only, so the terminal flag is always false.
std::tuple<Vec, double, bool> maze_step(const MazeSpec& spec, const Vec& s, const Vec& a);

// True when the segment from `from` to `to` properly crosses the wall.
bool crosses_wall(const Wall& w, const Vec& from, const Vec& to);

// Ordered change-points mapping global time to an index into a context pool.
struct ContextSchedule {
    std::vector<std::pair<long, int>> entries;  // (C_i, pool index), C_0 = 0

    int context_at(long t) const;
    void validate(int pool_size) const;

    static ContextSchedule single(int context);
    static ContextSchedule script(std::vector<std::pair<long, int>> entries);
    // Rotates through `rotation` every `period` steps starting at `start`.
    static ContextSchedule periodic(long start, long period, const std::vector<int>& rotation,
                                    long horizon);
    // Seeded random draws from the pool with uniform segment lengths in
    // [min_len, max_len].
    static ContextSchedule random_draws(std::uint64_t seed, int pool_size, long min_len,
                                        long max_len, long horizon);
};

// Pure detection benchmark: per-context emission Gaussians, no control effect.
struct GaussianStreamSpec {
    std::vector<gauss::DiagonalGaussian> contexts;
    ContextSchedule schedule;
};

Vec stream_emit(const GaussianStreamSpec& spec, long t, Rng& rng);

// Minimal environment surface the agent loop drives.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::size_t state_dim() const = 0;
    virtual std::size_t action_dim() const = 0;
    virtual Vec reset(Rng& rng) = 0;
    // Advances one step; returns (reward, terminal) and updates state().
    virtual std::pair<double, bool> step(const Vec& a) = 0;
    virtual const Vec& state() const = 0;
    virtual long time() const = 0;
    // Latent truth for logging and oracles only.
    virtual int true_context() const = 0;
};

class MazeEnv final : public Environment {
public:
    MazeEnv(std::vector<MazeSpec> pool, ContextSchedule schedule, bool random_start = true,
            Vec fixed_start = {0.0, 0.0});

    std::size_t state_dim() const override { return 2; }
    std::size_t action_dim() const override { return 2; }
    Vec reset(Rng& rng) override;
    std::pair<double, bool> step(const Vec& a) override;
    const Vec& state() const override { return state_; }
    long time() const override { return t_; }
    int true_context() const override { return schedule_.context_at(t_); }

    const MazeSpec& active_spec() const { return pool_[schedule_.context_at(t_)]; }
    const std::vector<MazeSpec>& pool() const { return pool_; }
    const ContextSchedule& schedule() const { return schedule_; }

private:
    std::vector<MazeSpec> pool_;
    ContextSchedule schedule_;
    bool random_start_;
    Vec fixed_start_;
    Vec state_;
    long t_ = 0;
};

}  // namespace mbcd::env
