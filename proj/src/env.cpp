#include "mbcd/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbcd::env {

namespace {

// First parameter t in (eps, 1] at which s + t*d crosses the wall, or a
// negative value when there is no hit.
double wall_hit(const Wall& w, const Vec& s, const Vec& d) {
    constexpr double kEps = 1e-12;
    const bool vertical = std::abs(w.a[0] - w.b[0]) < 1e-12;
    const int axis = vertical ? 0 : 1;    // coordinate the wall pins
    const int span = vertical ? 1 : 0;    // coordinate the wall extends over
    if (std::abs(d[axis]) < kEps) return -1.0;
    const double t = (w.a[axis] - s[axis]) / d[axis];
    if (t <= kEps || t > 1.0) return -1.0;
    const double at = s[span] + t * d[span];
    const double lo = std::min(w.a[span], w.b[span]);
    const double hi = std::max(w.a[span], w.b[span]);
    if (at < lo || at > hi) return -1.0;
    return t;
}

}  // namespace

bool crosses_wall(const Wall& w, const Vec& from, const Vec& to) {
    Vec d{to[0] - from[0], to[1] - from[1]};
    return wall_hit(w, from, d) > 0.0;
}

std::tuple<Vec, double, bool> maze_step(const MazeSpec& spec, const Vec& s, const Vec& a) {
    if (s.size() != 2 || a.size() != 2) {
        throw std::invalid_argument("maze_step: state and action must be 2-D");
    }
    Vec d(2);
    for (int i = 0; i < 2; ++i) {
        const double ai = std::clamp(a[i], -1.0, 1.0);
        d[i] = spec.step_scale * spec.action_gain[i] * ai + spec.drift[i];
    }

    double t_stop = 1.0;
    for (const Wall& w : spec.walls) {
        const double t = wall_hit(w, s, d);
        if (t > 0.0 && t < t_stop) t_stop = t;
    }
    if (t_stop < 1.0) t_stop = std::max(0.0, t_stop * (1.0 - 1e-9) - 1e-12);

    Vec s_next(2);
    for (int i = 0; i < 2; ++i) {
        s_next[i] = std::clamp(s[i] + t_stop * d[i], -spec.bound, spec.bound);
    }

    const double dx = s_next[0] - spec.goal[0];
    const double dy = s_next[1] - spec.goal[1];
    const double dist = std::sqrt(dx * dx + dy * dy);
    const double reward = -dist + (dist < spec.bonus_radius ? 1.0 : 0.0);
    return {std::move(s_next), reward, false};
}

int ContextSchedule::context_at(long t) const {
    if (entries.empty()) throw std::logic_error("ContextSchedule: empty schedule");
    int ctx = entries.front().second;
    for (const auto& [c, idx] : entries) {
        if (c <= t) ctx = idx;
        else break;
    }
    return ctx;
}

void ContextSchedule::validate(int pool_size) const {
    if (entries.empty() || entries.front().first != 0) {
        throw std::invalid_argument("ContextSchedule: first entry must start at step 0");
    }
    long prev = -1;
    for (const auto& [c, idx] : entries) {
        if (c <= prev) throw std::invalid_argument("ContextSchedule: change-points must increase");
        if (idx < 0 || idx >= pool_size) {
            throw std::invalid_argument("ContextSchedule: context index out of pool range");
        }
        prev = c;
    }
}

ContextSchedule ContextSchedule::single(int context) {
    return ContextSchedule{{{0, context}}};
}

ContextSchedule ContextSchedule::script(std::vector<std::pair<long, int>> entries) {
    return ContextSchedule{std::move(entries)};
}

ContextSchedule ContextSchedule::periodic(long start, long period, const std::vector<int>& rotation,
                                          long horizon) {
    if (period <= 0 || rotation.empty()) {
        throw std::invalid_argument("ContextSchedule::periodic: bad period or rotation");
    }
    ContextSchedule out;
    if (start > 0) out.entries.push_back({0, rotation.front()});
    std::size_t r = 0;
    for (long c = start; c < horizon; c += period, ++r) {
        out.entries.push_back({c, rotation[r % rotation.size()]});
    }
    return out;
}

ContextSchedule ContextSchedule::random_draws(std::uint64_t seed, int pool_size, long min_len,
                                              long max_len, long horizon) {
    if (pool_size <= 0 || min_len <= 0 || max_len < min_len) {
        throw std::invalid_argument("ContextSchedule::random_draws: bad parameters");
    }
    Rng rng(seed);
    ContextSchedule out;
    long c = 0;
    while (c < horizon) {
        out.entries.push_back({c, static_cast<int>(rng.index(static_cast<std::size_t>(pool_size)))});
        c += min_len + static_cast<long>(rng.index(static_cast<std::size_t>(max_len - min_len + 1)));
    }
    return out;
}

Vec stream_emit(const GaussianStreamSpec& spec, long t, Rng& rng) {
    const int ctx = spec.schedule.context_at(t);
    return gauss::sample(spec.contexts.at(static_cast<std::size_t>(ctx)), rng);
}

MazeEnv::MazeEnv(std::vector<MazeSpec> pool, ContextSchedule schedule, bool random_start,
                 Vec fixed_start)
    : pool_(std::move(pool)),
      schedule_(std::move(schedule)),
      random_start_(random_start),
      fixed_start_(std::move(fixed_start)) {
    if (pool_.empty()) throw std::invalid_argument("MazeEnv: empty context pool");
    schedule_.validate(static_cast<int>(pool_.size()));
    state_ = fixed_start_;
}

Vec MazeEnv::reset(Rng& rng) {
    if (random_start_) {
        const double b = active_spec().bound;
        state_ = {rng.uniform(-b, b), rng.uniform(-b, b)};
    } else {
        state_ = fixed_start_;
    }
    return state_;
}

std::pair<double, bool> MazeEnv::step(const Vec& a) {
    auto [s_next, reward, terminal] = maze_step(active_spec(), state_, a);
    state_ = std::move(s_next);
    ++t_;
    return {reward, terminal};
}

}  // namespace mbcd::env
