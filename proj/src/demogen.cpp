#include "dmsrd/demogen.hpp"

#include "dmsrd/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace dmsrd {

Vec ScriptedPolicy::act(const Vec& state, RandomStream& rng) const {
    Vec u = strategy_.controller(state);
    for (double& x : u) x += strategy_.exploration_std * rng.normal();
    return clamp_action(env_spec_, u);
}

Vec ScriptedPolicy::mean_action(const Vec& state) const {
    return clamp_action(env_spec_, strategy_.controller(state));
}

double ScriptedPolicy::log_prob(const Vec& state, const Vec& action) const {
    Vec u = strategy_.controller(state);
    double acc = 0.0;
    for (std::size_t d = 0; d < u.size(); ++d)
        acc += gaussian_log_density(action[d], u[d], strategy_.exploration_std);
    return acc;
}

ScriptedMixturePolicy::ScriptedMixturePolicy(std::vector<ScriptedStrategy> strategies, Vec weights,
                                             EnvSpec env_spec, double sigma)
    : strategies_(std::move(strategies)),
      weights_(std::move(weights)),
      env_spec_(std::move(env_spec)),
      sigma_(sigma) {
    check(strategies_.size() == weights_.size(), "ScriptedMixturePolicy: length mismatch");
    check(strategies_.size() >= 1, "ScriptedMixturePolicy: no components");
}

Vec ScriptedMixturePolicy::mean_action(const Vec& state) const {
    Vec acc(env_spec_.action_dim, 0.0);
    for (std::size_t j = 0; j < strategies_.size(); ++j) {
        if (weights_[j] == 0.0) continue;
        Vec u = strategies_[j].controller(state);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += weights_[j] * u[d];
    }
    return clamp_action(env_spec_, acc);
}

Vec ScriptedMixturePolicy::act(const Vec& state, RandomStream& rng) const {
    Vec acc(env_spec_.action_dim, 0.0);
    for (std::size_t j = 0; j < strategies_.size(); ++j) {
        if (weights_[j] == 0.0) continue;
        Vec u = strategies_[j].controller(state);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += weights_[j] * u[d];
    }
    for (double& x : acc) x += sigma_ * rng.normal();
    return clamp_action(env_spec_, acc);
}

double ScriptedMixturePolicy::log_prob(const Vec& state, const Vec& action) const {
    Vec acc(env_spec_.action_dim, 0.0);
    for (std::size_t j = 0; j < strategies_.size(); ++j) {
        if (weights_[j] == 0.0) continue;
        Vec u = strategies_[j].controller(state);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += weights_[j] * u[d];
    }
    double lp = 0.0;
    for (std::size_t d = 0; d < acc.size(); ++d)
        lp += gaussian_log_density(action[d], acc[d], sigma_);
    return lp;
}

namespace {

// PD balance of the pole plus cart-position regulation toward x_target.
Vec cartpole_hold(const Vec& s, double x_target) {
    double x = s[0], xdot = s[1], theta = s[2], thetadot = s[3];
    double u = 8.0 * theta + 1.6 * thetadot + 0.40 * (x - x_target) + 0.80 * xdot;
    return {u};
}

// State-only limit cycle: desired cart velocity follows a circle of
// amplitude A and rate omega in (x, xdot) phase space.
Vec cartpole_oscillate(const Vec& s, double amplitude, double omega) {
    double x = s[0], xdot = s[1], theta = s[2], thetadot = s[3];
    double inside = std::max(0.0, amplitude * amplitude - x * x);
    double dir;
    if (std::fabs(x) >= amplitude)
        dir = x > 0.0 ? -1.0 : 1.0;
    else
        dir = xdot >= 0.0 ? 1.0 : -1.0;
    double xdot_des = dir * omega * std::sqrt(inside);
    double u = 8.0 * theta + 1.6 * thetadot + 0.5 * (xdot - xdot_des);
    return {u};
}

constexpr double kHoverThrust = 0.5;  // gravity / main power

double descend_thrust(double vy, double v_des) {
    return clamp(kHoverThrust + 3.0 * (v_des - vy), 0.0, 1.0);
}

}  // namespace

std::vector<ScriptedStrategy> builtin_strategies(const std::string& env_id) {
    std::vector<ScriptedStrategy> out;
    if (env_id == "pendulum-lite") {
        out.push_back({"hold-center", env_id,
                       [](const Vec& s) { return cartpole_hold(s, 0.0); }, 0.05,
                       "balance the pole with the cart held at x=0"});
        out.push_back({"hold-left", env_id, [](const Vec& s) { return cartpole_hold(s, -1.0); },
                       0.05, "balance the pole with the cart held at x=-1"});
        out.push_back({"hold-right", env_id, [](const Vec& s) { return cartpole_hold(s, 1.0); },
                       0.05, "balance the pole with the cart held at x=+1"});
        out.push_back({"slow-oscillate", env_id,
                       [](const Vec& s) { return cartpole_oscillate(s, 0.8, 0.6); }, 0.05,
                       "balance while sweeping the cart slowly between x=-0.8 and x=0.8"});
        out.push_back({"fast-oscillate", env_id,
                       [](const Vec& s) { return cartpole_oscillate(s, 0.4, 1.8); }, 0.05,
                       "balance while sweeping the cart quickly between x=-0.4 and x=0.4"});
        return out;
    }
    if (env_id == "lander-lite") {
        auto vertical = [](const Vec& s, double steepness) {
            double y = s[1], vy = s[3];
            double v_des = -std::max(0.08, steepness * y);
            return descend_thrust(vy, v_des);
        };
        out.push_back({"steep-descent", env_id,
                       [vertical](const Vec& s) {
                           return Vec{vertical(s, 0.6), 0.0};
                       },
                       0.05, "drop straight down fast, braking near the ground"});
        out.push_back({"left-arc", env_id,
                       [vertical](const Vec& s) {
                           double y = s[1], vx = s[2];
                           double vx_des = y > 0.4 ? -0.25 : 0.0;
                           return Vec{vertical(s, 0.35), clamp(4.0 * (vx_des - vx), -1.0, 1.0)};
                       },
                       0.05, "drift left while descending, straightening near the ground"});
        out.push_back({"right-arc", env_id,
                       [vertical](const Vec& s) {
                           double y = s[1], vx = s[2];
                           double vx_des = y > 0.4 ? 0.25 : 0.0;
                           return Vec{vertical(s, 0.35), clamp(4.0 * (vx_des - vx), -1.0, 1.0)};
                       },
                       0.05, "drift right while descending, straightening near the ground"});
        // the slowly growing |vx| acts as a state-only clock: hover near
        // y=0.55 until the drift budget is spent, then descend
        out.push_back({"hover-then-drop", env_id,
                       [](const Vec& s) {
                           double y = s[1], vx = s[2], vy = s[3];
                           double v_des;
                           if (vx < 0.25 && y > 0.35)
                               v_des = clamp(2.0 * (0.55 - y), -0.2, 0.2);
                           else
                               v_des = -std::max(0.08, 0.5 * y);
                           double lat = (vx < 0.25 && y > 0.35) ? 0.35 : clamp(-4.0 * vx, -1.0, 1.0);
                           return Vec{descend_thrust(vy, v_des), lat};
                       },
                       0.05, "hover mid-air for a while, then drop to the pad"});
        out.push_back({"two-burn", env_id,
                       [](const Vec& s) {
                           double y = s[1], vy = s[3];
                           if (y >= 0.55) return Vec{0.0, 0.0};   // first free fall
                           if (y < 0.18) {                        // final braking
                               double v_des = -0.08;
                               return Vec{descend_thrust(vy, v_des), 0.0};
                           }
                           if (vy < -0.30) return Vec{1.0, 0.0};  // hard mid-air burn
                           return Vec{0.0, 0.0};                  // second free fall
                       },
                       0.05, "free fall, one hard mid-air burn, free fall, final braking"});
        return out;
    }
    throw ConfigError("builtin_strategies: unknown environment id " + env_id);
}

ScriptedStrategy find_strategy(const std::string& env_id, const std::string& strategy_id) {
    for (ScriptedStrategy& s : builtin_strategies(env_id))
        if (s.id == strategy_id) return s;
    throw ConfigError("unknown strategy id " + strategy_id + " for " + env_id);
}

std::vector<Demonstration> generate_demo_set(const Environment& env,
                                             const std::vector<ScriptedStrategy>& strategies,
                                             std::size_t per_strategy, RandomStream& rng,
                                             ArrivalOrder order) {
    check(per_strategy >= 1, "generate_demo_set: per_strategy must be >= 1");
    std::vector<Demonstration> demos;
    for (std::size_t j = 0; j < strategies.size(); ++j) {
        ScriptedPolicy policy(strategies[j], env.spec());
        for (std::size_t k = 0; k < per_strategy; ++k) {
            RandomStream stream = rng.spawn(j * 1000 + k);
            Demonstration d;
            d.trajectory = rollout(env, policy, env.spec().horizon, stream);
            d.true_strategy_label = int(j);
            demos.push_back(std::move(d));
        }
    }
    if (order == ArrivalOrder::Shuffled) {
        // Fisher-Yates on the shared stream
        for (std::size_t i = demos.size(); i > 1; --i) {
            std::size_t j = std::size_t(rng.uniform() * double(i));
            if (j >= i) j = i - 1;
            std::swap(demos[i - 1], demos[j]);
        }
    }
    for (std::size_t i = 0; i < demos.size(); ++i) demos[i].arrival_index = i + 1;
    return demos;
}

Demonstration generate_weighted_demo(const Environment& env,
                                     const std::vector<ScriptedStrategy>& bases, const Vec& weights,
                                     std::size_t arrival_index, RandomStream& rng) {
    double sum = 0.0;
    for (double w : weights) {
        check(w >= 0.0, "generate_weighted_demo: negative weight");
        sum += w;
    }
    check(std::fabs(sum - 1.0) <= 1e-9, "generate_weighted_demo: weights must sum to one");
    ScriptedMixturePolicy mix(bases, weights, env.spec());
    Demonstration d;
    d.trajectory = rollout(env, mix, env.spec().horizon, rng);
    d.true_mixture_weights = weights;
    d.arrival_index = arrival_index;
    return d;
}

std::vector<Demonstration> generate_mixture_demos(const Environment& env,
                                                  const std::vector<ScriptedStrategy>& bases,
                                                  std::size_t n_mixtures, RandomStream& rng) {
    check(bases.size() >= 2, "generate_mixture_demos: need at least two base strategies");
    std::vector<Demonstration> demos;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        Vec one_hot(bases.size(), 0.0);
        one_hot[j] = 1.0;
        RandomStream stream = rng.spawn(j);
        Demonstration d = generate_weighted_demo(env, bases, one_hot, demos.size() + 1, stream);
        d.true_strategy_label = int(j);
        demos.push_back(std::move(d));
    }
    for (std::size_t k = 0; k < n_mixtures; ++k) {
        Vec w = sample_simplex(bases.size(), rng);
        RandomStream stream = rng.spawn(1000 + k);
        demos.push_back(generate_weighted_demo(env, bases, w, demos.size() + 1, stream));
    }
    return demos;
}

void save_demo_set(const std::vector<Demonstration>& demos, const std::string& env_id,
                   std::uint64_t seed, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "dmsrd-demoset-v1";
    manifest["env_id"] = env_id;
    manifest["seed"] = seed;
    manifest["count"] = demos.size();
    nlohmann::json entries = nlohmann::json::array();
    for (const Demonstration& d : demos) {
        char name[32];
        std::snprintf(name, sizeof(name), "demo_%04zu.traj", d.arrival_index);
        save_trajectory(d.trajectory, env_id, seed, (fs::path(dir) / name).string());
        nlohmann::json e;
        e["file"] = name;
        e["arrival_index"] = d.arrival_index;
        if (d.true_strategy_label) e["true_strategy_label"] = *d.true_strategy_label;
        if (!d.true_mixture_weights.empty()) e["true_mixture_weights"] = d.true_mixture_weights;
        entries.push_back(std::move(e));
    }
    manifest["demos"] = std::move(entries);
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IntegrityError("cannot write demo manifest in " + dir);
    f << manifest.dump(2) << '\n';
}

std::vector<Demonstration> load_demo_set(const std::string& dir, std::string* env_id,
                                         std::uint64_t* seed) {
    namespace fs = std::filesystem;
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IntegrityError("cannot open demo manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(f);
    if (manifest.value("format", "") != "dmsrd-demoset-v1")
        throw IntegrityError("bad demo manifest format in " + dir);
    if (env_id) *env_id = manifest.at("env_id").get<std::string>();
    if (seed) *seed = manifest.at("seed").get<std::uint64_t>();
    std::vector<Demonstration> demos;
    for (const auto& e : manifest.at("demos")) {
        Demonstration d;
        d.trajectory = load_trajectory((fs::path(dir) / e.at("file").get<std::string>()).string());
        d.arrival_index = e.at("arrival_index").get<std::size_t>();
        if (e.contains("true_strategy_label"))
            d.true_strategy_label = e.at("true_strategy_label").get<int>();
        if (e.contains("true_mixture_weights"))
            d.true_mixture_weights = e.at("true_mixture_weights").get<Vec>();
        demos.push_back(std::move(d));
    }
    return demos;
}

}  // namespace dmsrd
