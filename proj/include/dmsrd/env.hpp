#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmsrd/common.hpp"

namespace dmsrd {

struct EnvSpec {
    std::string id;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    Vec action_low, action_high;
    std::size_t horizon = 0;
    double dt = 0.0;
    double gamma = 0.99;
    // Fixed affine input normalizer for function approximators:
    // normalized = (s - norm_shift) * norm_scale. States themselves are
    // stored unnormalized everywhere.
    Vec norm_shift, norm_scale;

    void validate() const;
};

struct Trajectory {
    std::vector<Vec> states;   // one state per emitted action
    std::vector<Vec> actions;
    Vec env_rewards;
    Vec terminal_state;
    double gamma = 0.99;

    std::size_t steps() const { return actions.size(); }
    void validate() const;
};

struct Demonstration {
    Trajectory trajectory;
    std::size_t arrival_index = 0;  // 1-based
    // Evaluation-only metadata. Learning code never reads these; only
    // evalkit and test assertions do.
    std::optional<int> true_strategy_label;
    Vec true_mixture_weights;  // empty when not a generated mixture
};

// Environments are pure step functions: all state is passed explicitly,
// so rollouts with independent RNG streams can run in parallel.
class Environment {
  public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Vec reset(RandomStream& rng) const = 0;
    virtual std::pair<Vec, double> step(const Vec& state, const Vec& action) const = 0;
};

// Known ids: "pendulum-lite", "lander-lite". horizon 0 keeps the
// environment default (200 / 150).
std::unique_ptr<Environment> make_env(const std::string& id, std::size_t horizon = 0);

Vec normalize_state(const EnvSpec& spec, const Vec& state);

Vec clamp_action(const EnvSpec& spec, const Vec& action);

// Minimal policy contract needed by rollout; GaussianPolicy, mixtures
// and scripted controllers all implement it.
struct PolicyBase {
    virtual ~PolicyBase() = default;
    virtual Vec act(const Vec& state, RandomStream& rng) const = 0;
    virtual Vec mean_action(const Vec& state) const = 0;
    // log-density of the pre-clamp action distribution
    virtual double log_prob(const Vec& state, const Vec& action) const = 0;
};

double policy_log_likelihood(const PolicyBase& policy, const Trajectory& traj);

Trajectory rollout(const Environment& env, const PolicyBase& policy, std::size_t horizon,
                   RandomStream& rng);

using StateRewardFn = std::function<double(const Vec&)>;
using TransitionRewardFn = std::function<double(const Vec& state, const Vec& next)>;

double discounted_return(const Trajectory& traj, const StateRewardFn& reward_fn, double gamma);

double env_return(const Trajectory& traj);  // undiscounted sum of env rewards

// Line-delimited trajectory records; lossless at 64-bit precision.
void save_trajectory(const Trajectory& traj, const std::string& env_id, std::uint64_t seed,
                     const std::string& path);
Trajectory load_trajectory(const std::string& path, std::string* env_id = nullptr,
                           std::uint64_t* seed = nullptr);

}  // namespace dmsrd
