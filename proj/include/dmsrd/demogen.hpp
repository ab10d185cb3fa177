#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmsrd/env.hpp"

namespace dmsrd {

// Deterministic state -> action rule plus exploration noise. These
// replace learned demonstrators: each id produces a measurably distinct
// state distribution on its environment.
struct ScriptedStrategy {
    std::string id;
    std::string env_id;
    std::function<Vec(const Vec&)> controller;
    double exploration_std = 0.05;
    std::string description;
};

class ScriptedPolicy final : public PolicyBase {
  public:
    ScriptedPolicy(ScriptedStrategy strategy, EnvSpec env_spec)
        : strategy_(std::move(strategy)), env_spec_(std::move(env_spec)) {}

    Vec act(const Vec& state, RandomStream& rng) const override;
    Vec mean_action(const Vec& state) const override;
    double log_prob(const Vec& state, const Vec& action) const override;

  private:
    ScriptedStrategy strategy_;
    EnvSpec env_spec_;
};

// Executed convex combination of scripted controllers: mean action is
// the weighted sum of component controller outputs.
class ScriptedMixturePolicy final : public PolicyBase {
  public:
    ScriptedMixturePolicy(std::vector<ScriptedStrategy> strategies, Vec weights, EnvSpec env_spec,
                          double sigma = 0.05);

    Vec act(const Vec& state, RandomStream& rng) const override;
    Vec mean_action(const Vec& state) const override;
    double log_prob(const Vec& state, const Vec& action) const override;

  private:
    std::vector<ScriptedStrategy> strategies_;
    Vec weights_;
    EnvSpec env_spec_;
    double sigma_;
};

// pendulum-lite: hold-center, hold-left, hold-right, slow-oscillate,
// fast-oscillate. lander-lite: steep-descent, left-arc, right-arc,
// hover-then-drop, two-burn.
std::vector<ScriptedStrategy> builtin_strategies(const std::string& env_id);

ScriptedStrategy find_strategy(const std::string& env_id, const std::string& strategy_id);

enum class ArrivalOrder { Sequential, Shuffled };

std::vector<Demonstration> generate_demo_set(const Environment& env,
                                             const std::vector<ScriptedStrategy>& strategies,
                                             std::size_t per_strategy, RandomStream& rng,
                                             ArrivalOrder order = ArrivalOrder::Sequential);

// One demo per base strategy first (one-hot metadata), then n_mixtures
// executed mixtures with flat-Dirichlet weights recorded as
// evaluation-only metadata.
std::vector<Demonstration> generate_mixture_demos(const Environment& env,
                                                  const std::vector<ScriptedStrategy>& bases,
                                                  std::size_t n_mixtures, RandomStream& rng);

// Single executed-mixture demo with explicit weights (used by presets).
Demonstration generate_weighted_demo(const Environment& env,
                                     const std::vector<ScriptedStrategy>& bases, const Vec& weights,
                                     std::size_t arrival_index, RandomStream& rng);

void save_demo_set(const std::vector<Demonstration>& demos, const std::string& env_id,
                   std::uint64_t seed, const std::string& dir);
std::vector<Demonstration> load_demo_set(const std::string& dir, std::string* env_id = nullptr,
                                         std::uint64_t* seed = nullptr);

}  // namespace dmsrd
