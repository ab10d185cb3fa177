#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dmsrd/env.hpp"
#include "dmsrd/mlp.hpp"

namespace dmsrd {

// Gaussian policy: state-dependent mean from an MLP over normalized
// states, state-independent learnable log-stddev per action dimension
// (parameter "log_std").
class GaussianPolicy final : public PolicyBase {
  public:
    GaussianPolicy(EnvSpec env_spec, MLPSpec mean_spec, ParamSet params);

    static GaussianPolicy create(const EnvSpec& env_spec, const std::vector<std::size_t>& hidden,
                                 RandomStream& rng, double init_log_std = -1.2);

    const EnvSpec& env_spec() const { return env_spec_; }
    const MLPSpec& mean_spec() const { return mean_spec_; }
    const ParamSet& params() const { return params_; }
    ParamSet& mutable_params() { return params_; }

    // (mean, stddev) of the pre-clamp action distribution.
    std::pair<Vec, Vec> action_distribution(const Vec& state) const;

    Vec act(const Vec& state, RandomStream& rng) const override;
    Vec mean_action(const Vec& state) const override;

    // Sum of per-step Gaussian log-densities of the demonstrated
    // actions; the pre-clamp density, clamping is ignored.
    double log_likelihood(const Trajectory& traj) const;

    double log_prob(const Vec& state, const Vec& action) const override;

  private:
    EnvSpec env_spec_;
    MLPSpec mean_spec_;
    MLP mean_net_;
    ParamSet params_;
};

void save_policy(const GaussianPolicy& policy, const std::string& prefix);
GaussianPolicy load_policy(const std::string& prefix);

struct PPOConfig {
    std::size_t rollouts_per_iter = 8;
    std::size_t epochs_per_batch = 4;
    double clip = 0.2;
    double gae_lambda = 0.95;
    double policy_lr = 3e-3;
    double value_lr = 1e-2;
    double entropy_coef = 0.0;
    double log_std_min = -3.5;
    double log_std_max = 0.5;
    std::vector<std::size_t> value_hidden = {32, 32};
};

// Frozen on-policy batch for the clipped-surrogate objective. States are
// raw; normalization happens inside the policy.
struct PPOBatch {
    std::vector<Vec> states;
    std::vector<Vec> actions;
    Vec advantages;
    Vec old_log_probs;
};

// Clipped-surrogate loss (to be minimized) and its reverse-mode
// gradient w.r.t. the policy parameters.
double ppo_surrogate_loss(const GaussianPolicy& policy, const ParamSet& params,
                          const PPOBatch& batch, const PPOConfig& cfg);
double ppo_surrogate_grad(const GaussianPolicy& policy, const ParamSet& params,
                          const PPOBatch& batch, const PPOConfig& cfg, ParamSet& grads);

// Stateful clipped-surrogate trainer: keeps the value baseline and
// optimizer moments across iterations so callers (AIRL, joint updates)
// can interleave their own steps between generator iterations.
class PPOTrainer {
  public:
    PPOTrainer(GaussianPolicy policy, PPOConfig cfg, RandomStream& init_rng);

    std::vector<Trajectory> collect(const Environment& env, RandomStream& rng);

    // GAE + epochs over the given on-policy rollouts; returns the mean
    // pseudo-return. Throws TrainingError on divergence. The transition
    // overload sees (state, next state), which AIRL needs for its shaped
    // pseudo-reward.
    double update(const StateRewardFn& reward_fn, const std::vector<Trajectory>& rollouts);
    double update(const TransitionRewardFn& reward_fn, const std::vector<Trajectory>& rollouts);

    const GaussianPolicy& policy() const { return policy_; }
    GaussianPolicy& mutable_policy() { return policy_; }

  private:
    GaussianPolicy policy_;
    PPOConfig cfg_;
    MLP value_net_;
    ParamSet value_params_;
    Adam policy_opt_;
    Adam value_opt_;
    std::size_t iteration_ = 0;
};

// Clipped-surrogate policy-gradient training against a state reward.
// Deterministic given the stream's seed. Throws TrainingError on
// divergence.
GaussianPolicy improve_policy(const GaussianPolicy& policy, const StateRewardFn& reward_fn,
                              const Environment& env, std::size_t iterations, RandomStream& rng,
                              const PPOConfig& cfg = {});

double gaussian_log_density(double x, double mean, double stddev);

}  // namespace dmsrd
