#pragma once

#include <memory>
#include <vector>

#include "dmsrd/env.hpp"
#include "dmsrd/mlp.hpp"

namespace dmsrd {

// State-only reward (or value) head: an MLP over normalized states
// producing a scalar. Bounded heads squash the output with tanh to
// [-1, 1]; strategy-only rewards are bounded so exp-of-return terms in
// the between-class loss stay in [e^-1, e^1].
class RewardNet {
  public:
    RewardNet(EnvSpec env_spec, MLPSpec spec, ParamSet params);

    static RewardNet create(const EnvSpec& env_spec, const std::vector<std::size_t>& hidden,
                            bool bounded, RandomStream& rng);

    const EnvSpec& env_spec() const { return env_spec_; }
    const MLPSpec& spec() const { return spec_; }
    const ParamSet& params() const { return params_; }
    ParamSet& mutable_params() { return params_; }

    double eval(const Vec& state) const;
    Vec batch_eval(const std::vector<Vec>& states) const;

    // Accumulates d(output)/d(params) * upstream into grads.
    void accumulate_grad(const Vec& state, double upstream, ParamSet& grads) const;

    // Callable view; copies the net, so it stays valid independently.
    StateRewardFn fn() const;

  private:
    EnvSpec env_spec_;
    MLPSpec spec_;
    MLP net_;
    ParamSet params_;
};

void save_reward(const RewardNet& reward, const std::string& prefix);
RewardNet load_reward(const std::string& prefix);

}  // namespace dmsrd
