#pragma once

#include <vector>

#include "dmsrd/policy.hpp"
#include "dmsrd/reward.hpp"

namespace dmsrd {

struct Transition {
    Vec s, a, sp;
};

std::vector<Transition> transitions_of(const Trajectory& traj);

// AIRL discriminator: D = exp(f) / (exp(f) + pi(a|s)) with
// f = g(s) + gamma*h(s') - h(s). Logits f - log pi are clipped to
// [-20, 20].
struct AIRLDiscriminator {
    RewardNet g;  // reward head
    RewardNet h;  // shaping / value head
    double gamma;
};

constexpr double kLogitClip = 20.0;

double discriminator_logit(const AIRLDiscriminator& disc, const GaussianPolicy& policy,
                           const Transition& tr);
double discriminator_prob(const AIRLDiscriminator& disc, const GaussianPolicy& policy,
                          const Transition& tr);

// Cross-entropy: -E_demo[log D] - E_gen[log(1 - D)], mean over each
// batch's transitions. grads, when given, must hold entries laid out as
// pack_airl_params / by the caller; see airl_loss_grad.
double airl_discriminator_loss(const AIRLDiscriminator& disc,
                               const std::vector<Transition>& demo_batch,
                               const std::vector<Transition>& gen_batch,
                               const GaussianPolicy& policy);
double airl_loss_grad(const AIRLDiscriminator& disc, const std::vector<Transition>& demo_batch,
                      const std::vector<Transition>& gen_batch, const GaussianPolicy& policy,
                      ParamSet& g_grads, ParamSet& h_grads);

// Shared-task reward decomposition: R_j(s) = task(s) + alpha *
// strategy_j(s). Strategy heads are bounded; the task head is not.
struct RewardDecomposition {
    RewardNet task;
    std::vector<RewardNet> strategies;
    double alpha = 0.01;
};

StateRewardFn combined_reward(const RewardDecomposition& decomp, std::size_t strategy);

// One strategy's slice of the shared-task adversarial loss.
struct StrategyBatch {
    std::vector<Transition> demo;
    std::vector<Transition> gen;
    const GaussianPolicy* policy = nullptr;
};

// Sum over strategies of the cross-entropy with D using R_j as reward
// head plus the alpha-weighted L1 magnitude of strategy-only rewards on
// generator states. Requires at least two strategies.
double msrd_loss(const RewardDecomposition& decomp, const std::vector<RewardNet>& value_heads,
                 const std::vector<StrategyBatch>& batches);
double msrd_loss_grad(const RewardDecomposition& decomp, const std::vector<RewardNet>& value_heads,
                      const std::vector<StrategyBatch>& batches, ParamSet& task_grads,
                      std::vector<ParamSet>& strategy_grads, std::vector<ParamSet>& value_grads);

// Horizon-normalized discounted return of a bounded strategy reward:
// sum_t gamma^{t-1} R(s_t) divided by sum_t gamma^{t-1}, so
// exp(eta) stays in [e^-1, e^1].
double normalized_return(const RewardNet& reward, const Trajectory& traj, double gamma);

// Between-class discrimination (MSE across strategies):
// sum_j (exp(eta_j(tau_i)) - w_j * exp(eta_j(tau_{m_j})))^2.
double bcd_loss(const RewardDecomposition& decomp, const Trajectory& demo, const Vec& weights,
                const std::vector<const Trajectory*>& pure_demos, double gamma);
double bcd_loss_grad(const RewardDecomposition& decomp, const Trajectory& demo, const Vec& weights,
                     const std::vector<const Trajectory*>& pure_demos, double gamma,
                     std::vector<ParamSet>& strategy_grads);

struct AIRLConfig {
    std::size_t iterations = 120;
    std::size_t disc_steps_per_iter = 2;
    double disc_lr = 2e-3;
    std::size_t bc_steps = 200;  // behavior-cloning warm-start steps
    double bc_lr = 1e-2;
    // discriminator steps against the untrained generator, taken before
    // the warm start; they pin g high on the demonstration manifold
    std::size_t pretrain_disc_steps = 30;
    std::size_t snapshot_every = 10;   // keep the best-KL generator snapshot
    std::size_t snapshot_rollouts = 5;
    std::vector<std::size_t> reward_hidden = {32, 32};
    std::vector<std::size_t> policy_hidden = {32, 32};
    PPOConfig ppo;
};

struct TrainedStrategy {
    GaussianPolicy policy;
    RewardNet g;  // bounded; becomes the provisional strategy reward
    RewardNet h;
    Vec disc_loss_trace;
};

// Single-demonstration AIRL: alternates discriminator cross-entropy
// steps with clipped-surrogate generator steps on the pseudo-reward
// g(s). Deterministic given the stream's seed.
TrainedStrategy train_new_strategy_airl(const Demonstration& demo, const Environment& env,
                                        RandomStream& rng, const AIRLConfig& cfg = {});

}  // namespace dmsrd
