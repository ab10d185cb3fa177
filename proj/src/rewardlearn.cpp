#include "dmsrd/rewardlearn.hpp"

#include <cmath>
#include <limits>

#include "dmsrd/mixture.hpp"

namespace dmsrd {

namespace {

double log_sigmoid(double z) {
    return z < 0.0 ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::vector<Transition> transitions_of(const Trajectory& traj) {
    traj.validate();
    std::vector<Transition> out;
    out.reserve(traj.steps());
    for (std::size_t t = 0; t < traj.steps(); ++t) {
        const Vec& next = (t + 1 < traj.steps()) ? traj.states[t + 1] : traj.terminal_state;
        out.push_back({traj.states[t], traj.actions[t], next});
    }
    return out;
}

double discriminator_logit(const AIRLDiscriminator& disc, const GaussianPolicy& policy,
                           const Transition& tr) {
    double f = disc.g.eval(tr.s) + disc.gamma * disc.h.eval(tr.sp) - disc.h.eval(tr.s);
    double logp = policy.log_prob(tr.s, tr.a);
    if (!std::isfinite(logp)) throw NumericalError("discriminator: log pi(a|s) not finite");
    return clamp(f - logp, -kLogitClip, kLogitClip);
}

double discriminator_prob(const AIRLDiscriminator& disc, const GaussianPolicy& policy,
                          const Transition& tr) {
    return sigmoid(discriminator_logit(disc, policy, tr));
}

namespace {

// dloss/dlogit for one transition; zero when the logit clip is active.
struct LogitGrad {
    double value;
    bool clipped;
};

LogitGrad raw_logit(double f, double logp) {
    double z = f - logp;
    bool clipped = z <= -kLogitClip || z >= kLogitClip;
    return {clamp(z, -kLogitClip, kLogitClip), clipped};
}

}  // namespace

double airl_discriminator_loss(const AIRLDiscriminator& disc,
                               const std::vector<Transition>& demo_batch,
                               const std::vector<Transition>& gen_batch,
                               const GaussianPolicy& policy) {
    check(!demo_batch.empty() && !gen_batch.empty(), "airl loss: empty batch");
    double loss = 0.0;
    for (const Transition& tr : demo_batch)
        loss -= log_sigmoid(discriminator_logit(disc, policy, tr)) / double(demo_batch.size());
    for (const Transition& tr : gen_batch)
        loss -= log_sigmoid(-discriminator_logit(disc, policy, tr)) / double(gen_batch.size());
    return loss;
}

double airl_loss_grad(const AIRLDiscriminator& disc, const std::vector<Transition>& demo_batch,
                      const std::vector<Transition>& gen_batch, const GaussianPolicy& policy,
                      ParamSet& g_grads, ParamSet& h_grads) {
    check(!demo_batch.empty() && !gen_batch.empty(), "airl loss: empty batch");
    double loss = 0.0;
    auto accumulate = [&](const std::vector<Transition>& batch, bool is_demo) {
        double n = double(batch.size());
        for (const Transition& tr : batch) {
            double f = disc.g.eval(tr.s) + disc.gamma * disc.h.eval(tr.sp) - disc.h.eval(tr.s);
            double logp = policy.log_prob(tr.s, tr.a);
            LogitGrad lg = raw_logit(f, logp);
            double d = sigmoid(lg.value);
            loss -= log_sigmoid(is_demo ? lg.value : -lg.value) / n;
            if (lg.clipped) continue;
            double dz = (is_demo ? (d - 1.0) : d) / n;
            disc.g.accumulate_grad(tr.s, dz, g_grads);
            disc.h.accumulate_grad(tr.sp, dz * disc.gamma, h_grads);
            disc.h.accumulate_grad(tr.s, -dz, h_grads);
        }
    };
    accumulate(demo_batch, true);
    accumulate(gen_batch, false);
    return loss;
}

StateRewardFn combined_reward(const RewardDecomposition& decomp, std::size_t strategy) {
    check(strategy < decomp.strategies.size(), "combined_reward: unknown strategy index");
    StateRewardFn task = decomp.task.fn();
    StateRewardFn strat = decomp.strategies[strategy].fn();
    double alpha = decomp.alpha;
    return [task, strat, alpha](const Vec& s) { return task(s) + alpha * strat(s); };
}

namespace {

void check_msrd_inputs(const RewardDecomposition& decomp, const std::vector<RewardNet>& value_heads,
                       const std::vector<StrategyBatch>& batches) {
    std::size_t m = decomp.strategies.size();
    check(m >= 2, "msrd loss: requires at least two strategies");
    check(value_heads.size() == m && batches.size() == m, "msrd loss: ragged inputs");
    check(decomp.alpha >= 0.0, "msrd loss: alpha must be nonnegative");
    for (const StrategyBatch& b : batches) {
        check(!b.demo.empty(), "msrd loss: strategy with empty demo batch");
        check(!b.gen.empty(), "msrd loss: strategy with empty generator batch");
        check(b.policy != nullptr, "msrd loss: missing generator policy");
    }
}

}  // namespace

double msrd_loss(const RewardDecomposition& decomp, const std::vector<RewardNet>& value_heads,
                 const std::vector<StrategyBatch>& batches) {
    check_msrd_inputs(decomp, value_heads, batches);
    double loss = 0.0;
    for (std::size_t j = 0; j < decomp.strategies.size(); ++j) {
        const StrategyBatch& b = batches[j];
        const RewardNet& strat = decomp.strategies[j];
        const RewardNet& h = value_heads[j];
        auto term = [&](const Transition& tr, bool is_demo) {
            double f = decomp.task.eval(tr.s) + decomp.alpha * strat.eval(tr.s) +
                       decomp.task.env_spec().gamma * h.eval(tr.sp) - h.eval(tr.s);
            double z = clamp(f - b.policy->log_prob(tr.s, tr.a), -kLogitClip, kLogitClip);
            return -log_sigmoid(is_demo ? z : -z);
        };
        for (const Transition& tr : b.demo) loss += term(tr, true) / double(b.demo.size());
        for (const Transition& tr : b.gen) {
            loss += term(tr, false) / double(b.gen.size());
            loss += decomp.alpha * std::fabs(strat.eval(tr.s)) / double(b.gen.size());
        }
    }
    return loss;
}

double msrd_loss_grad(const RewardDecomposition& decomp, const std::vector<RewardNet>& value_heads,
                      const std::vector<StrategyBatch>& batches, ParamSet& task_grads,
                      std::vector<ParamSet>& strategy_grads, std::vector<ParamSet>& value_grads) {
    check_msrd_inputs(decomp, value_heads, batches);
    check(strategy_grads.size() == decomp.strategies.size() &&
              value_grads.size() == decomp.strategies.size(),
          "msrd grad: gradient container mismatch");
    double gamma = decomp.task.env_spec().gamma;
    double loss = 0.0;
    for (std::size_t j = 0; j < decomp.strategies.size(); ++j) {
        const StrategyBatch& b = batches[j];
        const RewardNet& strat = decomp.strategies[j];
        const RewardNet& h = value_heads[j];
        auto accumulate = [&](const std::vector<Transition>& batch, bool is_demo) {
            double n = double(batch.size());
            for (const Transition& tr : batch) {
                double f = decomp.task.eval(tr.s) + decomp.alpha * strat.eval(tr.s) +
                           gamma * h.eval(tr.sp) - h.eval(tr.s);
                LogitGrad lg = raw_logit(f, b.policy->log_prob(tr.s, tr.a));
                double d = sigmoid(lg.value);
                loss -= log_sigmoid(is_demo ? lg.value : -lg.value) / n;
                if (!lg.clipped) {
                    double dz = (is_demo ? (d - 1.0) : d) / n;
                    decomp.task.accumulate_grad(tr.s, dz, task_grads);
                    strat.accumulate_grad(tr.s, dz * decomp.alpha, strategy_grads[j]);
                    h.accumulate_grad(tr.sp, dz * gamma, value_grads[j]);
                    h.accumulate_grad(tr.s, -dz, value_grads[j]);
                }
                if (!is_demo) {
                    double r = strat.eval(tr.s);
                    loss += decomp.alpha * std::fabs(r) / n;
                    double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                    strat.accumulate_grad(tr.s, decomp.alpha * sign / n, strategy_grads[j]);
                }
            }
        };
        accumulate(b.demo, true);
        accumulate(b.gen, false);
    }
    return loss;
}

double normalized_return(const RewardNet& reward, const Trajectory& traj, double gamma) {
    traj.validate();
    double acc = 0.0, z = 0.0, w = 1.0;
    for (const Vec& s : traj.states) {
        acc += w * reward.eval(s);
        z += w;
        w *= gamma;
    }
    return acc / z;
}

namespace {

void check_bcd_inputs(const RewardDecomposition& decomp, const Vec& weights,
                      const std::vector<const Trajectory*>& pure_demos) {
    std::size_t m = decomp.strategies.size();
    check(weights.size() == m, "bcd loss: weight vector length != strategy count");
    check(pure_demos.size() == m, "bcd loss: pure demo list length != strategy count");
    double sum = 0.0;
    for (double w : weights) {
        check(w >= 0.0, "bcd loss: negative mixture weight");
        sum += w;
    }
    check(std::fabs(sum - 1.0) <= 1e-9, "bcd loss: mixture weights must sum to 1");
    for (const Trajectory* t : pure_demos)
        if (t == nullptr) throw IntegrityError("bcd loss: missing pure demonstration");
}

}  // namespace

double bcd_loss(const RewardDecomposition& decomp, const Trajectory& demo, const Vec& weights,
                const std::vector<const Trajectory*>& pure_demos, double gamma) {
    check_bcd_inputs(decomp, weights, pure_demos);
    double loss = 0.0;
    for (std::size_t j = 0; j < decomp.strategies.size(); ++j) {
        double ei = std::exp(normalized_return(decomp.strategies[j], demo, gamma));
        double em = std::exp(normalized_return(decomp.strategies[j], *pure_demos[j], gamma));
        double diff = ei - weights[j] * em;
        loss += diff * diff;
    }
    return loss;
}

double bcd_loss_grad(const RewardDecomposition& decomp, const Trajectory& demo, const Vec& weights,
                     const std::vector<const Trajectory*>& pure_demos, double gamma,
                     std::vector<ParamSet>& strategy_grads) {
    check_bcd_inputs(decomp, weights, pure_demos);
    check(strategy_grads.size() == decomp.strategies.size(), "bcd grad: container mismatch");
    double loss = 0.0;
    for (std::size_t j = 0; j < decomp.strategies.size(); ++j) {
        const RewardNet& strat = decomp.strategies[j];
        double eta_i = normalized_return(strat, demo, gamma);
        double eta_m = normalized_return(strat, *pure_demos[j], gamma);
        double ei = std::exp(eta_i), em = std::exp(eta_m);
        double diff = ei - weights[j] * em;
        loss += diff * diff;

        auto backprop_traj = [&](const Trajectory& traj, double upstream) {
            double z = 0.0, w = 1.0;
            for (std::size_t t = 0; t < traj.steps(); ++t) {
                z += w;
                w *= gamma;
            }
            w = 1.0;
            for (const Vec& s : traj.states) {
                strat.accumulate_grad(s, upstream * w / z, strategy_grads[j]);
                w *= gamma;
            }
        };
        backprop_traj(demo, 2.0 * diff * ei);
        backprop_traj(*pure_demos[j], -2.0 * diff * weights[j] * em);
    }
    return loss;
}

TrainedStrategy train_new_strategy_airl(const Demonstration& demo, const Environment& env,
                                        RandomStream& rng, const AIRLConfig& cfg) {
    const EnvSpec& env_spec = env.spec();
    demo.trajectory.validate();
    check(demo.trajectory.states[0].size() == env_spec.state_dim,
          "train_new_strategy_airl: demo/env mismatch");

    RandomStream net_rng = rng.spawn(0xA1B1);
    GaussianPolicy policy = GaussianPolicy::create(env_spec, cfg.policy_hidden, net_rng);
    RewardNet g = RewardNet::create(env_spec, cfg.reward_hidden, /*bounded=*/true, net_rng);
    RewardNet h = RewardNet::create(env_spec, cfg.reward_hidden, /*bounded=*/false, net_rng);
    Adam g_opt(cfg.disc_lr), h_opt(cfg.disc_lr);

    std::vector<Transition> demo_batch = transitions_of(demo.trajectory);

    // Pin the reward head before the adversarial game starts: against
    // the untrained generator the discriminator pushes g up on the
    // demonstration manifold and down elsewhere, and the later
    // near-equilibrium play barely moves it. The joint distillation
    // relies on that orientation to tell strategies apart.
    if (cfg.pretrain_disc_steps > 0) {
        RandomStream pre_rng = rng.spawn(0xA1B0);
        std::vector<Transition> pre_batch;
        for (std::size_t r = 0; r < cfg.ppo.rollouts_per_iter; ++r) {
            RandomStream stream = pre_rng.spawn(r);
            auto trs = transitions_of(rollout(env, policy, env_spec.horizon, stream));
            pre_batch.insert(pre_batch.end(), trs.begin(), trs.end());
        }
        for (std::size_t k = 0; k < cfg.pretrain_disc_steps; ++k) {
            AIRLDiscriminator disc{g, h, env_spec.gamma};
            ParamSet g_grads = g.params().zeros_like();
            ParamSet h_grads = h.params().zeros_like();
            double loss = airl_loss_grad(disc, demo_batch, pre_batch, policy, g_grads, h_grads);
            if (!std::isfinite(loss))
                throw TrainingError("AIRL: non-finite discriminator pretraining loss");
            g_opt.step(g.mutable_params(), g_grads);
            h_opt.step(h.mutable_params(), h_grads);
        }
    }

    // behavior-cloning warm start: gaussian NLL on the demonstrated
    // actions. Starting the generator on the demo's state manifold keeps
    // the discriminator fighting where its networks still have gradient;
    // from a random policy the bounded g head saturates on far-away
    // states and the game degenerates.
    {
        Adam bc_opt(cfg.bc_lr);
        MLP mean_net(policy.mean_spec());
        double n = double(demo_batch.size());
        for (std::size_t step = 0; step < cfg.bc_steps; ++step) {
            ParamSet grads = policy.params().zeros_like();
            Tensor& g_log_std = grads.get("log_std");
            const Tensor& log_std = policy.params().get("log_std");
            for (const Transition& tr : demo_batch) {
                MLPCache cache;
                Vec mean = mean_net.forward(policy.params(),
                                            normalize_state(env_spec, tr.s), cache);
                Vec dmean(mean.size());
                for (std::size_t d = 0; d < mean.size(); ++d) {
                    double sd = std::exp(log_std.data[d]);
                    double z = (tr.a[d] - mean[d]) / sd;
                    dmean[d] = -z / sd / n;
                    g_log_std.data[d] += (1.0 - z * z) / n;
                }
                mean_net.backward(policy.params(), cache, dmean, grads);
            }
            bc_opt.step(policy.mutable_params(), grads);
            Tensor& ls = policy.mutable_params().get("log_std");
            for (double& v : ls.data) v = clamp(v, cfg.ppo.log_std_min, cfg.ppo.log_std_max);
        }
    }

    RandomStream ppo_init = rng.spawn(0xA1B2);
    PPOTrainer trainer(std::move(policy), cfg.ppo, ppo_init);
    Vec trace;
    trace.reserve(cfg.iterations);

    // adversarial training oscillates; keep the snapshot that tracks the
    // demonstration best under the same KL score the caller will use
    RandomStream snap_rng = rng.spawn(0xA1B3);
    GaussianPolicy best_policy = trainer.policy();
    double best_kl = std::numeric_limits<double>::infinity();
    auto consider_snapshot = [&](std::size_t tag) {
        RandomStream kl_rng = snap_rng.spawn(tag);
        double kl = std::fabs(trajectory_kl(demo.trajectory, trainer.policy(), env,
                                            cfg.snapshot_rollouts, kl_rng));
        if (kl < best_kl) {
            best_kl = kl;
            best_policy = trainer.policy();
        }
    };
    consider_snapshot(0);

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<Trajectory> rollouts = trainer.collect(env, rng);
        std::vector<Transition> gen_batch;
        for (const Trajectory& t : rollouts) {
            auto trs = transitions_of(t);
            gen_batch.insert(gen_batch.end(), trs.begin(), trs.end());
        }

        double disc_loss = 0.0;
        for (std::size_t k = 0; k < cfg.disc_steps_per_iter; ++k) {
            AIRLDiscriminator disc{g, h, env_spec.gamma};
            ParamSet g_grads = g.params().zeros_like();
            ParamSet h_grads = h.params().zeros_like();
            disc_loss = airl_loss_grad(disc, demo_batch, gen_batch, trainer.policy(), g_grads,
                                       h_grads);
            if (!std::isfinite(disc_loss)) {
                throw TrainingError("AIRL: non-finite discriminator loss at iteration " +
                                    std::to_string(iter));
            }
            g_opt.step(g.mutable_params(), g_grads);
            h_opt.step(h.mutable_params(), h_grads);
        }
        trace.push_back(disc_loss);

        // generator chases the discriminator's full signal f = g + shaping;
        // the potential term leaves the optimal policy of g unchanged but
        // carries the gradient the bounded g head saturates away
        double gamma = env_spec.gamma;
        trainer.update(
            [&](const Vec& s, const Vec& sp) {
                return g.fn()(s) + gamma * h.fn()(sp) - h.fn()(s);
            },
            rollouts);

        if (cfg.snapshot_every > 0 && (iter + 1) % cfg.snapshot_every == 0)
            consider_snapshot(iter + 1);
    }
    return TrainedStrategy{std::move(best_policy), std::move(g), std::move(h), std::move(trace)};
}

}  // namespace dmsrd
