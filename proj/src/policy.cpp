#include "dmsrd/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace dmsrd {

double gaussian_log_density(double x, double mean, double stddev) {
    double z = (x - mean) / stddev;
    return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * M_PI);
}

GaussianPolicy::GaussianPolicy(EnvSpec env_spec, MLPSpec mean_spec, ParamSet params)
    : env_spec_(std::move(env_spec)),
      mean_spec_(std::move(mean_spec)),
      mean_net_(mean_spec_),
      params_(std::move(params)) {
    check(mean_spec_.input_dim == env_spec_.state_dim, "GaussianPolicy: input dim mismatch");
    check(mean_spec_.output_dim == env_spec_.action_dim, "GaussianPolicy: output dim mismatch");
    check(params_.has("log_std"), "GaussianPolicy: missing log_std");
    check(params_.get("log_std").size() == env_spec_.action_dim,
          "GaussianPolicy: log_std dimension mismatch");
}

GaussianPolicy GaussianPolicy::create(const EnvSpec& env_spec,
                                      const std::vector<std::size_t>& hidden, RandomStream& rng,
                                      double init_log_std) {
    MLPSpec spec;
    spec.input_dim = env_spec.state_dim;
    spec.hidden = hidden;
    spec.output_dim = env_spec.action_dim;
    spec.output_activation = OutputActivation::Identity;
    MLP net(spec);
    ParamSet params = net.init_params(rng);
    params.add("log_std", Tensor({env_spec.action_dim}, init_log_std));
    return GaussianPolicy(env_spec, spec, std::move(params));
}

std::pair<Vec, Vec> GaussianPolicy::action_distribution(const Vec& state) const {
    if (!all_finite(state)) throw NumericalError("action_distribution: non-finite state");
    Vec mean = mean_net_.forward(params_, normalize_state(env_spec_, state));
    const Tensor& log_std = params_.get("log_std");
    Vec std(mean.size());
    for (std::size_t i = 0; i < std.size(); ++i) std[i] = std::exp(log_std.data[i]);
    return {mean, std};
}

Vec GaussianPolicy::act(const Vec& state, RandomStream& rng) const {
    auto [mean, std] = action_distribution(state);
    Vec a(mean.size());
    // return the raw sample so log_prob is the exact sampling density;
    // the environment saturates the actuator when the action is applied
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = mean[i] + std[i] * rng.normal();
    return a;
}

Vec GaussianPolicy::mean_action(const Vec& state) const {
    auto [mean, std] = action_distribution(state);
    return clamp_action(env_spec_, mean);
}

double GaussianPolicy::log_prob(const Vec& state, const Vec& action) const {
    auto [mean, std] = action_distribution(state);
    check(action.size() == mean.size(), "log_prob: action dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
        acc += gaussian_log_density(action[i], mean[i], std[i]);
    return acc;
}

double GaussianPolicy::log_likelihood(const Trajectory& traj) const {
    traj.validate();
    double acc = 0.0;
    for (std::size_t t = 0; t < traj.steps(); ++t) acc += log_prob(traj.states[t], traj.actions[t]);
    return acc;
}

void save_policy(const GaussianPolicy& policy, const std::string& prefix) {
    save_checkpoint(policy.params(), prefix + ".ckpt");
    nlohmann::json meta;
    meta["env_id"] = policy.env_spec().id;
    meta["horizon"] = policy.env_spec().horizon;
    meta["hidden"] = policy.mean_spec().hidden;
    std::ofstream f(prefix + ".json");
    if (!f) throw IntegrityError("cannot write policy metadata: " + prefix);
    f << meta.dump(2) << '\n';
}

GaussianPolicy load_policy(const std::string& prefix) {
    std::ifstream f(prefix + ".json");
    if (!f) throw IntegrityError("cannot open policy metadata: " + prefix);
    nlohmann::json meta = nlohmann::json::parse(f);
    auto env = make_env(meta.at("env_id").get<std::string>(), meta.at("horizon").get<std::size_t>());
    MLPSpec spec;
    spec.input_dim = env->spec().state_dim;
    spec.hidden = meta.at("hidden").get<std::vector<std::size_t>>();
    spec.output_dim = env->spec().action_dim;
    return GaussianPolicy(env->spec(), spec, load_checkpoint(prefix + ".ckpt"));
}

namespace {

struct SurrogateTerms {
    double loss = 0.0;
};

// Shared forward/backward over the frozen batch. When grads != nullptr
// the per-sample gradient w.r.t. (mean, log_std) is backpropagated.
double surrogate_eval(const GaussianPolicy& policy, const ParamSet& params, const PPOBatch& batch,
                      const PPOConfig& cfg, ParamSet* grads) {
    check(!batch.states.empty(), "ppo surrogate: empty batch");
    check(batch.states.size() == batch.actions.size() &&
              batch.states.size() == batch.advantages.size() &&
              batch.states.size() == batch.old_log_probs.size(),
          "ppo surrogate: ragged batch");

    MLP net(policy.mean_spec());
    const EnvSpec& env_spec = policy.env_spec();
    const Tensor& log_std = params.get("log_std");
    std::size_t adim = env_spec.action_dim;
    double n = double(batch.states.size());
    double loss = 0.0;

    for (std::size_t i = 0; i < batch.states.size(); ++i) {
        MLPCache cache;
        Vec norm = normalize_state(env_spec, batch.states[i]);
        Vec mean = net.forward(params, norm, cache);
        const Vec& a = batch.actions[i];
        double logp = 0.0;
        for (std::size_t d = 0; d < adim; ++d)
            logp += gaussian_log_density(a[d], mean[d], std::exp(log_std.data[d]));

        double ratio = std::exp(logp - batch.old_log_probs[i]);
        double adv = batch.advantages[i];
        double unclipped = ratio * adv;
        double clipped = clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        double objective = std::min(unclipped, clipped);
        loss -= objective / n;

        double entropy = 0.0;
        for (std::size_t d = 0; d < adim; ++d)
            entropy += log_std.data[d] + 0.5 * std::log(2.0 * M_PI * M_E);
        loss -= cfg.entropy_coef * entropy / n;

        if (grads) {
            // d objective / d logp
            double dobj_dlogp = 0.0;
            if (unclipped <= clipped) {
                dobj_dlogp = unclipped;  // d(ratio*adv)/dlogp = ratio*adv
            } else if (ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip) {
                dobj_dlogp = ratio * adv;
            }
            double dloss_dlogp = -dobj_dlogp / n;
            Vec dmean(adim);
            Tensor& g_log_std = grads->get("log_std");
            for (std::size_t d = 0; d < adim; ++d) {
                double sd = std::exp(log_std.data[d]);
                double z = (a[d] - mean[d]) / sd;
                dmean[d] = dloss_dlogp * z / sd;            // dlogp/dmean = z/sd
                g_log_std.data[d] += dloss_dlogp * (z * z - 1.0);  // dlogp/dlogsd
                g_log_std.data[d] += -cfg.entropy_coef / n;        // entropy term
            }
            net.backward(params, cache, dmean, *grads);
        }
    }
    return loss;
}

}  // namespace

double ppo_surrogate_loss(const GaussianPolicy& policy, const ParamSet& params,
                          const PPOBatch& batch, const PPOConfig& cfg) {
    return surrogate_eval(policy, params, batch, cfg, nullptr);
}

double ppo_surrogate_grad(const GaussianPolicy& policy, const ParamSet& params,
                          const PPOBatch& batch, const PPOConfig& cfg, ParamSet& grads) {
    return surrogate_eval(policy, params, batch, cfg, &grads);
}

namespace {

MLPSpec value_spec_for(const EnvSpec& env_spec, const PPOConfig& cfg) {
    MLPSpec spec;
    spec.input_dim = env_spec.state_dim;
    spec.hidden = cfg.value_hidden;
    spec.output_dim = 1;
    return spec;
}

}  // namespace

PPOTrainer::PPOTrainer(GaussianPolicy policy, PPOConfig cfg, RandomStream& init_rng)
    : policy_(std::move(policy)),
      cfg_(std::move(cfg)),
      value_net_(value_spec_for(policy_.env_spec(), cfg_)),
      value_params_(value_net_.init_params(init_rng)),
      policy_opt_(cfg_.policy_lr),
      value_opt_(cfg_.value_lr) {}

std::vector<Trajectory> PPOTrainer::collect(const Environment& env, RandomStream& rng) {
    std::vector<Trajectory> rollouts;
    rollouts.reserve(cfg_.rollouts_per_iter);
    for (std::size_t k = 0; k < cfg_.rollouts_per_iter; ++k) {
        RandomStream stream = rng.spawn(iteration_ * 1000 + k);
        rollouts.push_back(rollout(env, policy_, env.spec().horizon, stream));
    }
    ++iteration_;
    return rollouts;
}

double PPOTrainer::update(const StateRewardFn& reward_fn, const std::vector<Trajectory>& rollouts) {
    return update([&reward_fn](const Vec& s, const Vec&) { return reward_fn(s); }, rollouts);
}

double PPOTrainer::update(const TransitionRewardFn& reward_fn,
                          const std::vector<Trajectory>& rollouts) {
    check(!rollouts.empty(), "PPOTrainer: no rollouts");
    const EnvSpec& env_spec = policy_.env_spec();
    double gamma = env_spec.gamma;

    PPOBatch batch;
    Vec returns;  // value-net regression targets
    double mean_return = 0.0;
    for (const Trajectory& traj : rollouts) {
        std::size_t T = traj.steps();
        Vec rewards(T), values(T + 1);
        for (std::size_t t = 0; t < T; ++t) {
            const Vec& next = t + 1 < T ? traj.states[t + 1] : traj.terminal_state;
            rewards[t] = reward_fn(traj.states[t], next);
            values[t] =
                value_net_.forward(value_params_, normalize_state(env_spec, traj.states[t]))[0];
        }
        values[T] =
            value_net_.forward(value_params_, normalize_state(env_spec, traj.terminal_state))[0];
        Vec adv(T);
        double gae = 0.0;
        for (std::size_t t = T; t-- > 0;) {
            double delta = rewards[t] + gamma * values[t + 1] - values[t];
            gae = delta + gamma * cfg_.gae_lambda * gae;
            adv[t] = gae;
            mean_return += rewards[t];
        }
        for (std::size_t t = 0; t < T; ++t) {
            batch.states.push_back(traj.states[t]);
            batch.actions.push_back(traj.actions[t]);
            batch.advantages.push_back(adv[t]);
            batch.old_log_probs.push_back(policy_.log_prob(traj.states[t], traj.actions[t]));
            returns.push_back(adv[t] + values[t]);
        }
    }
    mean_return /= double(rollouts.size());

    // normalize advantages on the frozen batch
    double mean = 0.0;
    for (double a : batch.advantages) mean += a;
    mean /= double(batch.advantages.size());
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    double sd = std::sqrt(var / double(batch.advantages.size()));
    for (double& a : batch.advantages) a = (a - mean) / (sd + 1e-8);

    for (std::size_t epoch = 0; epoch < cfg_.epochs_per_batch; ++epoch) {
        ParamSet grads = policy_.params().zeros_like();
        double loss = ppo_surrogate_grad(policy_, policy_.params(), batch, cfg_, grads);
        if (!std::isfinite(loss)) throw TrainingError("PPOTrainer: non-finite surrogate loss");
        policy_opt_.step(policy_.mutable_params(), grads);
        Tensor& ls = policy_.mutable_params().get("log_std");
        for (double& v : ls.data) v = clamp(v, cfg_.log_std_min, cfg_.log_std_max);

        ParamSet vgrads = value_params_.zeros_like();
        double n = double(batch.states.size());
        for (std::size_t i = 0; i < batch.states.size(); ++i) {
            MLPCache cache;
            Vec out =
                value_net_.forward(value_params_, normalize_state(env_spec, batch.states[i]), cache);
            double err = out[0] - returns[i];
            value_net_.backward(value_params_, cache, {2.0 * err / n}, vgrads);
        }
        value_opt_.step(value_params_, vgrads);
    }
    return mean_return;
}

GaussianPolicy improve_policy(const GaussianPolicy& policy, const StateRewardFn& reward_fn,
                              const Environment& env, std::size_t iterations, RandomStream& rng,
                              const PPOConfig& cfg) {
    RandomStream init_rng = rng.spawn(0x5A11);
    PPOTrainer trainer(policy, cfg, init_rng);
    for (std::size_t iter = 0; iter < iterations; ++iter) {
        auto rollouts = trainer.collect(env, rng);
        trainer.update(reward_fn, rollouts);
    }
    return trainer.policy();
}

}  // namespace dmsrd
