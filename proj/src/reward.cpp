#include "dmsrd/reward.hpp"

#include <fstream>

#include <json.hpp>

namespace dmsrd {

RewardNet::RewardNet(EnvSpec env_spec, MLPSpec spec, ParamSet params)
    : env_spec_(std::move(env_spec)),
      spec_(std::move(spec)),
      net_(spec_),
      params_(std::move(params)) {
    check(spec_.input_dim == env_spec_.state_dim, "RewardNet: input dim mismatch");
    check(spec_.output_dim == 1, "RewardNet: scalar output required");
}

RewardNet RewardNet::create(const EnvSpec& env_spec, const std::vector<std::size_t>& hidden,
                            bool bounded, RandomStream& rng) {
    MLPSpec spec;
    spec.input_dim = env_spec.state_dim;
    spec.hidden = hidden;
    spec.output_dim = 1;
    spec.output_activation = bounded ? OutputActivation::Tanh : OutputActivation::Identity;
    MLP net(spec);
    return RewardNet(env_spec, spec, net.init_params(rng));
}

double RewardNet::eval(const Vec& state) const {
    return net_.forward(params_, normalize_state(env_spec_, state))[0];
}

Vec RewardNet::batch_eval(const std::vector<Vec>& states) const {
    Vec out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = eval(states[i]);
    return out;
}

void RewardNet::accumulate_grad(const Vec& state, double upstream, ParamSet& grads) const {
    MLPCache cache;
    net_.forward(params_, normalize_state(env_spec_, state), cache);
    net_.backward(params_, cache, {upstream}, grads);
}

StateRewardFn RewardNet::fn() const {
    auto copy = std::make_shared<RewardNet>(*this);
    return [copy](const Vec& state) { return copy->eval(state); };
}

void save_reward(const RewardNet& reward, const std::string& prefix) {
    save_checkpoint(reward.params(), prefix + ".ckpt");
    nlohmann::json meta;
    meta["env_id"] = reward.env_spec().id;
    meta["horizon"] = reward.env_spec().horizon;
    meta["hidden"] = reward.spec().hidden;
    meta["bounded"] = reward.spec().output_activation == OutputActivation::Tanh;
    std::ofstream f(prefix + ".json");
    if (!f) throw IntegrityError("cannot write reward metadata: " + prefix);
    f << meta.dump(2) << '\n';
}

RewardNet load_reward(const std::string& prefix) {
    std::ifstream f(prefix + ".json");
    if (!f) throw IntegrityError("cannot open reward metadata: " + prefix);
    nlohmann::json meta = nlohmann::json::parse(f);
    auto env = make_env(meta.at("env_id").get<std::string>(), meta.at("horizon").get<std::size_t>());
    MLPSpec spec;
    spec.input_dim = env->spec().state_dim;
    spec.hidden = meta.at("hidden").get<std::vector<std::size_t>>();
    spec.output_dim = 1;
    spec.output_activation =
        meta.at("bounded").get<bool>() ? OutputActivation::Tanh : OutputActivation::Identity;
    return RewardNet(env->spec(), spec, load_checkpoint(prefix + ".ckpt"));
}

}  // namespace dmsrd
