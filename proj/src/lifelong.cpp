#include "dmsrd/lifelong.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dmsrd/demogen.hpp"

namespace dmsrd {

namespace {

bool is_one_hot(const Vec& w, std::size_t* index) {
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] == 1.0) {
            *index = j;
            return true;
        }
        if (w[j] != 0.0) return false;
    }
    return false;
}

const Demonstration& find_demo(const std::vector<Demonstration>& demos, std::size_t arrival_index) {
    for (const Demonstration& d : demos)
        if (d.arrival_index == arrival_index) return d;
    throw IntegrityError("registry: missing demonstration with arrival index " +
                         std::to_string(arrival_index));
}

// Production arbitration: random mixture-weight search and single-demo
// AIRL, both scored by trajectory KL.
struct DefaultOracle final : ArbitrationOracle {
    WeightSearchResult search_mixture(const Registry& registry, const Demonstration& demo,
                                      const Environment& env, RandomStream& rng) override {
        std::vector<const GaussianPolicy*> policies;
        for (const StrategyRecord& s : registry.strategies()) policies.push_back(&s.policy);
        return optimize_mixture_weights(demo.trajectory, policies, env, rng,
                                        registry.config().search);
    }

    std::pair<StrategyRecord, double> train_candidate(const Registry& registry,
                                                      const Demonstration& demo,
                                                      const Environment& env,
                                                      RandomStream& rng) override {
        TrainedStrategy trained = train_new_strategy_airl(demo, env, rng, registry.config().airl);
        RandomStream kl_rng = rng.spawn(0xCE);
        double kl_new = trajectory_kl(demo.trajectory, trained.policy, env,
                                      registry.config().search.n_rollouts, kl_rng,
                                      registry.config().search.k);
        StrategyRecord record{std::move(trained.g), std::move(trained.h), std::move(trained.policy),
                              demo.arrival_index};
        return {std::move(record), kl_new};
    }
};

}  // namespace

double calibrate_noise_floor(const Environment& env, RandomStream& rng, std::size_t n_rollouts) {
    ScriptedStrategy probe = builtin_strategies(env.spec().id).front();
    ScriptedPolicy policy(probe, env.spec());
    RandomStream demo_rng = rng.spawn(1);
    Trajectory demo = rollout(env, policy, env.spec().horizon, demo_rng);
    RandomStream kl_rng = rng.spawn(2);
    return std::fabs(trajectory_kl(demo, policy, env, n_rollouts, kl_rng));
}

Registry Registry::create(const Environment& env, const LifelongConfig& cfg, RandomStream& rng) {
    Registry r;
    r.env_spec_ = env.spec();
    r.cfg_ = cfg;
    RandomStream net_rng = rng.spawn(0x7A5C);
    r.task_opt_ = RewardNet::create(env.spec(), cfg.airl.reward_hidden, /*bounded=*/false, net_rng);
    if (cfg.epsilon > 0.0) {
        r.epsilon_ = cfg.epsilon;
    } else {
        RandomStream cal_rng = rng.spawn(0xCA1B);
        r.epsilon_ = cfg.epsilon_scale * calibrate_noise_floor(env, cal_rng);
    }
    return r;
}

RewardDecomposition Registry::decomposition_view() const {
    RewardDecomposition d{*task_opt_, {}, cfg_.alpha};
    for (const StrategyRecord& s : strategies_) d.strategies.push_back(s.strategy_reward);
    return d;
}

std::pair<Vec, DecisionRecord> Registry::explain(std::size_t arrival_index) const {
    auto it = weights_.find(arrival_index);
    if (it == weights_.end())
        throw IntegrityError("explain: arrival index " + std::to_string(arrival_index) +
                             " was never ingested");
    Vec padded = it->second;
    padded.resize(strategies_.size(), 0.0);
    for (const DecisionRecord& d : decisions_)
        if (d.arrival_index == arrival_index) return {padded, d};
    throw IntegrityError("explain: missing decision record");
}

std::unique_ptr<PolicyBase> Registry::assigned_policy(std::size_t arrival_index) const {
    auto [weights, decision] = explain(arrival_index);
    std::size_t j = 0;
    if (is_one_hot(weights, &j)) return std::make_unique<GaussianPolicy>(strategies_[j].policy);
    std::vector<const GaussianPolicy*> policies;
    for (const StrategyRecord& s : strategies_) policies.push_back(&s.policy);
    double sigma = cfg_.search.sigma > 0.0 ? cfg_.search.sigma : default_mixture_sigma(policies);
    return std::make_unique<MixturePolicy>(MixtureWeights{weights, sigma}, policies);
}

DecisionRecord Registry::process_demonstration(const Demonstration& demo, const Environment& env,
                                               RandomStream& rng) {
    DefaultOracle oracle;
    return process_demonstration(demo, env, rng, oracle);
}

DecisionRecord Registry::process_demonstration(const Demonstration& demo, const Environment& env,
                                               RandomStream& rng, ArbitrationOracle& oracle) {
    check(env.spec().id == env_spec_.id, "process_demonstration: environment mismatch");
    demo.trajectory.validate();
    check(demo.trajectory.states[0].size() == env_spec_.state_dim,
          "process_demonstration: demo/env state dimension mismatch");
    check(weights_.find(demo.arrival_index) == weights_.end(),
          "process_demonstration: arrival index already ingested");

    // Operate on a copy; swap in only on success.
    Registry next = *this;
    DecisionRecord decision;
    decision.arrival_index = demo.arrival_index;
    decision.epsilon = epsilon_;

    if (strategies_.empty()) {
        auto [record, kl_new] = oracle.train_candidate(*this, demo, env, rng);
        decision.branch = "first-strategy";
        decision.kl_new = kl_new;
        decision.weights = {1.0};
        record.pure_demo_index = demo.arrival_index;
        next.strategies_.push_back(std::move(record));
    } else {
        WeightSearchResult search = oracle.search_mixture(*this, demo, env, rng);
        decision.kl_mix = search.kl;
        if (search.kl < epsilon_) {
            decision.branch = "mixture-threshold";
            decision.weights = search.weights.w;
        } else {
            auto [record, kl_new] = oracle.train_candidate(*this, demo, env, rng);
            decision.kl_new = kl_new;
            if (search.kl < kl_new) {
                // candidate loses; discard it and adopt the mixture
                decision.branch = "mixture-vs-new";
                decision.weights = search.weights.w;
            } else {
                decision.branch = "new-strategy";
                decision.weights.assign(strategies_.size() + 1, 0.0);
                decision.weights.back() = 1.0;
                record.pure_demo_index = demo.arrival_index;
                next.strategies_.push_back(std::move(record));
            }
        }
    }

    next.weights_[demo.arrival_index] = decision.weights;
    next.decisions_.push_back(decision);
    next.count_history_.push_back(next.strategies_.size());
    next.demos_.push_back(demo);

    if (next.strategies_.size() >= 2 && cfg_.joint_epochs > 0) {
        RandomStream joint_rng = rng.spawn(0x701 + demo.arrival_index);
        joint_update(next, env, joint_rng, cfg_.joint_epochs);
    }

    *this = std::move(next);
    return decision;
}

void joint_update(Registry& registry, const Environment& env, RandomStream& rng,
                  std::size_t epochs) {
    std::size_t m = registry.strategies_.size();
    check(m >= 2, "joint_update: requires at least two strategies");
    if (epochs == 0) return;

    Registry next = registry;  // restored implicitly on throw
    const LifelongConfig& cfg = next.cfg_;
    double gamma = next.env_spec_.gamma;

    Adam task_opt(cfg.reward_lr);
    std::vector<Adam> strat_opts(m, Adam(cfg.reward_lr));
    std::vector<Adam> value_opts(m, Adam(cfg.reward_lr));
    std::vector<PPOTrainer> trainers;
    trainers.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        RandomStream init = rng.spawn(0x9000 + j);
        trainers.emplace_back(next.strategies_[j].policy, cfg.joint_ppo, init);
    }

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        RewardDecomposition decomp = next.decomposition_view();
        std::vector<RewardNet> value_heads;
        for (const StrategyRecord& s : next.strategies_) value_heads.push_back(s.value_head);

        std::vector<std::vector<Trajectory>> rollouts(m);
        std::vector<std::vector<Transition>> demo_trs(m), gen_trs(m);
        std::vector<StrategyBatch> batches(m);
        for (std::size_t j = 0; j < m; ++j) {
            RandomStream collect_rng = rng.spawn(epoch * 100 + j);
            rollouts[j] = trainers[j].collect(env, collect_rng);
            demo_trs[j] =
                transitions_of(find_demo(next.demos_, next.strategies_[j].pure_demo_index).trajectory);
            for (const Trajectory& t : rollouts[j]) {
                auto trs = transitions_of(t);
                gen_trs[j].insert(gen_trs[j].end(), trs.begin(), trs.end());
            }
            batches[j] = StrategyBatch{demo_trs[j], gen_trs[j], &trainers[j].policy()};
        }

        ParamSet task_grads = next.task_opt_->params().zeros_like();
        std::vector<ParamSet> strat_grads, value_grads;
        for (std::size_t j = 0; j < m; ++j) {
            strat_grads.push_back(next.strategies_[j].strategy_reward.params().zeros_like());
            value_grads.push_back(next.strategies_[j].value_head.params().zeros_like());
        }
        double msrd = msrd_loss_grad(decomp, value_heads, batches, task_grads, strat_grads,
                                     value_grads);
        if (!std::isfinite(msrd)) throw TrainingError("joint_update: non-finite shared-task loss");

        // between-class discrimination over every stored demonstration,
        // with the pure-demo side held fixed within the epoch: letting
        // gradients flow into the anchors drags every strategy's own
        // baseline toward whatever its crushed mixture terms settle at
        std::vector<const Trajectory*> pure_demos;
        for (const StrategyRecord& s : next.strategies_)
            pure_demos.push_back(&find_demo(next.demos_, s.pure_demo_index).trajectory);
        Vec anchor(m);
        for (std::size_t j = 0; j < m; ++j)
            anchor[j] = std::exp(normalized_return(decomp.strategies[j], *pure_demos[j], gamma));
        std::vector<ParamSet> bcd_grads;
        for (std::size_t j = 0; j < m; ++j)
            bcd_grads.push_back(next.strategies_[j].strategy_reward.params().zeros_like());
        double bcd_total = 0.0;
        for (const Demonstration& d : next.demos_) {
            Vec w = next.weights_.at(d.arrival_index);
            w.resize(m, 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                const RewardNet& strat = decomp.strategies[j];
                double ei = std::exp(normalized_return(strat, d.trajectory, gamma));
                double diff = ei - w[j] * anchor[j];
                bcd_total += diff * diff;
                double z = 0.0, gw = 1.0;
                for (std::size_t t = 0; t < d.trajectory.steps(); ++t) {
                    z += gw;
                    gw *= gamma;
                }
                gw = 1.0;
                for (const Vec& s : d.trajectory.states) {
                    strat.accumulate_grad(s, 2.0 * diff * ei * gw / z, bcd_grads[j]);
                    gw *= gamma;
                }
            }
        }
        if (!std::isfinite(bcd_total))
            throw TrainingError("joint_update: non-finite between-class loss");
        double bcd_scale = cfg.bcd_weight / double(next.demos_.size());
        for (std::size_t j = 0; j < m; ++j) strat_grads[j].add_scaled(bcd_grads[j], bcd_scale);

        task_opt.step(next.task_opt_->mutable_params(), task_grads);
        for (std::size_t j = 0; j < m; ++j) {
            strat_opts[j].step(next.strategies_[j].strategy_reward.mutable_params(), strat_grads[j]);
            value_opts[j].step(next.strategies_[j].value_head.mutable_params(), value_grads[j]);
        }

        RewardDecomposition updated = next.decomposition_view();
        for (std::size_t j = 0; j < m; ++j)
            trainers[j].update(combined_reward(updated, j), rollouts[j]);
    }

    // The PPO trainers only serve as adversarial generators for the
    // reward updates; the registry keeps the policies that were accepted
    // against the demonstrations.
    registry = std::move(next);
}

namespace {

nlohmann::json decision_to_json(const DecisionRecord& d) {
    nlohmann::json j;
    j["arrival_index"] = d.arrival_index;
    j["branch"] = d.branch;
    j["epsilon"] = d.epsilon;
    j["weights"] = d.weights;
    if (std::isfinite(d.kl_mix)) j["kl_mix"] = d.kl_mix;
    if (std::isfinite(d.kl_new)) j["kl_new"] = d.kl_new;
    return j;
}

DecisionRecord decision_from_json(const nlohmann::json& j) {
    DecisionRecord d;
    d.arrival_index = j.at("arrival_index").get<std::size_t>();
    d.branch = j.at("branch").get<std::string>();
    d.epsilon = j.at("epsilon").get<double>();
    d.weights = j.at("weights").get<Vec>();
    if (j.contains("kl_mix")) d.kl_mix = j.at("kl_mix").get<double>();
    if (j.contains("kl_new")) d.kl_new = j.at("kl_new").get<double>();
    return d;
}

}  // namespace

void save_registry(const Registry& registry, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path tmp = fs::path(dir + ".tmp");
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    save_reward(*registry.task_opt_, (tmp / "task").string());
    for (std::size_t j = 0; j < registry.strategies_.size(); ++j) {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "strategy_%02zu", j);
        const StrategyRecord& s = registry.strategies_[j];
        save_reward(s.strategy_reward, (tmp / (std::string(prefix) + "_reward")).string());
        save_reward(s.value_head, (tmp / (std::string(prefix) + "_value")).string());
        save_policy(s.policy, (tmp / (std::string(prefix) + "_policy")).string());
    }

    nlohmann::json manifest;
    manifest["format"] = "dmsrd-registry-v1";
    manifest["env_id"] = registry.env_spec_.id;
    manifest["horizon"] = registry.env_spec_.horizon;
    manifest["alpha"] = registry.cfg_.alpha;
    manifest["epsilon"] = registry.epsilon_;
    manifest["strategy_count"] = registry.strategies_.size();
    manifest["strategy_count_history"] = registry.count_history_;
    nlohmann::json strategies = nlohmann::json::array();
    for (const StrategyRecord& s : registry.strategies_)
        strategies.push_back({{"pure_demo_index", s.pure_demo_index}});
    manifest["strategies"] = std::move(strategies);
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& [index, w] : registry.weights_)
        weights.push_back({{"arrival_index", index}, {"weights", w}});
    manifest["mixture_weights"] = std::move(weights);
    nlohmann::json decisions = nlohmann::json::array();
    for (const DecisionRecord& d : registry.decisions_) decisions.push_back(decision_to_json(d));
    manifest["decisions"] = std::move(decisions);

    std::ofstream f(tmp / "manifest.json");
    if (!f) throw IntegrityError("cannot write registry manifest in " + dir);
    f << manifest.dump(2) << '\n';
    f.close();

    fs::remove_all(dir);
    fs::rename(tmp, dir);
}

Registry load_registry(const std::string& dir, const Environment& env,
                       const std::vector<Demonstration>& demos, const LifelongConfig& cfg) {
    namespace fs = std::filesystem;
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IntegrityError("cannot open registry manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(f, nullptr, /*allow_exceptions=*/true);
    if (manifest.value("format", "") != "dmsrd-registry-v1")
        throw IntegrityError("bad registry manifest format in " + dir);
    if (manifest.at("env_id").get<std::string>() != env.spec().id)
        throw IntegrityError("registry/environment mismatch in " + dir);

    Registry r;
    r.env_spec_ = env.spec();
    r.cfg_ = cfg;
    r.epsilon_ = manifest.at("epsilon").get<double>();
    r.task_opt_ = load_reward((fs::path(dir) / "task").string());
    std::size_t m = manifest.at("strategy_count").get<std::size_t>();
    for (std::size_t j = 0; j < m; ++j) {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "strategy_%02zu", j);
        StrategyRecord s{
            load_reward((fs::path(dir) / (std::string(prefix) + "_reward")).string()),
            load_reward((fs::path(dir) / (std::string(prefix) + "_value")).string()),
            load_policy((fs::path(dir) / (std::string(prefix) + "_policy")).string()),
            manifest.at("strategies")[j].at("pure_demo_index").get<std::size_t>()};
        r.strategies_.push_back(std::move(s));
    }
    r.count_history_ = manifest.at("strategy_count_history").get<std::vector<std::size_t>>();
    for (const auto& e : manifest.at("mixture_weights"))
        r.weights_[e.at("arrival_index").get<std::size_t>()] = e.at("weights").get<Vec>();
    for (const auto& e : manifest.at("decisions")) r.decisions_.push_back(decision_from_json(e));

    for (const auto& [index, w] : r.weights_) r.demos_.push_back(find_demo(demos, index));
    return r;
}

}  // namespace dmsrd
