#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmsrd/mixture.hpp"
#include "dmsrd/rewardlearn.hpp"

namespace dmsrd {

struct StrategyRecord {
    RewardNet strategy_reward;  // bounded head
    RewardNet value_head;       // AIRL shaping head h_j
    GaussianPolicy policy;
    std::size_t pure_demo_index = 0;  // arrival index m_j
};

struct DecisionRecord {
    std::size_t arrival_index = 0;
    std::string branch;  // first-strategy | mixture-threshold | mixture-vs-new | new-strategy
    double kl_mix = std::numeric_limits<double>::quiet_NaN();
    double kl_new = std::numeric_limits<double>::quiet_NaN();
    double epsilon = 0.0;
    Vec weights;  // as assigned (length = M at assignment time)
};

struct LifelongConfig {
    double alpha = 0.01;
    double epsilon = 0.0;        // 0 = auto-calibrate at registry creation
    double epsilon_scale = 2.0;  // times the same-distribution noise floor
    std::size_t joint_epochs = 10;
    double reward_lr = 1e-3;
    double bcd_weight = 1.0;
    AIRLConfig airl;
    WeightSearchConfig search;
    PPOConfig joint_ppo;
};

class Registry;

// Seam between Algorithm-1 control flow and the expensive learning
// steps; tests stub it to drive the branch logic with canned KL values.
struct ArbitrationOracle {
    virtual ~ArbitrationOracle() = default;
    virtual WeightSearchResult search_mixture(const Registry& registry, const Demonstration& demo,
                                              const Environment& env, RandomStream& rng) = 0;
    // Trains a candidate strategy on the single demo and evaluates its
    // trajectory KL against it.
    virtual std::pair<StrategyRecord, double> train_candidate(const Registry& registry,
                                                              const Demonstration& demo,
                                                              const Environment& env,
                                                              RandomStream& rng) = 0;
};

class Registry {
  public:
    static Registry create(const Environment& env, const LifelongConfig& cfg, RandomStream& rng);

    std::size_t strategy_count() const { return strategies_.size(); }
    const std::vector<StrategyRecord>& strategies() const { return strategies_; }
    const RewardNet& task_reward() const { return *task_opt_; }
    double epsilon() const { return epsilon_; }
    double alpha() const { return decomposition_view().alpha; }
    const LifelongConfig& config() const { return cfg_; }
    const std::vector<DecisionRecord>& decision_log() const { return decisions_; }
    const std::vector<std::size_t>& strategy_count_history() const { return count_history_; }
    const std::vector<Demonstration>& demonstrations() const { return demos_; }

    // Current reward decomposition (copies the nets).
    RewardDecomposition decomposition_view() const;

    // Stored weight vector zero-padded to the current strategy count,
    // plus the branch decision taken at ingestion.
    std::pair<Vec, DecisionRecord> explain(std::size_t arrival_index) const;

    // Assigned policy for an ingested demo: the pure policy for one-hot
    // weights, otherwise the Eq.-2 mixture over current strategies.
    std::unique_ptr<PolicyBase> assigned_policy(std::size_t arrival_index) const;

    // Algorithm-1 ingestion. Atomic: on failure the registry is
    // unchanged. Returns the branch decision.
    DecisionRecord process_demonstration(const Demonstration& demo, const Environment& env,
                                         RandomStream& rng);
    DecisionRecord process_demonstration(const Demonstration& demo, const Environment& env,
                                         RandomStream& rng, ArbitrationOracle& oracle);

    friend void joint_update(Registry& registry, const Environment& env, RandomStream& rng,
                             std::size_t epochs);

    friend void save_registry(const Registry& registry, const std::string& dir);
    friend Registry load_registry(const std::string& dir, const Environment& env,
                                  const std::vector<Demonstration>& demos,
                                  const LifelongConfig& cfg);

  private:
    Registry() = default;

    EnvSpec env_spec_;
    LifelongConfig cfg_;
    std::optional<RewardNet> task_opt_;  // set at create/load
    std::vector<StrategyRecord> strategies_;
    std::map<std::size_t, Vec> weights_;  // arrival index -> weights at assignment
    std::vector<DecisionRecord> decisions_;
    std::vector<std::size_t> count_history_;
    std::vector<Demonstration> demos_;  // ingested, in arrival order
    double epsilon_ = 0.0;
};

// Shared-task + between-class + per-policy improvement rounds.
// Requires at least two strategies; epochs == 0 leaves the registry
// unchanged. Atomic on training failure.
void joint_update(Registry& registry, const Environment& env, RandomStream& rng,
                  std::size_t epochs);

// Same-distribution KL noise floor for the environment, measured from a
// scripted policy against its own demonstration.
double calibrate_noise_floor(const Environment& env, RandomStream& rng, std::size_t n_rollouts = 5);

void save_registry(const Registry& registry, const std::string& dir);
Registry load_registry(const std::string& dir, const Environment& env,
                       const std::vector<Demonstration>& demos, const LifelongConfig& cfg);

}  // namespace dmsrd
