#pragma once

#include <string>
#include <vector>

#include "dmsrd/lifelong.hpp"

namespace dmsrd {

// Flat key = value experiment description. '#' starts a comment,
// unknown or duplicate keys are hard errors, and serialize() emits a
// canonical form whose FNV-1a hash stamps every artifact.
struct ExperimentConfig {
    std::string env = "pendulum-lite";
    std::size_t horizon = 0;  // 0 = environment default
    std::uint64_t seed = 1;

    double alpha = 0.01;
    double epsilon = 0.0;  // 0 = auto-calibrate
    double epsilon_scale = 2.0;
    std::size_t joint_epochs = 10;
    double reward_lr = 1e-3;
    double bcd_weight = 1.0;

    std::size_t airl_iterations = 120;
    std::size_t airl_disc_steps = 2;
    double airl_disc_lr = 2e-3;
    std::vector<std::size_t> reward_hidden = {32, 32};
    std::vector<std::size_t> policy_hidden = {32, 32};

    std::size_t ppo_rollouts = 8;
    std::size_t ppo_epochs = 4;
    double ppo_clip = 0.2;
    double ppo_gae_lambda = 0.95;
    double ppo_policy_lr = 3e-3;
    double ppo_value_lr = 1e-2;
    std::size_t joint_ppo_rollouts = 4;
    std::size_t joint_ppo_epochs = 2;

    std::size_t search_budget = 64;
    std::size_t search_rollouts = 5;
    std::size_t knn_k = 4;
    double mixture_sigma = 0.0;  // 0 = geometric-mean default

    std::vector<std::string> demo_strategies;
    std::size_t demos_per_strategy = 1;
    std::size_t mixture_demos = 0;           // random-weight executed mixtures
    std::vector<Vec> mixture_specs;          // explicit-weight executed mixtures
    std::string arrival_order = "sequential";  // or "shuffled"

    std::size_t eval_rollouts = 5;
    std::size_t test_policies = 3;
    std::size_t test_snapshots = 4;
    std::size_t test_per_snapshot = 10;

    // acceptance thresholds checked by cmd_eval
    std::size_t min_strategies = 1;
    std::size_t max_strategies = 100;
    double min_identified = 0.0;
    double min_correlation = -1.0;
    double kl_factor = 0.0;    // 0 disables the oracle-KL comparison
    double kl_fraction = 0.0;
    double min_mixture_fraction = 0.0;

    void validate() const;
    std::string serialize() const;
    std::string hash() const;  // 16 hex digits over serialize()

    LifelongConfig lifelong() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Shipped presets: benchmark-pendulum, benchmark-lander, lifelong-desk.
bool is_preset(const std::string& name);
std::string preset_text(const std::string& name);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace dmsrd
