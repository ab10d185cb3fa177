#pragma once

#include <string>
#include <vector>

#include "dmsrd/lifelong.hpp"

namespace dmsrd {

struct PolicyMetricsRow {
    std::size_t arrival_index = 0;
    std::string branch;
    double env_return = 0.0;
    double log_likelihood = 0.0;
    double kl = 0.0;
};

// Per-demo metrics of the assigned policy: mean environment return over
// rollouts, log-likelihood of the demonstrated actions, trajectory KL.
std::vector<PolicyMetricsRow> policy_metrics(const Registry& registry,
                                             const std::vector<Demonstration>& demos,
                                             const Environment& env, std::size_t n_eval_rollouts,
                                             RandomStream& rng);

double pearson_correlation(const Vec& x, const Vec& y);

// Pearson r between the learned task reward's discounted return and the
// undiscounted ground-truth environment return, per trajectory.
double task_reward_correlation(const RewardNet& task, const std::vector<Trajectory>& test_set,
                               double gamma);

struct FisherZResult {
    double z = 0.0;
    double p = 1.0;  // two-tailed
};

// z = (atanh r1 - atanh r2) / sqrt(1/(n1-3) + 1/(n2-3))
FisherZResult fisher_z_test(double r1, std::size_t n1, double r2, std::size_t n2);

// Affine rescale of each column to [0,1]; constant columns become zeros
// and their indices are appended to constant_cols when given.
std::vector<Vec> normalize_heatmap_columns(std::vector<Vec> matrix,
                                           std::vector<std::size_t>* constant_cols = nullptr);

// Entry (j, k) = normalized strategy-j return on strategy k's pure
// demonstration, columns rescaled to [0,1].
std::vector<Vec> strategy_heatmap(const Registry& registry,
                                  const std::vector<const Trajectory*>& pure_demos,
                                  std::vector<std::size_t>* constant_cols = nullptr);

// Fraction of columns whose maximum is the diagonal entry; ties fail.
double strategies_identified(const std::vector<Vec>& heatmap);

// Scripted strategies at staged competence (progressively noisier
// controllers), ground truth carried in each trajectory's env rewards.
std::vector<Trajectory> build_test_set(const Environment& env, RandomStream& rng,
                                       std::size_t n_policies, std::size_t snapshots,
                                       std::size_t per_snapshot);

struct EvalReport {
    std::vector<PolicyMetricsRow> rows;
    double pearson_r = std::numeric_limits<double>::quiet_NaN();
    // scatter points behind pearson_r: (estimated task return, ground truth)
    std::vector<std::pair<double, double>> scatter;
    std::vector<Vec> heatmap;
    double identified = 0.0;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    std::string config_hash;
};

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_summary(const EvalReport& report, const std::string& path);
void write_report_svg(const EvalReport& report, const std::string& path);

}  // namespace dmsrd
