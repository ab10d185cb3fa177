#pragma once

#include <vector>

#include "dmsrd/policy.hpp"

namespace dmsrd {

struct MixtureWeights {
    Vec w;            // nonnegative, sums to 1 (tolerance 1e-9)
    double sigma = 0.05;  // mixture action stddev

    void validate() const;
};

// Weighted sum of component policy mean outputs.
Vec mixture_mean(const MixtureWeights& weights, const std::vector<const GaussianPolicy*>& policies,
                 const Vec& state);

// Gaussian policy N(mu_w(s), sigma^2) over the convex combination of
// component means. Usable anywhere a base policy is.
class MixturePolicy final : public PolicyBase {
  public:
    // Owns copies of the components, so it stays valid independently.
    MixturePolicy(MixtureWeights weights, const std::vector<const GaussianPolicy*>& policies);

    const MixtureWeights& weights() const { return weights_; }

    std::pair<Vec, Vec> action_distribution(const Vec& state) const;
    Vec act(const Vec& state, RandomStream& rng) const override;
    Vec mean_action(const Vec& state) const override;
    double log_prob(const Vec& state, const Vec& action) const override;
    double log_likelihood(const Trajectory& traj) const;

  private:
    MixtureWeights weights_;
    std::vector<GaussianPolicy> policies_;
};

// Geometric mean of the component policies' stddevs (averaged across
// action dimensions), the default mixture sigma.
double default_mixture_sigma(const std::vector<const GaussianPolicy*>& policies);

// k-NN (Kozachenko-Leonenko style) KL estimate between two samples:
// (d/n) * sum_i log(nu_k(i) / rho_k(i)) + log(m / (n-1)). May be
// negative; callers compare magnitudes. Duplicate points collapse NN
// distances to zero; a 1e-10 uniform jitter is applied and the estimate
// recomputed.
double knn_kl_estimate(const std::vector<Vec>& sample_p, const std::vector<Vec>& sample_q,
                       std::size_t k = 4);

struct TrajectoryKLConfig {
    std::size_t n_rollouts = 5;
    std::size_t k = 4;
};

// Mean over rollouts of the k-NN KL between the demo's normalized state
// cloud and each rollout's.
double trajectory_kl(const Trajectory& demo, const PolicyBase& policy, const Environment& env,
                     std::size_t n_rollouts, RandomStream& rng, std::size_t k = 4);

// Flat-Dirichlet sample on the simplex.
Vec sample_simplex(std::size_t dim, RandomStream& rng);

struct WeightSearchResult {
    MixtureWeights weights;
    double kl = 0.0;
    // full search trace (candidate weights, KL), exportable as CSV
    std::vector<std::pair<Vec, double>> trace;
};

struct WeightSearchConfig {
    std::size_t budget = 64;  // total candidates incl. one-hots and uniform
    std::size_t n_rollouts = 5;
    std::size_t k = 4;
    double sigma = 0.0;  // 0 = geometric-mean default
    // A dense candidate often beats the true sparse explanation by
    // estimator luck alone; small weights are zeroed and the result
    // kept when its KL lands within the margin of the dense winner.
    double sparse_threshold = 0.25;
    double sparse_margin = 0.5;
};

// Evaluates every one-hot vector, the uniform vector and Dirichlet
// samples up to the budget, then tries a sparsified version of the
// winner; returns the argmin (lowest candidate index wins ties).
WeightSearchResult optimize_mixture_weights(const Trajectory& demo,
                                            const std::vector<const GaussianPolicy*>& policies,
                                            const Environment& env, RandomStream& rng,
                                            const WeightSearchConfig& cfg = {});

void save_search_trace_csv(const WeightSearchResult& result, const std::string& path);

}  // namespace dmsrd
