#include "dmsrd/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace dmsrd {

void MixtureWeights::validate() const {
    check(!w.empty(), "MixtureWeights: empty");
    double sum = 0.0;
    for (double x : w) {
        check(x >= 0.0, "MixtureWeights: negative weight");
        sum += x;
    }
    check(std::fabs(sum - 1.0) <= 1e-9, "MixtureWeights: weights must sum to 1");
    check(sigma > 0.0, "MixtureWeights: sigma must be positive");
}

Vec mixture_mean(const MixtureWeights& weights, const std::vector<const GaussianPolicy*>& policies,
                 const Vec& state) {
    check(weights.w.size() == policies.size(), "mixture_mean: weight/policy length mismatch");
    check(!policies.empty(), "mixture_mean: no policies");
    Vec acc(policies[0]->env_spec().action_dim, 0.0);
    for (std::size_t j = 0; j < policies.size(); ++j) {
        if (weights.w[j] == 0.0) continue;
        auto [mean, std] = policies[j]->action_distribution(state);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += weights.w[j] * mean[d];
    }
    return acc;
}

double default_mixture_sigma(const std::vector<const GaussianPolicy*>& policies) {
    check(!policies.empty(), "default_mixture_sigma: no policies");
    double log_acc = 0.0;
    std::size_t n = 0;
    for (const GaussianPolicy* p : policies) {
        const Tensor& ls = p->params().get("log_std");
        for (double v : ls.data) {
            log_acc += v;
            ++n;
        }
    }
    return std::exp(log_acc / double(n));
}

MixturePolicy::MixturePolicy(MixtureWeights weights, const std::vector<const GaussianPolicy*>& policies)
    : weights_(std::move(weights)) {
    weights_.validate();
    check(weights_.w.size() == policies.size(), "MixturePolicy: weight/policy length mismatch");
    check(!policies.empty(), "MixturePolicy: no policies");
    policies_.reserve(policies.size());
    for (const GaussianPolicy* p : policies) policies_.push_back(*p);
}

std::pair<Vec, Vec> MixturePolicy::action_distribution(const Vec& state) const {
    std::vector<const GaussianPolicy*> ptrs;
    ptrs.reserve(policies_.size());
    for (const GaussianPolicy& p : policies_) ptrs.push_back(&p);
    Vec mean = mixture_mean(weights_, ptrs, state);
    Vec std(mean.size(), weights_.sigma);
    return {mean, std};
}

Vec MixturePolicy::act(const Vec& state, RandomStream& rng) const {
    auto [mean, std] = action_distribution(state);
    Vec a(mean.size());
    // raw sample, matching log_prob exactly; the env saturates on apply
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = mean[i] + std[i] * rng.normal();
    return a;
}

Vec MixturePolicy::mean_action(const Vec& state) const {
    return clamp_action(policies_[0].env_spec(), action_distribution(state).first);
}

double MixturePolicy::log_prob(const Vec& state, const Vec& action) const {
    Vec mean = action_distribution(state).first;
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
        acc += gaussian_log_density(action[i], mean[i], weights_.sigma);
    return acc;
}

double MixturePolicy::log_likelihood(const Trajectory& traj) const {
    traj.validate();
    double acc = 0.0;
    for (std::size_t t = 0; t < traj.steps(); ++t) acc += log_prob(traj.states[t], traj.actions[t]);
    return acc;
}

namespace {

double sq_dist(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// distance from point x to its k-th nearest neighbor among `points`,
// skipping index `skip` (or none when skip == npos).
double kth_nn_dist(const Vec& x, const std::vector<Vec>& points, std::size_t k, std::size_t skip) {
    std::vector<double> dists;
    dists.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == skip) continue;
        dists.push_back(sq_dist(x, points[i]));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    return std::sqrt(dists[k - 1]);
}

double knn_kl_once(const std::vector<Vec>& p, const std::vector<Vec>& q, std::size_t k,
                   bool* zero_dist) {
    std::size_t n = p.size(), m = q.size(), d = p[0].size();
    double acc = 0.0;
    *zero_dist = false;
    for (std::size_t i = 0; i < n; ++i) {
        double rho = kth_nn_dist(p[i], p, k, i);
        double nu = kth_nn_dist(p[i], q, k, static_cast<std::size_t>(-1));
        if (rho <= 0.0 || nu <= 0.0) {
            *zero_dist = true;
            return 0.0;
        }
        acc += std::log(nu / rho);
    }
    return double(d) / double(n) * acc + std::log(double(m) / double(n - 1));
}

}  // namespace

double knn_kl_estimate(const std::vector<Vec>& sample_p, const std::vector<Vec>& sample_q,
                       std::size_t k) {
    check(k >= 1, "knn_kl_estimate: k must be >= 1");
    check(sample_p.size() > k, "knn_kl_estimate: |p| must exceed k");
    check(sample_q.size() >= k, "knn_kl_estimate: |q| must be >= k");
    std::size_t d = sample_p[0].size();
    for (const Vec& v : sample_p) check(v.size() == d, "knn_kl_estimate: ragged p sample");
    for (const Vec& v : sample_q) check(v.size() == d, "knn_kl_estimate: ragged q sample");

    bool zero_dist = false;
    double est = knn_kl_once(sample_p, sample_q, k, &zero_dist);
    if (!zero_dist) return est;

    // duplicate points (deterministic controllers revisit states): add
    // a tiny fixed jitter and recompute
    RandomStream jitter_rng(0x4A17);
    std::vector<Vec> pj = sample_p, qj = sample_q;
    for (Vec& v : pj)
        for (double& x : v) x += jitter_rng.uniform(-1e-10, 1e-10);
    for (Vec& v : qj)
        for (double& x : v) x += jitter_rng.uniform(-1e-10, 1e-10);
    est = knn_kl_once(pj, qj, k, &zero_dist);
    if (zero_dist) throw NumericalError("knn_kl_estimate: degenerate samples after jitter");
    return est;
}

namespace {

std::vector<Vec> normalized_states(const EnvSpec& spec, const Trajectory& traj) {
    std::vector<Vec> out;
    out.reserve(traj.steps());
    for (const Vec& s : traj.states) out.push_back(normalize_state(spec, s));
    return out;
}

}  // namespace

double trajectory_kl(const Trajectory& demo, const PolicyBase& policy, const Environment& env,
                     std::size_t n_rollouts, RandomStream& rng, std::size_t k) {
    check(n_rollouts >= 1, "trajectory_kl: n_rollouts must be >= 1");
    std::vector<Vec> demo_states = normalized_states(env.spec(), demo);
    double acc = 0.0;
    for (std::size_t r = 0; r < n_rollouts; ++r) {
        RandomStream stream = rng.spawn(r);
        Trajectory traj = rollout(env, policy, env.spec().horizon, stream);
        acc += knn_kl_estimate(demo_states, normalized_states(env.spec(), traj), k);
    }
    return acc / double(n_rollouts);
}

Vec sample_simplex(std::size_t dim, RandomStream& rng) {
    check(dim >= 1, "sample_simplex: dim must be >= 1");
    if (dim == 1) return {1.0};
    // normalized Exp(1) draws = flat Dirichlet
    Vec w(dim);
    double sum = 0.0;
    for (double& x : w) {
        double u = rng.uniform();
        if (u < 1e-300) u = 1e-300;
        x = -std::log(u);
        sum += x;
    }
    for (double& x : w) x /= sum;
    // exact simplex invariant despite rounding
    double s2 = 0.0;
    for (std::size_t i = 0; i + 1 < dim; ++i) s2 += w[i];
    w[dim - 1] = 1.0 - s2;
    if (w[dim - 1] < 0.0) w[dim - 1] = 0.0;
    return w;
}

WeightSearchResult optimize_mixture_weights(const Trajectory& demo,
                                            const std::vector<const GaussianPolicy*>& policies,
                                            const Environment& env, RandomStream& rng,
                                            const WeightSearchConfig& cfg) {
    std::size_t m = policies.size();
    check(m >= 1, "optimize_mixture_weights: no policies registered");
    double sigma = cfg.sigma > 0.0 ? cfg.sigma : default_mixture_sigma(policies);

    std::vector<Vec> candidates;
    for (std::size_t j = 0; j < m; ++j) {
        Vec one_hot(m, 0.0);
        one_hot[j] = 1.0;
        candidates.push_back(std::move(one_hot));
    }
    if (m > 1) candidates.emplace_back(m, 1.0 / double(m));
    RandomStream dirichlet_rng = rng.spawn(0xD121);
    while (candidates.size() < std::max(cfg.budget, candidates.size()))
        candidates.push_back(sample_simplex(m, dirichlet_rng));

    WeightSearchResult best;
    best.kl = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        MixtureWeights w{candidates[c], sigma};
        MixturePolicy mix(w, policies);
        RandomStream stream = rng.spawn(100 + c);
        double kl = trajectory_kl(demo, mix, env, cfg.n_rollouts, stream, cfg.k);
        best.trace.emplace_back(candidates[c], kl);
        if (kl < best.kl) {  // strict: lowest candidate index wins ties
            best.kl = kl;
            best.weights = w;
        }
    }

    Vec sparse = best.weights.w;
    bool changed = false;
    double kept = 0.0;
    for (double& x : sparse) {
        if (x > 0.0 && x < cfg.sparse_threshold) {
            x = 0.0;
            changed = true;
        } else {
            kept += x;
        }
    }
    if (changed && kept > 0.0) {
        std::size_t last = 0;
        for (std::size_t j = 0; j < m; ++j) {
            sparse[j] /= kept;
            if (sparse[j] > 0.0) last = j;
        }
        double others = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != last) others += sparse[j];
        sparse[last] = 1.0 - others;  // exact simplex despite rounding
        MixtureWeights w{sparse, sigma};
        MixturePolicy mix(w, policies);
        RandomStream stream = rng.spawn(99);
        double kl = trajectory_kl(demo, mix, env, cfg.n_rollouts, stream, cfg.k);
        best.trace.emplace_back(sparse, kl);
        if (kl <= best.kl + cfg.sparse_margin) {
            best.kl = kl;
            best.weights = w;
        }
    }
    return best;
}

void save_search_trace_csv(const WeightSearchResult& result, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IntegrityError("cannot write search trace: " + path);
    f << std::setprecision(17);
    f << "candidate,kl,weights\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        f << i << ',' << result.trace[i].second << ',';
        const Vec& w = result.trace[i].first;
        for (std::size_t j = 0; j < w.size(); ++j) f << (j ? " " : "") << w[j];
        f << '\n';
    }
}

}  // namespace dmsrd
