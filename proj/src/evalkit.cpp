#include "dmsrd/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dmsrd/demogen.hpp"

namespace dmsrd {

std::vector<PolicyMetricsRow> policy_metrics(const Registry& registry,
                                             const std::vector<Demonstration>& demos,
                                             const Environment& env, std::size_t n_eval_rollouts,
                                             RandomStream& rng) {
    check(n_eval_rollouts >= 1, "policy_metrics: n_eval_rollouts must be >= 1");
    std::vector<PolicyMetricsRow> rows;
    rows.reserve(demos.size());
    for (const Demonstration& d : demos) {
        auto [weights, decision] = registry.explain(d.arrival_index);
        std::unique_ptr<PolicyBase> policy = registry.assigned_policy(d.arrival_index);
        PolicyMetricsRow row;
        row.arrival_index = d.arrival_index;
        row.branch = decision.branch;
        RandomStream ret_rng = rng.spawn(2 * d.arrival_index);
        double acc = 0.0;
        for (std::size_t r = 0; r < n_eval_rollouts; ++r) {
            RandomStream stream = ret_rng.spawn(r);
            acc += env_return(rollout(env, *policy, env.spec().horizon, stream));
        }
        row.env_return = acc / double(n_eval_rollouts);
        row.log_likelihood = policy_log_likelihood(*policy, d.trajectory);
        RandomStream kl_rng = rng.spawn(2 * d.arrival_index + 1);
        row.kl = trajectory_kl(d.trajectory, *policy, env, n_eval_rollouts, kl_rng);
        rows.push_back(std::move(row));
    }
    return rows;
}

double pearson_correlation(const Vec& x, const Vec& y) {
    check(x.size() == y.size(), "pearson_correlation: length mismatch");
    check(x.size() >= 3, "pearson_correlation: need at least 3 points");
    std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw NumericalError("pearson_correlation: zero variance, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

double task_reward_correlation(const RewardNet& task, const std::vector<Trajectory>& test_set,
                               double gamma) {
    check(test_set.size() >= 3, "task_reward_correlation: need at least 3 trajectories");
    Vec est, truth;
    StateRewardFn fn = task.fn();
    for (const Trajectory& t : test_set) {
        est.push_back(discounted_return(t, fn, gamma));
        truth.push_back(env_return(t));
    }
    return pearson_correlation(est, truth);
}

FisherZResult fisher_z_test(double r1, std::size_t n1, double r2, std::size_t n2) {
    check(std::fabs(r1) < 1.0 && std::fabs(r2) < 1.0, "fisher_z_test: |r| must be < 1");
    check(n1 > 3 && n2 > 3, "fisher_z_test: sample sizes must exceed 3");
    double z = (std::atanh(r1) - std::atanh(r2)) /
               std::sqrt(1.0 / double(n1 - 3) + 1.0 / double(n2 - 3));
    FisherZResult out;
    out.z = z;
    out.p = std::erfc(std::fabs(z) / std::sqrt(2.0));
    return out;
}

std::vector<Vec> normalize_heatmap_columns(std::vector<Vec> matrix,
                                           std::vector<std::size_t>* constant_cols) {
    if (matrix.empty()) return matrix;
    std::size_t cols = matrix[0].size();
    for (const Vec& row : matrix) check(row.size() == cols, "heatmap: ragged matrix");
    for (std::size_t k = 0; k < cols; ++k) {
        double lo = matrix[0][k], hi = matrix[0][k];
        for (const Vec& row : matrix) {
            lo = std::min(lo, row[k]);
            hi = std::max(hi, row[k]);
        }
        if (hi - lo <= 0.0) {
            for (Vec& row : matrix) row[k] = 0.0;
            if (constant_cols) constant_cols->push_back(k);
            continue;
        }
        for (Vec& row : matrix) row[k] = (row[k] - lo) / (hi - lo);
    }
    return matrix;
}

std::vector<Vec> strategy_heatmap(const Registry& registry,
                                  const std::vector<const Trajectory*>& pure_demos,
                                  std::vector<std::size_t>* constant_cols) {
    std::size_t m = registry.strategy_count();
    check(m >= 2, "strategy_heatmap: need at least two strategies");
    check(pure_demos.size() == m, "strategy_heatmap: pure-demo count mismatch");
    double gamma = registry.strategies()[0].policy.env_spec().gamma;
    std::vector<Vec> matrix(m, Vec(m, 0.0));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k)
            matrix[j][k] =
                normalized_return(registry.strategies()[j].strategy_reward, *pure_demos[k], gamma);
    return normalize_heatmap_columns(std::move(matrix), constant_cols);
}

double strategies_identified(const std::vector<Vec>& heatmap) {
    std::size_t m = heatmap.size();
    check(m >= 1, "strategies_identified: empty heatmap");
    for (const Vec& row : heatmap)
        check(row.size() == m, "strategies_identified: heatmap must be square");
    std::size_t hits = 0;
    for (std::size_t k = 0; k < m; ++k) {
        bool strict_max = true;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == k) continue;
            if (heatmap[j][k] >= heatmap[k][k]) {
                strict_max = false;
                break;
            }
        }
        if (strict_max) ++hits;
    }
    return double(hits) / double(m);
}

std::vector<Trajectory> build_test_set(const Environment& env, RandomStream& rng,
                                       std::size_t n_policies, std::size_t snapshots,
                                       std::size_t per_snapshot) {
    check(n_policies >= 1 && snapshots >= 1 && per_snapshot >= 1,
          "build_test_set: counts must be positive");
    std::vector<ScriptedStrategy> all = builtin_strategies(env.spec().id);
    check(n_policies <= all.size(), "build_test_set: not enough scripted strategies");
    std::vector<Trajectory> out;
    out.reserve(n_policies * snapshots * per_snapshot);
    for (std::size_t p = 0; p < n_policies; ++p) {
        for (std::size_t s = 0; s < snapshots; ++s) {
            ScriptedStrategy staged = all[p];
            // competence decays geometrically with the stage index
            staged.exploration_std = 0.05 * std::pow(3.0, double(s));
            ScriptedPolicy policy(staged, env.spec());
            RandomStream stage_rng = rng.spawn(p * 1000 + s);
            for (std::size_t r = 0; r < per_snapshot; ++r) {
                RandomStream stream = stage_rng.spawn(r);
                out.push_back(rollout(env, policy, env.spec().horizon, stream));
            }
        }
    }
    return out;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IntegrityError("cannot write report CSV: " + path);
    f << std::setprecision(17);
    f << "arrival_index,branch,env_return,log_likelihood,kl\n";
    for (const PolicyMetricsRow& r : report.rows)
        f << r.arrival_index << ',' << r.branch << ',' << r.env_return << ','
          << r.log_likelihood << ',' << r.kl << '\n';
}

void write_report_summary(const EvalReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IntegrityError("cannot write report summary: " + path);
    f << std::setprecision(12);
    f << "seed: " << report.seed << '\n';
    f << "config_hash: " << report.config_hash << '\n';
    f << "demos: " << report.rows.size() << '\n';
    if (std::isnan(report.pearson_r))
        f << "task_reward_correlation: absent\n";
    else
        f << "task_reward_correlation: " << report.pearson_r << '\n';
    f << "strategies_identified: " << report.identified << '\n';
    f << "heatmap:\n";
    for (const Vec& row : report.heatmap) {
        f << " ";
        for (double v : row) f << ' ' << std::fixed << std::setprecision(4) << v;
        f << '\n';
        f.unsetf(std::ios::fixed);
        f << std::setprecision(12);
    }
    double mean_ret = 0.0, mean_kl = 0.0;
    for (const PolicyMetricsRow& r : report.rows) {
        mean_ret += r.env_return;
        mean_kl += r.kl;
    }
    if (!report.rows.empty()) {
        f << "mean_env_return: " << mean_ret / double(report.rows.size()) << '\n';
        f << "mean_kl: " << mean_kl / double(report.rows.size()) << '\n';
    }
    for (const std::string& w : report.warnings) f << "warning: " << w << '\n';
}

void write_report_svg(const EvalReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IntegrityError("cannot write report SVG: " + path);
    const int W = 480, H = 360, pad = 40;
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
      << H - pad << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
    if (!report.scatter.empty()) {
        double xlo = report.scatter[0].first, xhi = xlo;
        double ylo = report.scatter[0].second, yhi = ylo;
        for (auto [x, y] : report.scatter) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
        if (xhi - xlo <= 0.0) xhi = xlo + 1.0;
        if (yhi - ylo <= 0.0) yhi = ylo + 1.0;
        f << std::setprecision(6);
        for (auto [x, y] : report.scatter) {
            double px = pad + (x - xlo) / (xhi - xlo) * (W - 2 * pad);
            double py = H - pad - (y - ylo) / (yhi - ylo) * (H - 2 * pad);
            f << "<circle cx=\"" << px << "\" cy=\"" << py
              << "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
        }
    }
    f << "<text x=\"" << W / 2 << "\" y=\"" << H - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">estimated task return</text>\n";
    f << "<text x=\"14\" y=\"" << H / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " << H / 2
      << ")\">ground-truth return</text>\n";
    f << "</svg>\n";
}

}  // namespace dmsrd
