// End-to-end acceptance checks. Each criterion prints exactly one
// pass/fail line; the exit code is the number of failures.
//
// Usage: acceptance <path-to-dmsrd-cli> [workdir]

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dmsrd/config.hpp"
#include "dmsrd/demogen.hpp"
#include "dmsrd/evalkit.hpp"
#include "dmsrd/lifelong.hpp"

namespace fs = std::filesystem;
using namespace dmsrd;

namespace {

int g_failures = 0;

void verdict(int criterion, const std::string& what, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << ": criterion " << criterion << " — " << what;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

// ---------- criterion 1: fisher z reproduction ----------

void criterion_fisher_z() {
    FisherZResult a = fisher_z_test(0.614, 10000, 0.586, 10000);
    FisherZResult b = fisher_z_test(0.614, 10000, 0.502, 10000);
    bool ok = std::fabs(a.z - 3.09) <= 0.05 && std::fabs(b.z - 11.5) <= 0.1;
    std::ostringstream d;
    d.precision(4);
    d << "z1=" << a.z << " z2=" << b.z;
    verdict(1, "fisher z statistics reproduce the reported 3.09 and 11.5", ok, d.str());
}

// ---------- criterion 2: knn kl oracle suite ----------

std::vector<Vec> gaussian_cloud(RandomStream& rng, std::size_t n, const Vec& mean, const Vec& sd) {
    std::vector<Vec> out(n);
    for (Vec& p : out) {
        p.resize(mean.size());
        for (std::size_t d = 0; d < mean.size(); ++d) p[d] = mean[d] + sd[d] * rng.normal();
    }
    return out;
}

double median(Vec xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

double median_kl(const Vec& mp, const Vec& sp, const Vec& mq, const Vec& sq, std::size_t n,
                 double analytic, double* med_abs_err) {
    Vec estimates, errors;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RandomStream rng(seed * 7919);
        auto p = gaussian_cloud(rng, n, mp, sp);
        auto q = gaussian_cloud(rng, n, mq, sq);
        double est = knn_kl_estimate(p, q);
        estimates.push_back(est);
        errors.push_back(std::fabs(est - analytic));
    }
    if (med_abs_err) *med_abs_err = median(errors);
    return median(estimates);
}

void criterion_kl_suite() {
    struct Case {
        Vec mp, sp, mq, sq;
        double analytic;
    };
    std::vector<Case> cases = {
        {{0.0}, {1.0}, {0.0}, {1.0}, 0.0},
        {{0.0}, {1.0}, {1.0}, {1.0}, 0.5},
        {{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, {2.0, 2.0}, 2.0 * (std::log(2.0) + 0.125 - 0.5)}};
    bool ok = true;
    std::ostringstream d;
    d.precision(3);
    for (const Case& c : cases) {
        double err_small = 0.0, err_large = 0.0;
        double med = median_kl(c.mp, c.sp, c.mq, c.sq, 1000, c.analytic, &err_small);
        median_kl(c.mp, c.sp, c.mq, c.sq, 3000, c.analytic, &err_large);
        bool close = std::fabs(med - c.analytic) <= 0.15;
        bool shrinks = err_large <= err_small;
        ok = ok && close && shrinks;
        d << "[" << c.analytic << ": med=" << med << " err " << err_small << "->" << err_large
          << "] ";
    }
    verdict(2, "knn kl estimator hits the gaussian oracles and tightens with n", ok, d.str());
}

// ---------- criterion 3: gradient suite ----------

Vec fd_over_params(const std::function<double()>& f, ParamSet& params, double h = 1e-4) {
    Vec flat = params.flatten();
    Vec grad(flat.size());
    auto central = [&](std::size_t i, double step) {
        Vec plus = flat, minus = flat;
        plus[i] += step;
        minus[i] -= step;
        params.unflatten(plus);
        double fp = f();
        params.unflatten(minus);
        double fm = f();
        return (fp - fm) / (2.0 * step);
    };
    for (std::size_t i = 0; i < flat.size(); ++i) {
        // Richardson extrapolation cancels the O(h^2) truncation term while
        // the wide step keeps cancellation noise out of the quotient
        double d1 = central(i, h), d2 = central(i, h / 2.0);
        grad[i] = (4.0 * d2 - d1) / 3.0;
    }
    params.unflatten(flat);
    return grad;
}

double worst_rel_err(const Vec& got, const Vec& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        double denom = std::max({std::fabs(got[i]), std::fabs(fd[i]), 1e-7});
        worst = std::max(worst, std::fabs(got[i] - fd[i]) / denom);
    }
    return worst;
}

std::vector<Transition> random_transitions(RandomStream& rng, std::size_t n) {
    std::vector<Transition> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto rv = [&] {
            return Vec{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.4, 0.4),
                       rng.uniform(-1, 1)};
        };
        out.push_back({rv(), {rng.uniform(-1, 1)}, rv()});
    }
    return out;
}

Trajectory random_trajectory(RandomStream& rng, std::size_t steps, double gamma) {
    Trajectory t;
    t.gamma = gamma;
    for (std::size_t i = 0; i < steps; ++i) {
        t.states.push_back(
            {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        t.actions.push_back({0.0});
        t.env_rewards.push_back(0.0);
    }
    t.terminal_state = t.states.back();
    return t;
}

void criterion_gradients() {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(4242);
    double worst_airl = 0.0, worst_msrd = 0.0, worst_bcd = 0.0, worst_ppo = 0.0;

    for (int point = 0; point < 20; ++point) {
        // AIRL cross-entropy
        {
            RewardNet g = RewardNet::create(spec, {4}, true, rng);
            RewardNet h = RewardNet::create(spec, {4}, false, rng);
            GaussianPolicy pol = GaussianPolicy::create(spec, {4}, rng);
            auto demo = random_transitions(rng, 4);
            auto gen = random_transitions(rng, 5);
            AIRLDiscriminator disc{g, h, spec.gamma};
            ParamSet gg = g.params().zeros_like(), hg = h.params().zeros_like();
            airl_loss_grad(disc, demo, gen, pol, gg, hg);
            RewardNet gw = g, hw = h;
            auto loss = [&] {
                AIRLDiscriminator d{gw, hw, spec.gamma};
                return airl_discriminator_loss(d, demo, gen, pol);
            };
            worst_airl = std::max(worst_airl,
                                  worst_rel_err(gg.flatten(), fd_over_params(loss, gw.mutable_params())));
            worst_airl = std::max(worst_airl,
                                  worst_rel_err(hg.flatten(), fd_over_params(loss, hw.mutable_params())));
        }
        // shared-task composite
        {
            RewardDecomposition decomp{RewardNet::create(spec, {4}, false, rng),
                                       {RewardNet::create(spec, {4}, true, rng),
                                        RewardNet::create(spec, {4}, true, rng)},
                                       0.2};
            std::vector<RewardNet> values = {RewardNet::create(spec, {4}, false, rng),
                                             RewardNet::create(spec, {4}, false, rng)};
            GaussianPolicy p1 = GaussianPolicy::create(spec, {4}, rng);
            GaussianPolicy p2 = GaussianPolicy::create(spec, {4}, rng);
            std::vector<StrategyBatch> batches = {
                {random_transitions(rng, 3), random_transitions(rng, 4), &p1},
                {random_transitions(rng, 3), random_transitions(rng, 4), &p2}};
            ParamSet tg = decomp.task.params().zeros_like();
            std::vector<ParamSet> sg = {decomp.strategies[0].params().zeros_like(),
                                        decomp.strategies[1].params().zeros_like()};
            std::vector<ParamSet> vg = {values[0].params().zeros_like(),
                                        values[1].params().zeros_like()};
            msrd_loss_grad(decomp, values, batches, tg, sg, vg);
            RewardDecomposition work = decomp;
            std::vector<RewardNet> vwork = values;
            auto loss = [&] { return msrd_loss(work, vwork, batches); };
            worst_msrd = std::max(worst_msrd,
                                  worst_rel_err(tg.flatten(), fd_over_params(loss, work.task.mutable_params())));
            worst_msrd = std::max(
                worst_msrd,
                worst_rel_err(sg[0].flatten(),
                              fd_over_params(loss, work.strategies[0].mutable_params())));
            worst_msrd = std::max(worst_msrd,
                                  worst_rel_err(vg[1].flatten(),
                                                fd_over_params(loss, vwork[1].mutable_params())));
        }
        // between-class discrimination
        {
            RewardDecomposition decomp{RewardNet::create(spec, {4}, false, rng),
                                       {RewardNet::create(spec, {4}, true, rng),
                                        RewardNet::create(spec, {4}, true, rng)},
                                       0.01};
            Trajectory demo = random_trajectory(rng, 5, spec.gamma);
            Trajectory m1 = random_trajectory(rng, 4, spec.gamma);
            Trajectory m2 = random_trajectory(rng, 6, spec.gamma);
            Vec w = sample_simplex(2, rng);
            std::vector<ParamSet> grads = {decomp.strategies[0].params().zeros_like(),
                                           decomp.strategies[1].params().zeros_like()};
            bcd_loss_grad(decomp, demo, w, {&m1, &m2}, spec.gamma, grads);
            RewardDecomposition work = decomp;
            auto loss = [&] { return bcd_loss(work, demo, w, {&m1, &m2}, spec.gamma); };
            worst_bcd = std::max(
                worst_bcd, worst_rel_err(grads[0].flatten(),
                                         fd_over_params(loss, work.strategies[0].mutable_params())));
            worst_bcd = std::max(
                worst_bcd, worst_rel_err(grads[1].flatten(),
                                         fd_over_params(loss, work.strategies[1].mutable_params())));
        }
        // clipped-surrogate policy gradient
        {
            PPOConfig cfg;
            GaussianPolicy pol = GaussianPolicy::create(spec, {4}, rng);
            PPOBatch batch;
            for (int i = 0; i < 10; ++i) {
                Vec s = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3),
                         rng.uniform(-1, 1)};
                Vec a = {rng.uniform(-1, 1)};
                batch.states.push_back(s);
                batch.actions.push_back(a);
                batch.advantages.push_back(rng.uniform(-2, 2));
                batch.old_log_probs.push_back(pol.log_prob(s, a) + rng.uniform(-0.05, 0.05));
            }
            ParamSet grads = pol.params().zeros_like();
            ppo_surrogate_grad(pol, pol.params(), batch, cfg, grads);
            ParamSet work = pol.params();
            auto loss = [&] { return ppo_surrogate_loss(pol, work, batch, cfg); };
            worst_ppo =
                std::max(worst_ppo, worst_rel_err(grads.flatten(), fd_over_params(loss, work)));
        }
    }
    bool ok = worst_airl <= 1e-4 && worst_msrd <= 1e-4 && worst_bcd <= 1e-4 && worst_ppo <= 1e-4;
    std::ostringstream d;
    d.precision(2);
    d << "max rel err airl=" << worst_airl << " msrd=" << worst_msrd << " bcd=" << worst_bcd
      << " ppo=" << worst_ppo;
    verdict(3, "all four analytic gradients match finite differences at 20 points", ok, d.str());
}

// ---------- criterion 4: branch logic ----------

struct StubOracle final : ArbitrationOracle {
    double kl_mix = 0.0;
    double kl_new = 0.0;
    WeightSearchResult search_mixture(const Registry& registry, const Demonstration&,
                                      const Environment&, RandomStream&) override {
        WeightSearchResult res;
        Vec w(registry.strategy_count(), 0.0);
        w[0] = 1.0;
        res.weights = {w, 0.05};
        res.kl = kl_mix;
        return res;
    }
    std::pair<StrategyRecord, double> train_candidate(const Registry&, const Demonstration& demo,
                                                      const Environment& env,
                                                      RandomStream& rng) override {
        RandomStream net_rng = rng.spawn(1);
        StrategyRecord rec{RewardNet::create(env.spec(), {4}, true, net_rng),
                           RewardNet::create(env.spec(), {4}, false, net_rng),
                           GaussianPolicy::create(env.spec(), {4}, net_rng), demo.arrival_index};
        return {std::move(rec), kl_new};
    }
};

bool weights_on_simplex(const Vec& w) {
    double sum = 0.0;
    for (double x : w) {
        if (x < 0.0) return false;
        sum += x;
    }
    return std::fabs(sum - 1.0) <= 1e-9;
}

void criterion_branches() {
    auto env = make_env("pendulum-lite", 40);
    LifelongConfig cfg;
    cfg.epsilon = 2.0;
    cfg.joint_epochs = 0;
    RandomStream rng(99);
    Registry reg = Registry::create(*env, cfg, rng);
    StubOracle oracle;
    ScriptedPolicy pol(find_strategy("pendulum-lite", "hold-center"), env->spec());

    auto ingest = [&](std::size_t index) {
        Demonstration d;
        RandomStream demo_rng(500 + index);
        d.trajectory = rollout(*env, pol, 40, demo_rng);
        d.arrival_index = index;
        RandomStream ing(600 + index);
        return reg.process_demonstration(d, *env, ing, oracle);
    };

    bool ok = true;
    std::ostringstream d;

    DecisionRecord r1 = ingest(1);
    ok = ok && r1.branch == "first-strategy" && reg.strategy_count() == 1;

    oracle.kl_mix = 0.5;  // below epsilon -> mixture
    DecisionRecord r2 = ingest(2);
    ok = ok && r2.branch == "mixture-threshold" && reg.strategy_count() == 1;

    oracle.kl_mix = 3.0;  // above epsilon, candidate clearly better
    oracle.kl_new = 1.0;
    DecisionRecord r3 = ingest(3);
    ok = ok && r3.branch == "new-strategy" && reg.strategy_count() == 2;

    oracle.kl_mix = 3.0;  // candidate worse -> keep mixture
    oracle.kl_new = 5.0;
    DecisionRecord r4 = ingest(4);
    ok = ok && r4.branch == "mixture-vs-new" && reg.strategy_count() == 2;

    oracle.kl_mix = 3.0;  // exact tie -> strict inequality means new strategy
    oracle.kl_new = 3.0;
    DecisionRecord r5 = ingest(5);
    ok = ok && r5.branch == "new-strategy" && reg.strategy_count() == 3;

    // invariants: strategy count never decreases; every pure demo's
    // weight vector is one-hot; every stored weight vector lies on the
    // simplex
    std::size_t prev = 0;
    for (std::size_t c : reg.strategy_count_history()) {
        if (c < prev) ok = false;
        prev = c;
    }
    for (const StrategyRecord& s : reg.strategies()) {
        Vec w = reg.explain(s.pure_demo_index).first;
        std::size_t ones = 0, zeros = 0;
        for (double x : w) {
            if (x == 1.0) ++ones;
            if (x == 0.0) ++zeros;
        }
        if (ones != 1 || ones + zeros != w.size()) ok = false;
    }
    for (std::size_t i = 1; i <= 5; ++i)
        if (!weights_on_simplex(reg.explain(i).first)) ok = false;

    d << r1.branch << "/" << r2.branch << "/" << r3.branch << "/" << r4.branch << "/" << r5.branch
      << ", M history";
    for (std::size_t c : reg.strategy_count_history()) d << ' ' << c;
    verdict(4, "algorithm-1 branches, tie case and registry invariants", ok, d.str());
}

// ---------- criterion 5: mixture/bcd exactness ----------

Trajectory one_state_traj(double x) {
    Trajectory t;
    t.gamma = 0.99;
    t.states = {{x, 0.0, 0.0, 0.0}};
    t.actions = {{0.0}};
    t.env_rewards = {0.0};
    t.terminal_state = {x, 0.0, 0.0, 0.0};
    return t;
}

void criterion_exactness() {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    bool ok = true;
    std::ostringstream d;

    // one-hot mixture means are bitwise the base policy's
    {
        RandomStream rng(7);
        GaussianPolicy a = GaussianPolicy::create(spec, {6}, rng);
        GaussianPolicy b = GaussianPolicy::create(spec, {6}, rng);
        MixturePolicy mix({{0.0, 1.0}, 0.05}, {&a, &b});
        for (int i = 0; i < 20; ++i) {
            Vec s = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3),
                     rng.uniform(-1, 1)};
            if (mix.mean_action(s) != b.mean_action(s)) ok = false;
        }
    }

    // constructed case where every between-class term vanishes: two
    // identical single-unit strategy nets and states solved so that
    // eta(tau_i) = eta(tau_mj) + ln(0.5) for both strategies
    double loss0 = 0.0;
    {
        MLPSpec mspec;
        mspec.input_dim = 4;
        mspec.hidden = {1};
        mspec.output_dim = 1;
        mspec.output_activation = OutputActivation::Tanh;
        MLP probe(mspec);
        ParamSet params = probe.zero_params();
        params.get("W0").at(0, 0) = 1.0;
        params.get("W1").at(0, 0) = 1.0;
        RewardNet s1(spec, mspec, params);
        RewardNet s2(spec, mspec, params);
        RandomStream rng(8);
        RewardDecomposition decomp{RewardNet::create(spec, {4}, false, rng), {s1, s2}, 0.01};
        auto x_for = [](double eta) { return std::atanh(std::atanh(eta)) / 0.7; };
        Trajectory tau_i = one_state_traj(x_for(0.5 + std::log(0.5)));
        Trajectory tau_m = one_state_traj(x_for(0.5));
        loss0 = bcd_loss(decomp, tau_i, {0.5, 0.5}, {&tau_m, &tau_m}, spec.gamma);
        if (std::fabs(loss0) > 1e-10) ok = false;
    }

    // hand-expanded formula on random inputs
    double worst = 0.0;
    {
        RandomStream rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            RewardDecomposition decomp{RewardNet::create(spec, {4}, false, rng),
                                       {RewardNet::create(spec, {4}, true, rng),
                                        RewardNet::create(spec, {4}, true, rng)},
                                       0.01};
            Trajectory demo = random_trajectory(rng, 5, spec.gamma);
            Trajectory m1 = random_trajectory(rng, 4, spec.gamma);
            Trajectory m2 = random_trajectory(rng, 6, spec.gamma);
            Vec w = sample_simplex(2, rng);
            double expect = 0.0;
            for (int j = 0; j < 2; ++j) {
                double ei = std::exp(normalized_return(decomp.strategies[j], demo, spec.gamma));
                double em = std::exp(
                    normalized_return(decomp.strategies[j], j == 0 ? m1 : m2, spec.gamma));
                expect += (ei - w[j] * em) * (ei - w[j] * em);
            }
            double got = bcd_loss(decomp, demo, w, {&m1, &m2}, spec.gamma);
            worst = std::max(worst, std::fabs(got - expect));
        }
        if (worst > 1e-10) ok = false;
    }

    d.precision(3);
    d << "theorem-case loss=" << loss0 << ", worst formula gap=" << worst;
    verdict(5, "one-hot mixture, vanishing between-class case and expanded formula", ok, d.str());
}

// ---------- criteria 6-8: end-to-end presets through the cli ----------

std::string g_cli;
fs::path g_work;

int run_cli(const std::string& args) {
    std::string cmd = "\"" + g_cli + "\" " + args + " >> " + (g_work / "cli.log").string() +
                      " 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

bool run_pipeline(const std::string& preset, const std::string& tag, std::string* fail_reason) {
    fs::path demos = g_work / (tag + "_demos");
    fs::path run = g_work / (tag + "_run");
    fs::path eval = g_work / (tag + "_eval");
    if (run_cli("demogen --config " + preset + " --out " + demos.string()) != 0) {
        *fail_reason = "demogen failed";
        return false;
    }
    if (run_cli("run --config " + preset + " --demos " + demos.string() + " --out " +
                run.string()) != 0) {
        *fail_reason = "run failed";
        return false;
    }
    if (run_cli("eval --config " + preset + " --run " + run.string() + " --demos " +
                demos.string() + " --out " + eval.string()) != 0) {
        *fail_reason = "eval thresholds failed: " + slurp(eval / "verdict.txt");
        return false;
    }
    return true;
}

void criterion_benchmark() {
    std::string reason;
    bool ok = run_pipeline("benchmark-pendulum", "bench", &reason);
    std::string detail = ok ? slurp(g_work / "bench_eval" / "verdict.txt") : reason;
    detail.erase(std::remove(detail.begin(), detail.end(), '\n'), detail.end());
    verdict(6, "benchmark-pendulum meets its thresholds end to end", ok, detail);
}

void criterion_lifelong() {
    std::string reason;
    bool ok = run_pipeline("lifelong-desk", "desk", &reason);
    std::string detail = ok ? slurp(g_work / "desk_eval" / "verdict.txt") : reason;
    detail.erase(std::remove(detail.begin(), detail.end(), '\n'), detail.end());
    verdict(7, "lifelong-desk meets its thresholds end to end", ok, detail);
}

void criterion_determinism() {
    bool ok = true;
    std::ostringstream d;
    for (const auto& [preset, tag] : std::vector<std::pair<std::string, std::string>>{
             {"benchmark-pendulum", "bench"}, {"lifelong-desk", "desk"}}) {
        fs::path demos = g_work / (tag + "_demos");
        fs::path rerun = g_work / (tag + "_rerun");
        if (!fs::exists(g_work / (tag + "_run") / "decision_log.txt")) {
            ok = false;
            d << tag << ": no first run; ";
            continue;
        }
        if (run_cli("run --config " + preset + " --demos " + demos.string() + " --out " +
                    rerun.string()) != 0) {
            ok = false;
            d << tag << ": rerun failed; ";
            continue;
        }
        std::string log1 = slurp(g_work / (tag + "_run") / "decision_log.txt");
        std::string log2 = slurp(rerun / "decision_log.txt");
        std::string man1 = slurp(g_work / (tag + "_run") / "registry" / "manifest.json");
        std::string man2 = slurp(rerun / "registry" / "manifest.json");
        bool same = !log1.empty() && log1 == log2 && !man1.empty() && man1 == man2;
        ok = ok && same;
        d << tag << (same ? ": identical; " : ": MISMATCH; ");
    }
    verdict(8, "reruns reproduce decision logs and registry manifests byte for byte", ok, d.str());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-dmsrd-cli> [workdir]\n";
        return 64;
    }
    g_cli = argv[1];
    g_work = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_work");
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    criterion_fisher_z();
    criterion_kl_suite();
    criterion_gradients();
    criterion_branches();
    criterion_exactness();
    criterion_benchmark();
    criterion_lifelong();
    criterion_determinism();

    if (g_failures == 0) fs::remove_all(g_work);
    return g_failures;
}
