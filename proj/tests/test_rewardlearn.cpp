#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmsrd/demogen.hpp"
#include "dmsrd/rewardlearn.hpp"

using namespace dmsrd;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

GaussianPolicy unit_policy(const EnvSpec& spec) {
    // zero mean net, stddev 1/sqrt(2 pi) so the density at the mode is 1
    RandomStream rng(1);
    GaussianPolicy pol = GaussianPolicy::create(spec, {4}, rng, -0.5 * std::log(2.0 * M_PI));
    ParamSet zeros = pol.params().zeros_like();
    zeros.get("log_std").data.assign(spec.action_dim, -0.5 * std::log(2.0 * M_PI));
    pol.mutable_params() = zeros;
    return pol;
}

RewardNet constant_net(const EnvSpec& spec, double bias, bool bounded = false) {
    RandomStream rng(2);
    RewardNet net = RewardNet::create(spec, {4}, bounded, rng);
    ParamSet zeros = net.params().zeros_like();
    zeros.get("b1").data[0] = bias;
    net.mutable_params() = zeros;
    return net;
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

Trajectory one_state_traj(double x) {
    Trajectory t;
    t.gamma = 0.99;
    t.states = {{x, 0.0, 0.0, 0.0}};
    t.actions = {{0.0}};
    t.env_rewards = {0.0};
    t.terminal_state = {x, 0.0, 0.0, 0.0};
    return t;
}

Vec fd_over_params(const std::function<double()>& f, ParamSet& params, double h = 1e-6) {
    Vec flat = params.flatten();
    Vec grad(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        Vec plus = flat, minus = flat;
        plus[i] += h;
        minus[i] -= h;
        params.unflatten(plus);
        double fp = f();
        params.unflatten(minus);
        double fm = f();
        grad[i] = (fp - fm) / (2.0 * h);
    }
    params.unflatten(flat);
    return grad;
}

void check_close(const Vec& got, const Vec& fd, double tol = 1e-4) {
    REQUIRE(got.size() == fd.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        double denom = std::max({std::fabs(got[i]), std::fabs(fd[i]), 1e-7});
        CHECK(std::fabs(got[i] - fd[i]) / denom < tol);
    }
}

}  // namespace

TEST_CASE("transitions_of chains states and uses the terminal state last") {
    Trajectory t;
    t.gamma = 0.99;
    for (int i = 0; i < 3; ++i) {
        t.states.push_back({double(i), 0, 0, 0});
        t.actions.push_back({0.1 * i});
        t.env_rewards.push_back(0.0);
    }
    t.terminal_state = {9.0, 0, 0, 0};
    auto trs = transitions_of(t);
    REQUIRE(trs.size() == 3);
    CHECK(trs[0].sp == t.states[1]);
    CHECK(trs[1].sp == t.states[2]);
    CHECK(trs[2].sp == t.terminal_state);
}

TEST_CASE("discriminator closed forms") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    GaussianPolicy pol = unit_policy(spec);
    Transition tr{{0, 0, 0, 0}, {0.0}, {0, 0, 0, 0}};
    CHECK(pol.log_prob(tr.s, tr.a) == doctest::Approx(0.0).epsilon(1e-12));

    // f = 0, pi = 1 -> balance point 0.5
    AIRLDiscriminator disc0{constant_net(spec, 0.0), constant_net(spec, 0.0), spec.gamma};
    CHECK(discriminator_prob(disc0, pol, tr) == doctest::Approx(0.5).epsilon(1e-12));

    // g = 1, h = 0, pi = 1 -> e/(e+1)
    AIRLDiscriminator disc1{constant_net(spec, 1.0), constant_net(spec, 0.0), spec.gamma};
    CHECK(discriminator_prob(disc1, pol, tr) ==
          doctest::Approx(M_E / (M_E + 1.0)).epsilon(1e-12));

    // monotone in g over a grid of biases
    double prev = 0.0;
    for (int i = 0; i < 10; ++i) {
        double bias = -2.0 + 0.4 * i;
        AIRLDiscriminator d{constant_net(spec, bias), constant_net(spec, 0.0), spec.gamma};
        double p = discriminator_prob(d, pol, tr);
        if (i > 0) CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("airl loss closed form and summation oracle") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    GaussianPolicy pol = unit_policy(spec);
    Transition tr{{0, 0, 0, 0}, {0.0}, {0, 0, 0, 0}};

    AIRLDiscriminator disc0{constant_net(spec, 0.0), constant_net(spec, 0.0), spec.gamma};
    CHECK(airl_discriminator_loss(disc0, {tr}, {tr}, pol) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // random batch vs an independent per-transition summation
    RandomStream rng(7);
    RewardNet g = RewardNet::create(spec, {5}, true, rng);
    RewardNet h = RewardNet::create(spec, {5}, false, rng);
    AIRLDiscriminator disc{g, h, spec.gamma};
    GaussianPolicy rpol = GaussianPolicy::create(spec, {5}, rng);
    auto demo = random_transitions(rng, 6);
    auto gen = random_transitions(rng, 9);
    double expect = 0.0;
    for (const Transition& t : demo)
        expect -= std::log(discriminator_prob(disc, rpol, t)) / 6.0;
    for (const Transition& t : gen)
        expect -= std::log(1.0 - discriminator_prob(disc, rpol, t)) / 9.0;
    CHECK(airl_discriminator_loss(disc, demo, gen, rpol) ==
          doctest::Approx(expect).epsilon(1e-10));

    CHECK_THROWS_AS(airl_discriminator_loss(disc, {}, gen, rpol), ContractError);
}

TEST_CASE("airl gradient matches finite differences") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(11);
    for (int point = 0; point < 5; ++point) {
        RewardNet g = RewardNet::create(spec, {5}, true, rng);
        RewardNet h = RewardNet::create(spec, {5}, false, rng);
        GaussianPolicy pol = GaussianPolicy::create(spec, {5}, rng);
        auto demo = random_transitions(rng, 5);
        auto gen = random_transitions(rng, 7);
        AIRLDiscriminator disc{g, h, spec.gamma};
        ParamSet g_grads = g.params().zeros_like();
        ParamSet h_grads = h.params().zeros_like();
        double loss = airl_loss_grad(disc, demo, gen, pol, g_grads, h_grads);
        CHECK(loss == doctest::Approx(airl_discriminator_loss(disc, demo, gen, pol)).epsilon(1e-12));

        RewardNet g_work = g, h_work = h;
        auto loss_of = [&] {
            AIRLDiscriminator d{g_work, h_work, spec.gamma};
            return airl_discriminator_loss(d, demo, gen, pol);
        };
        check_close(g_grads.flatten(), fd_over_params(loss_of, g_work.mutable_params()));
        check_close(h_grads.flatten(), fd_over_params(loss_of, h_work.mutable_params()));
    }
}

TEST_CASE("combined_reward pointwise oracle") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(13);
    RewardDecomposition decomp{RewardNet::create(spec, {5}, false, rng),
                               {RewardNet::create(spec, {5}, true, rng),
                                RewardNet::create(spec, {5}, true, rng)},
                               0.37};
    StateRewardFn r1 = combined_reward(decomp, 1);
    for (int i = 0; i < 100; ++i) {
        Vec s = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(r1(s) ==
              doctest::Approx(decomp.task.eval(s) + 0.37 * decomp.strategies[1].eval(s))
                  .epsilon(1e-14));
    }
    decomp.alpha = 0.0;
    StateRewardFn r0 = combined_reward(decomp, 0);
    Vec s = {0.1, 0.2, 0.3, 0.4};
    CHECK(r0(s) == doctest::Approx(decomp.task.eval(s)).epsilon(1e-14));
    CHECK_THROWS_AS(combined_reward(decomp, 5), ContractError);
}

TEST_CASE("msrd requires two strategies and matches the hand-expanded oracle") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(17);
    RewardNet task = RewardNet::create(spec, {5}, false, rng);
    std::vector<RewardNet> strategies = {RewardNet::create(spec, {5}, true, rng),
                                         RewardNet::create(spec, {5}, true, rng)};
    std::vector<RewardNet> values = {RewardNet::create(spec, {5}, false, rng),
                                     RewardNet::create(spec, {5}, false, rng)};
    GaussianPolicy p1 = GaussianPolicy::create(spec, {5}, rng);
    GaussianPolicy p2 = GaussianPolicy::create(spec, {5}, rng);
    std::vector<StrategyBatch> batches = {
        {random_transitions(rng, 4), random_transitions(rng, 6), &p1},
        {random_transitions(rng, 5), random_transitions(rng, 7), &p2}};

    RewardDecomposition one{task, {strategies[0]}, 0.01};
    CHECK_THROWS_AS(msrd_loss(one, {values[0]}, {batches[0]}), ContractError);

    RewardDecomposition decomp{task, strategies, 0.01};
    double expect = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        const StrategyBatch& b = batches[j];
        auto f_of = [&](const Transition& t) {
            return task.eval(t.s) + 0.01 * strategies[j].eval(t.s) +
                   spec.gamma * values[j].eval(t.sp) - values[j].eval(t.s);
        };
        for (const Transition& t : b.demo) {
            double z = clamp(f_of(t) - b.policy->log_prob(t.s, t.a), -20.0, 20.0);
            expect -= std::log(sigmoid(z)) / double(b.demo.size());
        }
        for (const Transition& t : b.gen) {
            double z = clamp(f_of(t) - b.policy->log_prob(t.s, t.a), -20.0, 20.0);
            expect -= std::log(1.0 - sigmoid(z)) / double(b.gen.size());
            expect += 0.01 * std::fabs(strategies[j].eval(t.s)) / double(b.gen.size());
        }
    }
    CHECK(msrd_loss(decomp, values, batches) == doctest::Approx(expect).epsilon(1e-10));

    // alpha = 0 equals the sum of per-strategy AIRL losses with the
    // shared task reward as the g head
    RewardDecomposition shared{task, strategies, 0.0};
    double airl_sum = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        AIRLDiscriminator d{task, values[j], spec.gamma};
        airl_sum +=
            airl_discriminator_loss(d, batches[j].demo, batches[j].gen, *batches[j].policy);
    }
    CHECK(msrd_loss(shared, values, batches) == doctest::Approx(airl_sum).epsilon(1e-12));
}

TEST_CASE("msrd gradients: finite differences plus exact-zero cross-strategy coupling") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(19);
    RewardNet task = RewardNet::create(spec, {4}, false, rng);
    std::vector<RewardNet> strategies = {RewardNet::create(spec, {4}, true, rng),
                                         RewardNet::create(spec, {4}, true, rng)};
    std::vector<RewardNet> values = {RewardNet::create(spec, {4}, false, rng),
                                     RewardNet::create(spec, {4}, false, rng)};
    GaussianPolicy p1 = GaussianPolicy::create(spec, {4}, rng);
    GaussianPolicy p2 = GaussianPolicy::create(spec, {4}, rng);
    std::vector<StrategyBatch> batches = {
        {random_transitions(rng, 3), random_transitions(rng, 4), &p1},
        {random_transitions(rng, 3), random_transitions(rng, 5), &p2}};
    RewardDecomposition decomp{task, strategies, 0.2};

    ParamSet task_grads = task.params().zeros_like();
    std::vector<ParamSet> strat_grads = {strategies[0].params().zeros_like(),
                                         strategies[1].params().zeros_like()};
    std::vector<ParamSet> value_grads = {values[0].params().zeros_like(),
                                         values[1].params().zeros_like()};
    double loss = msrd_loss_grad(decomp, values, batches, task_grads, strat_grads, value_grads);
    CHECK(loss == doctest::Approx(msrd_loss(decomp, values, batches)).epsilon(1e-12));

    RewardDecomposition work = decomp;
    std::vector<RewardNet> vwork = values;
    auto loss_of = [&] { return msrd_loss(work, vwork, batches); };
    check_close(task_grads.flatten(), fd_over_params(loss_of, work.task.mutable_params()));
    check_close(strat_grads[0].flatten(),
                fd_over_params(loss_of, work.strategies[0].mutable_params()));
    check_close(strat_grads[1].flatten(),
                fd_over_params(loss_of, work.strategies[1].mutable_params()));
    check_close(value_grads[0].flatten(), fd_over_params(loss_of, vwork[0].mutable_params()));
    check_close(value_grads[1].flatten(), fd_over_params(loss_of, vwork[1].mutable_params()));

    // replacing strategy 1's batches must leave strategy 2's gradient
    // bitwise unchanged
    RandomStream rng2(23);
    std::vector<StrategyBatch> altered = batches;
    auto alt_demo = random_transitions(rng2, 3);
    auto alt_gen = random_transitions(rng2, 4);
    altered[0] = {alt_demo, alt_gen, &p1};
    ParamSet tg2 = task.params().zeros_like();
    std::vector<ParamSet> sg2 = {strategies[0].params().zeros_like(),
                                 strategies[1].params().zeros_like()};
    std::vector<ParamSet> vg2 = {values[0].params().zeros_like(),
                                 values[1].params().zeros_like()};
    msrd_loss_grad(decomp, values, altered, tg2, sg2, vg2);
    CHECK(sg2[1].flatten() == strat_grads[1].flatten());
    CHECK(vg2[1].flatten() == value_grads[1].flatten());
    CHECK(tg2.flatten() != task_grads.flatten());
}

TEST_CASE("normalized_return oracle and bounds") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(29);
    RewardNet net = RewardNet::create(spec, {5}, true, rng);
    Trajectory t;
    t.gamma = 0.9;
    for (int i = 0; i < 7; ++i) {
        t.states.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                            rng.uniform(-1, 1)});
        t.actions.push_back({0.0});
        t.env_rewards.push_back(0.0);
    }
    t.terminal_state = t.states.back();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 7; ++i) {
        num += std::pow(0.9, i) * net.eval(t.states[i]);
        den += std::pow(0.9, i);
    }
    double eta = normalized_return(net, t, 0.9);
    CHECK(eta == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(eta >= -1.0);
    CHECK(eta <= 1.0);
}

TEST_CASE("bcd closed forms") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();

    // all strategy rewards identically zero, w = (0.5, 0.5) -> 0.5
    RewardDecomposition decomp{constant_net(spec, 0.0),
                               {constant_net(spec, 0.0, true), constant_net(spec, 0.0, true)},
                               0.01};
    Trajectory a = one_state_traj(0.3), b = one_state_traj(-0.4), c = one_state_traj(0.8);
    CHECK(bcd_loss(decomp, a, {0.5, 0.5}, {&b, &c}, spec.gamma) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // weights off the simplex rejected; missing pure demo rejected
    CHECK_THROWS_AS(bcd_loss(decomp, a, {0.5, 0.4}, {&b, &c}, spec.gamma), ContractError);
    CHECK_THROWS_AS(bcd_loss(decomp, a, {0.5, 0.5}, {&b, nullptr}, spec.gamma), IntegrityError);
}

TEST_CASE("bcd is zero on a constructed theorem-satisfying case") {
    // two identical single-hidden-unit strategy nets r(s) =
    // tanh(tanh(0.7 x)); choose states so that
    // eta(tau_i) = eta(tau_mj) + ln(0.5) for both strategies
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();

    RandomStream rng(31);
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

    double b_val = 0.5;                      // eta on the pure demos
    double a_val = b_val + std::log(0.5);    // eta on the mixed demo
    auto x_for = [](double eta) { return std::atanh(std::atanh(eta)) / 0.7; };
    Trajectory tau_i = one_state_traj(x_for(a_val));
    Trajectory tau_m = one_state_traj(x_for(b_val));

    RewardDecomposition decomp{constant_net(spec, 0.0), {s1, s2}, 0.01};
    double loss = bcd_loss(decomp, tau_i, {0.5, 0.5}, {&tau_m, &tau_m}, spec.gamma);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::fabs(loss) < 1e-10);
}

TEST_CASE("bcd matches the hand-expanded formula and finite differences") {
    auto env = make_env("pendulum-lite");
    const EnvSpec& spec = env->spec();
    RandomStream rng(37);
    RewardDecomposition decomp{RewardNet::create(spec, {4}, false, rng),
                               {RewardNet::create(spec, {4}, true, rng),
                                RewardNet::create(spec, {4}, true, rng)},
                               0.01};
    auto mk_traj = [&](int steps) {
        Trajectory t;
        t.gamma = spec.gamma;
        for (int i = 0; i < steps; ++i) {
            t.states.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                                rng.uniform(-1, 1)});
            t.actions.push_back({0.0});
            t.env_rewards.push_back(0.0);
        }
        t.terminal_state = t.states.back();
        return t;
    };
    Trajectory demo = mk_traj(6), m1 = mk_traj(5), m2 = mk_traj(7);
    Vec w = {0.3, 0.7};

    double expect = 0.0;
    for (int j = 0; j < 2; ++j) {
        double ei = std::exp(normalized_return(decomp.strategies[j], demo, spec.gamma));
        double em = std::exp(normalized_return(decomp.strategies[j],
                                               j == 0 ? m1 : m2, spec.gamma));
        expect += (ei - w[j] * em) * (ei - w[j] * em);
    }
    CHECK(bcd_loss(decomp, demo, w, {&m1, &m2}, spec.gamma) ==
          doctest::Approx(expect).epsilon(1e-10));

    std::vector<ParamSet> grads = {decomp.strategies[0].params().zeros_like(),
                                   decomp.strategies[1].params().zeros_like()};
    double loss = bcd_loss_grad(decomp, demo, w, {&m1, &m2}, spec.gamma, grads);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-10));

    RewardDecomposition work = decomp;
    auto loss_of = [&] { return bcd_loss(work, demo, w, {&m1, &m2}, spec.gamma); };
    check_close(grads[0].flatten(), fd_over_params(loss_of, work.strategies[0].mutable_params()));
    check_close(grads[1].flatten(), fd_over_params(loss_of, work.strategies[1].mutable_params()));
}

TEST_CASE("single-demo airl is deterministic and trains") {
    auto env = make_env("pendulum-lite", 30);
    ScriptedPolicy expert(find_strategy("pendulum-lite", "hold-center"), env->spec());
    RandomStream demo_rng(41);
    Demonstration demo;
    demo.trajectory = rollout(*env, expert, 30, demo_rng);
    demo.arrival_index = 1;

    AIRLConfig cfg;
    cfg.iterations = 4;
    cfg.ppo.rollouts_per_iter = 2;
    cfg.reward_hidden = {8};
    cfg.policy_hidden = {8};

    RandomStream r1(43), r2(43);
    TrainedStrategy t1 = train_new_strategy_airl(demo, *env, r1, cfg);
    TrainedStrategy t2 = train_new_strategy_airl(demo, *env, r2, cfg);
    CHECK(t1.policy.params().flatten() == t2.policy.params().flatten());
    CHECK(t1.g.params().flatten() == t2.g.params().flatten());
    CHECK(t1.h.params().flatten() == t2.h.params().flatten());
    CHECK(t1.disc_loss_trace.size() == 4);
    for (double v : t1.disc_loss_trace) CHECK(std::isfinite(v));
}
