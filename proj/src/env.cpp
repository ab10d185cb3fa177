#include "dmsrd/env.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dmsrd {

void EnvSpec::validate() const {
    check(state_dim > 0 && action_dim > 0, "EnvSpec: dimensions must be positive");
    check(horizon >= 1, "EnvSpec: horizon must be >= 1");
    check(gamma > 0.0 && gamma < 1.0, "EnvSpec: gamma must be in (0,1)");
    check(action_low.size() == action_dim && action_high.size() == action_dim,
          "EnvSpec: action bound dimensions");
    for (std::size_t i = 0; i < action_dim; ++i)
        check(action_low[i] < action_high[i], "EnvSpec: action_low must be < action_high");
    check(norm_shift.size() == state_dim && norm_scale.size() == state_dim,
          "EnvSpec: normalizer dimensions");
}

void Trajectory::validate() const {
    check(!actions.empty(), "Trajectory: empty");
    check(actions.size() == env_rewards.size(), "Trajectory: |actions| != |rewards|");
    check(states.size() == actions.size(), "Trajectory: |states| != |actions|");
    check(!terminal_state.empty(), "Trajectory: missing terminal state");
}

Vec normalize_state(const EnvSpec& spec, const Vec& state) {
    check(state.size() == spec.state_dim, "normalize_state: dimension mismatch");
    Vec out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i)
        out[i] = (state[i] - spec.norm_shift[i]) * spec.norm_scale[i];
    return out;
}

Vec clamp_action(const EnvSpec& spec, const Vec& action) {
    check(action.size() == spec.action_dim, "clamp_action: dimension mismatch");
    Vec out(action.size());
    for (std::size_t i = 0; i < action.size(); ++i)
        out[i] = clamp(action[i], spec.action_low[i], spec.action_high[i]);
    return out;
}

namespace {

void require_finite(const Vec& v, const char* what) {
    if (!all_finite(v)) throw NumericalError(std::string("non-finite ") + what);
}

// Continuous cart-pole: state [x, xdot, theta, thetadot], theta measured
// from upright. Cart mass 1.0, pole mass 0.1, pole half-length 0.5,
// g = 9.8, force = 10 * action, semi-implicit Euler. Reward -|theta|.
class PendulumLite final : public Environment {
  public:
    explicit PendulumLite(std::size_t horizon) {
        spec_.id = "pendulum-lite";
        spec_.state_dim = 4;
        spec_.action_dim = 1;
        spec_.action_low = {-1.0};
        spec_.action_high = {1.0};
        spec_.horizon = horizon == 0 ? 200 : horizon;
        spec_.dt = 0.02;
        spec_.gamma = 0.99;
        spec_.norm_shift = {0.0, 0.0, 0.0, 0.0};
        spec_.norm_scale = {0.7, 0.5, 3.0, 1.0};
        spec_.validate();
    }

    const EnvSpec& spec() const override { return spec_; }

    Vec reset(RandomStream& rng) const override {
        double x = rng.uniform(-0.05, 0.05);
        double theta = rng.uniform(-0.05, 0.05);
        return {x, 0.0, theta, 0.0};
    }

    std::pair<Vec, double> step(const Vec& state, const Vec& action) const override {
        require_finite(state, "state");
        require_finite(action, "action");
        Vec a = clamp_action(spec_, action);
        double force = 10.0 * a[0];
        double x = state[0], xdot = state[1], theta = state[2], thetadot = state[3];
        double sin_t = std::sin(theta), cos_t = std::cos(theta);
        double total_mass = kCartMass + kPoleMass;
        double temp = (force + kPoleMass * kHalfLen * thetadot * thetadot * sin_t) / total_mass;
        double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLen * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
        double x_acc = temp - kPoleMass * kHalfLen * theta_acc * cos_t / total_mass;
        // semi-implicit: velocities first, then positions
        xdot += spec_.dt * x_acc;
        x += spec_.dt * xdot;
        thetadot += spec_.dt * theta_acc;
        theta += spec_.dt * thetadot;
        Vec next = {x, xdot, theta, thetadot};
        double reward = -std::fabs(theta);
        return {next, reward};
    }

    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kHalfLen = 0.5;
    static constexpr double kGravity = 9.8;

  private:
    EnvSpec spec_;
};

// 2-D point-mass lander in normalized units. State
// [x, y, vx, vy, left_contact, right_contact, frozen]. Ground at y = 0.
// Touchdown with |vy| <= 0.3 is a landing (+100), faster is a crash
// (-100); both legs contact on touchdown (+10 each) and the state then
// freezes with zero velocity, so terminal events are absorbing instead
// of terminating. Firing the main engine costs -0.3 per step.
class LanderLite final : public Environment {
  public:
    explicit LanderLite(std::size_t horizon) {
        spec_.id = "lander-lite";
        spec_.state_dim = 7;
        spec_.action_dim = 2;
        spec_.action_low = {0.0, -1.0};
        spec_.action_high = {1.0, 1.0};
        spec_.horizon = horizon == 0 ? 150 : horizon;
        spec_.dt = 0.05;
        spec_.gamma = 0.99;
        spec_.norm_shift = {0.0, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5};
        spec_.norm_scale = {1.0, 2.0, 1.0, 1.0, 2.0, 2.0, 2.0};
        spec_.validate();
    }

    const EnvSpec& spec() const override { return spec_; }

    Vec reset(RandomStream& rng) const override {
        double x = rng.uniform(-0.05, 0.05);
        return {x, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    }

    std::pair<Vec, double> step(const Vec& state, const Vec& action) const override {
        require_finite(state, "state");
        require_finite(action, "action");
        if (state[6] > 0.5) return {state, 0.0};  // absorbing after touchdown

        Vec a = clamp_action(spec_, action);
        double main = a[0], lateral = a[1];
        double x = state[0], y = state[1], vx = state[2], vy = state[3];
        double reward = main > 0.0 ? -0.3 : 0.0;

        vy += spec_.dt * (kMainPower * main - kGravity);
        vx += spec_.dt * (kLateralPower * lateral);
        y += spec_.dt * vy;
        x += spec_.dt * vx;

        Vec next = {x, y, vx, vy, state[4], state[5], 0.0};
        if (y <= 0.0) {
            next[1] = 0.0;
            // both legs touch down together (point mass, no attitude)
            if (state[4] < 0.5) reward += 10.0;
            if (state[5] < 0.5) reward += 10.0;
            reward += (std::fabs(vy) <= kSoftLandingSpeed) ? 100.0 : -100.0;
            next[2] = 0.0;
            next[3] = 0.0;
            next[4] = 1.0;
            next[5] = 1.0;
            next[6] = 1.0;
        }
        return {next, reward};
    }

    static constexpr double kGravity = 1.0;
    static constexpr double kMainPower = 2.0;
    static constexpr double kLateralPower = 0.6;
    static constexpr double kSoftLandingSpeed = 0.3;

  private:
    EnvSpec spec_;
};

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& id, std::size_t horizon) {
    if (id == "pendulum-lite") return std::make_unique<PendulumLite>(horizon);
    if (id == "lander-lite") return std::make_unique<LanderLite>(horizon);
    throw ConfigError("unknown environment id: " + id);
}

Trajectory rollout(const Environment& env, const PolicyBase& policy, std::size_t horizon,
                   RandomStream& rng) {
    const EnvSpec& spec = env.spec();
    check(horizon >= 1 && horizon <= spec.horizon, "rollout: horizon out of range");
    Trajectory traj;
    traj.gamma = spec.gamma;
    traj.states.reserve(horizon);
    traj.actions.reserve(horizon);
    traj.env_rewards.reserve(horizon);
    Vec state = env.reset(rng);
    for (std::size_t t = 0; t < horizon; ++t) {
        Vec action = policy.act(state, rng);
        check(action.size() == spec.action_dim, "rollout: policy action dimension mismatch");
        auto [next, reward] = env.step(state, action);
        traj.states.push_back(std::move(state));
        traj.actions.push_back(std::move(action));
        traj.env_rewards.push_back(reward);
        state = std::move(next);
    }
    traj.terminal_state = std::move(state);
    return traj;
}

double discounted_return(const Trajectory& traj, const StateRewardFn& reward_fn, double gamma) {
    traj.validate();
    double acc = 0.0, w = 1.0;
    for (const Vec& s : traj.states) {
        acc += w * reward_fn(s);
        w *= gamma;
    }
    return acc;
}

double policy_log_likelihood(const PolicyBase& policy, const Trajectory& traj) {
    traj.validate();
    double acc = 0.0;
    for (std::size_t t = 0; t < traj.steps(); ++t)
        acc += policy.log_prob(traj.states[t], traj.actions[t]);
    return acc;
}

double env_return(const Trajectory& traj) {
    double acc = 0.0;
    for (double r : traj.env_rewards) acc += r;
    return acc;
}

namespace {

void write_vec(std::ostream& os, const Vec& v) {
    for (double x : v) os << ' ' << x;
}

}  // namespace

void save_trajectory(const Trajectory& traj, const std::string& env_id, std::uint64_t seed,
                     const std::string& path) {
    traj.validate();
    std::ofstream f(path);
    if (!f) throw IntegrityError("cannot write trajectory: " + path);
    f << std::setprecision(17);
    f << "# dmsrd-trajectory-v1\n";
    f << "# env=" << env_id << " steps=" << traj.steps() << " gamma=" << traj.gamma
      << " seed=" << seed << " state_dim=" << traj.states[0].size()
      << " action_dim=" << traj.actions[0].size() << "\n";
    for (std::size_t t = 0; t < traj.steps(); ++t) {
        f << t;
        write_vec(f, traj.states[t]);
        write_vec(f, traj.actions[t]);
        f << ' ' << traj.env_rewards[t] << '\n';
    }
    f << 'T';
    write_vec(f, traj.terminal_state);
    f << '\n';
    if (!f) throw IntegrityError("trajectory write failed: " + path);
}

Trajectory load_trajectory(const std::string& path, std::string* env_id, std::uint64_t* seed) {
    std::ifstream f(path);
    if (!f) throw IntegrityError("cannot open trajectory: " + path);
    std::string line;
    std::getline(f, line);
    if (line != "# dmsrd-trajectory-v1") throw IntegrityError("bad trajectory header: " + path);
    std::getline(f, line);
    std::size_t steps = 0, state_dim = 0, action_dim = 0;
    double gamma = 0.99;
    std::string env;
    std::uint64_t sd = 0;
    {
        std::istringstream hs(line);
        std::string tok;
        while (hs >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "env") env = val;
            else if (key == "steps") steps = std::stoul(val);
            else if (key == "gamma") gamma = std::stod(val);
            else if (key == "seed") sd = std::stoull(val);
            else if (key == "state_dim") state_dim = std::stoul(val);
            else if (key == "action_dim") action_dim = std::stoul(val);
        }
    }
    if (steps == 0 || state_dim == 0 || action_dim == 0)
        throw IntegrityError("incomplete trajectory header: " + path);
    Trajectory traj;
    traj.gamma = gamma;
    for (std::size_t t = 0; t < steps; ++t) {
        std::getline(f, line);
        std::istringstream ls(line);
        std::size_t tt;
        if (!(ls >> tt) || tt != t) throw IntegrityError("bad step record in " + path);
        Vec s(state_dim), a(action_dim);
        double r;
        for (double& x : s) ls >> x;
        for (double& x : a) ls >> x;
        if (!(ls >> r)) throw IntegrityError("truncated step record in " + path);
        traj.states.push_back(std::move(s));
        traj.actions.push_back(std::move(a));
        traj.env_rewards.push_back(r);
    }
    std::getline(f, line);
    std::istringstream ts(line);
    char tag;
    if (!(ts >> tag) || tag != 'T') throw IntegrityError("missing terminal state in " + path);
    Vec term(state_dim);
    for (double& x : term) ts >> x;
    traj.terminal_state = std::move(term);
    if (env_id) *env_id = env;
    if (seed) *seed = sd;
    traj.validate();
    return traj;
}

}  // namespace dmsrd
