#include "dmsrd/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dmsrd/demogen.hpp"

namespace dmsrd {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const std::string& tok : split(v, ','))
        out.push_back(static_cast<std::size_t>(parse_uint(key, tok)));
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::string& sep,
                 std::string (*fmt)(const T&)) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt(xs[i]);
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (env != "pendulum-lite" && env != "lander-lite")
        throw ConfigError("config: unknown env '" + env + "'");
    if (arrival_order != "sequential" && arrival_order != "shuffled")
        throw ConfigError("config: arrival_order must be sequential or shuffled");
    if (alpha <= 0.0) throw ConfigError("config: alpha must be positive");
    if (epsilon < 0.0) throw ConfigError("config: epsilon must be >= 0");
    if (epsilon == 0.0 && epsilon_scale <= 0.0)
        throw ConfigError("config: epsilon_scale must be positive when epsilon is auto");
    if (demo_strategies.empty()) throw ConfigError("config: demo_strategies is empty");
    for (const std::string& id : demo_strategies)
        find_strategy(env, id);  // throws on unknown ids
    for (const Vec& w : mixture_specs) {
        if (w.size() != demo_strategies.size())
            throw ConfigError("config: mixture_specs entry length must match demo_strategies");
        double sum = 0.0;
        for (double x : w) {
            if (x < 0.0) throw ConfigError("config: mixture_specs weights must be >= 0");
            sum += x;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ConfigError("config: mixture_specs weights must sum to 1");
    }
    if (knn_k < 1 || search_rollouts < 1 || search_budget < 1)
        throw ConfigError("config: search parameters must be positive");
    if (min_strategies > max_strategies)
        throw ConfigError("config: min_strategies exceeds max_strategies");
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    auto fmt_size = +[](const std::size_t& x) { return std::to_string(x); };
    auto fmt_str = +[](const std::string& x) { return x; };
    out << "env = " << env << '\n';
    out << "horizon = " << horizon << '\n';
    out << "seed = " << seed << '\n';
    out << "alpha = " << fmt_double(alpha) << '\n';
    out << "epsilon = " << fmt_double(epsilon) << '\n';
    out << "epsilon_scale = " << fmt_double(epsilon_scale) << '\n';
    out << "joint_epochs = " << joint_epochs << '\n';
    out << "reward_lr = " << fmt_double(reward_lr) << '\n';
    out << "bcd_weight = " << fmt_double(bcd_weight) << '\n';
    out << "airl_iterations = " << airl_iterations << '\n';
    out << "airl_disc_steps = " << airl_disc_steps << '\n';
    out << "airl_disc_lr = " << fmt_double(airl_disc_lr) << '\n';
    out << "reward_hidden = " << join(reward_hidden, ", ", fmt_size) << '\n';
    out << "policy_hidden = " << join(policy_hidden, ", ", fmt_size) << '\n';
    out << "ppo_rollouts = " << ppo_rollouts << '\n';
    out << "ppo_epochs = " << ppo_epochs << '\n';
    out << "ppo_clip = " << fmt_double(ppo_clip) << '\n';
    out << "ppo_gae_lambda = " << fmt_double(ppo_gae_lambda) << '\n';
    out << "ppo_policy_lr = " << fmt_double(ppo_policy_lr) << '\n';
    out << "ppo_value_lr = " << fmt_double(ppo_value_lr) << '\n';
    out << "joint_ppo_rollouts = " << joint_ppo_rollouts << '\n';
    out << "joint_ppo_epochs = " << joint_ppo_epochs << '\n';
    out << "search_budget = " << search_budget << '\n';
    out << "search_rollouts = " << search_rollouts << '\n';
    out << "knn_k = " << knn_k << '\n';
    out << "mixture_sigma = " << fmt_double(mixture_sigma) << '\n';
    out << "demo_strategies = " << join(demo_strategies, ", ", fmt_str) << '\n';
    out << "demos_per_strategy = " << demos_per_strategy << '\n';
    out << "mixture_demos = " << mixture_demos << '\n';
    if (!mixture_specs.empty()) {
        out << "mixture_specs = ";
        for (std::size_t i = 0; i < mixture_specs.size(); ++i) {
            if (i) out << " | ";
            for (std::size_t j = 0; j < mixture_specs[i].size(); ++j)
                out << (j ? " " : "") << fmt_double(mixture_specs[i][j]);
        }
        out << '\n';
    }
    out << "arrival_order = " << arrival_order << '\n';
    out << "eval_rollouts = " << eval_rollouts << '\n';
    out << "test_policies = " << test_policies << '\n';
    out << "test_snapshots = " << test_snapshots << '\n';
    out << "test_per_snapshot = " << test_per_snapshot << '\n';
    out << "min_strategies = " << min_strategies << '\n';
    out << "max_strategies = " << max_strategies << '\n';
    out << "min_identified = " << fmt_double(min_identified) << '\n';
    out << "min_correlation = " << fmt_double(min_correlation) << '\n';
    out << "kl_factor = " << fmt_double(kl_factor) << '\n';
    out << "kl_fraction = " << fmt_double(kl_fraction) << '\n';
    out << "min_mixture_fraction = " << fmt_double(min_mixture_fraction) << '\n';
    return out.str();
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string ExperimentConfig::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize())));
    return buf;
}

LifelongConfig ExperimentConfig::lifelong() const {
    LifelongConfig cfg;
    cfg.alpha = alpha;
    cfg.epsilon = epsilon;
    cfg.epsilon_scale = epsilon_scale;
    cfg.joint_epochs = joint_epochs;
    cfg.reward_lr = reward_lr;
    cfg.bcd_weight = bcd_weight;
    cfg.airl.iterations = airl_iterations;
    cfg.airl.disc_steps_per_iter = airl_disc_steps;
    cfg.airl.disc_lr = airl_disc_lr;
    cfg.airl.reward_hidden = reward_hidden;
    cfg.airl.policy_hidden = policy_hidden;
    cfg.airl.ppo.rollouts_per_iter = ppo_rollouts;
    cfg.airl.ppo.epochs_per_batch = ppo_epochs;
    cfg.airl.ppo.clip = ppo_clip;
    cfg.airl.ppo.gae_lambda = ppo_gae_lambda;
    cfg.airl.ppo.policy_lr = ppo_policy_lr;
    cfg.airl.ppo.value_lr = ppo_value_lr;
    cfg.search.budget = search_budget;
    cfg.search.n_rollouts = search_rollouts;
    cfg.search.k = knn_k;
    cfg.search.sigma = mixture_sigma;
    cfg.joint_ppo = cfg.airl.ppo;
    cfg.joint_ppo.rollouts_per_iter = joint_ppo_rollouts;
    cfg.joint_ppo.epochs_per_batch = joint_ppo_epochs;
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::map<std::string, bool> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        if (seen[key])
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
        seen[key] = true;

        if (key == "env") cfg.env = value;
        else if (key == "horizon") cfg.horizon = parse_uint(key, value);
        else if (key == "seed") cfg.seed = parse_uint(key, value);
        else if (key == "alpha") cfg.alpha = parse_double(key, value);
        else if (key == "epsilon") cfg.epsilon = parse_double(key, value);
        else if (key == "epsilon_scale") cfg.epsilon_scale = parse_double(key, value);
        else if (key == "joint_epochs") cfg.joint_epochs = parse_uint(key, value);
        else if (key == "reward_lr") cfg.reward_lr = parse_double(key, value);
        else if (key == "bcd_weight") cfg.bcd_weight = parse_double(key, value);
        else if (key == "airl_iterations") cfg.airl_iterations = parse_uint(key, value);
        else if (key == "airl_disc_steps") cfg.airl_disc_steps = parse_uint(key, value);
        else if (key == "airl_disc_lr") cfg.airl_disc_lr = parse_double(key, value);
        else if (key == "reward_hidden") cfg.reward_hidden = parse_size_list(key, value);
        else if (key == "policy_hidden") cfg.policy_hidden = parse_size_list(key, value);
        else if (key == "ppo_rollouts") cfg.ppo_rollouts = parse_uint(key, value);
        else if (key == "ppo_epochs") cfg.ppo_epochs = parse_uint(key, value);
        else if (key == "ppo_clip") cfg.ppo_clip = parse_double(key, value);
        else if (key == "ppo_gae_lambda") cfg.ppo_gae_lambda = parse_double(key, value);
        else if (key == "ppo_policy_lr") cfg.ppo_policy_lr = parse_double(key, value);
        else if (key == "ppo_value_lr") cfg.ppo_value_lr = parse_double(key, value);
        else if (key == "joint_ppo_rollouts") cfg.joint_ppo_rollouts = parse_uint(key, value);
        else if (key == "joint_ppo_epochs") cfg.joint_ppo_epochs = parse_uint(key, value);
        else if (key == "search_budget") cfg.search_budget = parse_uint(key, value);
        else if (key == "search_rollouts") cfg.search_rollouts = parse_uint(key, value);
        else if (key == "knn_k") cfg.knn_k = parse_uint(key, value);
        else if (key == "mixture_sigma") cfg.mixture_sigma = parse_double(key, value);
        else if (key == "demo_strategies") cfg.demo_strategies = split(value, ',');
        else if (key == "demos_per_strategy") cfg.demos_per_strategy = parse_uint(key, value);
        else if (key == "mixture_demos") cfg.mixture_demos = parse_uint(key, value);
        else if (key == "mixture_specs") {
            cfg.mixture_specs.clear();
            for (const std::string& entry : split(value, '|')) {
                Vec w;
                std::istringstream ws(entry);
                std::string tok;
                while (ws >> tok) w.push_back(parse_double(key, tok));
                if (w.empty()) throw ConfigError("config: empty mixture_specs entry");
                cfg.mixture_specs.push_back(std::move(w));
            }
        }
        else if (key == "arrival_order") cfg.arrival_order = value;
        else if (key == "eval_rollouts") cfg.eval_rollouts = parse_uint(key, value);
        else if (key == "test_policies") cfg.test_policies = parse_uint(key, value);
        else if (key == "test_snapshots") cfg.test_snapshots = parse_uint(key, value);
        else if (key == "test_per_snapshot") cfg.test_per_snapshot = parse_uint(key, value);
        else if (key == "min_strategies") cfg.min_strategies = parse_uint(key, value);
        else if (key == "max_strategies") cfg.max_strategies = parse_uint(key, value);
        else if (key == "min_identified") cfg.min_identified = parse_double(key, value);
        else if (key == "min_correlation") cfg.min_correlation = parse_double(key, value);
        else if (key == "kl_factor") cfg.kl_factor = parse_double(key, value);
        else if (key == "kl_fraction") cfg.kl_fraction = parse_double(key, value);
        else if (key == "min_mixture_fraction")
            cfg.min_mixture_fraction = parse_double(key, value);
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    if (is_preset(path)) return parse_config(preset_text(path));
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

bool is_preset(const std::string& name) {
    return name == "benchmark-pendulum" || name == "benchmark-lander" || name == "lifelong-desk";
}

std::string preset_text(const std::string& name) {
    if (name == "benchmark-pendulum")
        return R"(# three scripted strategies, two demos each, then two executed
# 50/50 mixtures arriving last
env = pendulum-lite
seed = 7
demo_strategies = hold-center, hold-left, hold-right
demos_per_strategy = 2
mixture_specs = 0.5 0.5 0 | 0.5 0 0.5
min_strategies = 3
max_strategies = 4
min_identified = 1.0
min_correlation = 0.6
kl_factor = 1.5
kl_fraction = 0.75
min_mixture_fraction = 0.5
)";
    if (name == "benchmark-lander")
        return R"(env = lander-lite
seed = 11
demo_strategies = steep-descent, left-arc, right-arc
demos_per_strategy = 2
mixture_specs = 0.5 0.5 0 | 0.5 0 0.5
min_strategies = 2
max_strategies = 4
min_correlation = 0.3
)";
    if (name == "lifelong-desk")
        return R"(# three base demos first, then seventeen random-weight mixtures
env = pendulum-lite
seed = 19
demo_strategies = hold-center, hold-left, hold-right
demos_per_strategy = 1
mixture_demos = 17
max_strategies = 6
min_identified = 1.0
min_mixture_fraction = 0.6
)";
    throw ConfigError("unknown preset: " + name);
}

}  // namespace dmsrd
