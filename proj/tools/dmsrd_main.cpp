#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmsrd/config.hpp"
#include "dmsrd/demogen.hpp"
#include "dmsrd/evalkit.hpp"
#include "dmsrd/lifelong.hpp"

namespace fs = std::filesystem;
using namespace dmsrd;

namespace {

struct CommonArgs {
    std::string config;
    std::uint64_t seed = 0;  // 0 = keep config seed
    std::string out;
    std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config) {
    cmd->add_option("--config", args.config, "config file path or preset name")
        ->required(need_config);
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out, "output directory")->required();
    // rollouts are sequential in this build; the flag caps future
    // parallelism and must still be a sane value
    cmd->add_option("--workers", args.workers, "max parallel rollouts")->check(CLI::Range(1, 64));
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config);
    if (args.seed != 0) cfg.seed = args.seed;
    return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IntegrityError("cannot write " + path.string());
        f << text;
    }
    fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IntegrityError("cannot read " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void stamp_config(const ExperimentConfig& cfg, const fs::path& dir) {
    write_text_file(dir / "config.txt", cfg.serialize());
    write_text_file(dir / "config_hash.txt", cfg.hash() + "\n");
}

std::string read_hash(const fs::path& dir) {
    std::string h = read_text_file(dir / "config_hash.txt");
    while (!h.empty() && (h.back() == '\n' || h.back() == '\r')) h.pop_back();
    return h;
}

std::vector<Demonstration> build_demos(const ExperimentConfig& cfg, const Environment& env) {
    std::vector<ScriptedStrategy> bases;
    for (const std::string& id : cfg.demo_strategies) bases.push_back(find_strategy(cfg.env, id));
    RandomStream rng = RandomStream(cfg.seed).spawn(0xD);
    ArrivalOrder order =
        cfg.arrival_order == "shuffled" ? ArrivalOrder::Shuffled : ArrivalOrder::Sequential;
    std::vector<Demonstration> demos =
        generate_demo_set(env, bases, cfg.demos_per_strategy, rng, order);
    for (const Vec& w : cfg.mixture_specs) {
        RandomStream stream = rng.spawn(demos.size());
        demos.push_back(generate_weighted_demo(env, bases, w, demos.size() + 1, stream));
    }
    for (std::size_t k = 0; k < cfg.mixture_demos; ++k) {
        Vec w = sample_simplex(bases.size(), rng);
        RandomStream stream = rng.spawn(demos.size());
        demos.push_back(generate_weighted_demo(env, bases, w, demos.size() + 1, stream));
    }
    return demos;
}

int cmd_demogen(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    std::unique_ptr<Environment> env = make_env(cfg.env, cfg.horizon);
    std::vector<Demonstration> demos = build_demos(cfg, *env);

    fs::path tmp = fs::path(args.out + ".tmp");
    fs::remove_all(tmp);
    save_demo_set(demos, cfg.env, cfg.seed, tmp.string());
    stamp_config(cfg, tmp);
    fs::remove_all(args.out);
    fs::rename(tmp, args.out);
    std::cout << "demogen: wrote " << demos.size() << " demos to " << args.out << "\n";
    return 0;
}

void write_decision_log(const Registry& registry, const fs::path& out_dir) {
    std::ostringstream log;
    log.precision(17);
    for (const DecisionRecord& d : registry.decision_log()) {
        log << d.arrival_index << ' ' << d.branch << " kl_mix=" << d.kl_mix
            << " kl_new=" << d.kl_new << " eps=" << d.epsilon << " w=";
        for (std::size_t j = 0; j < d.weights.size(); ++j)
            log << (j ? "," : "") << d.weights[j];
        log << '\n';
    }
    write_text_file(out_dir / "decision_log.txt", log.str());
}

int cmd_run(const CommonArgs& args, const std::string& demos_dir, bool resume) {
    ExperimentConfig cfg = resolve_config(args);
    if (read_hash(demos_dir) != cfg.hash())
        throw IntegrityError("run: demo set was generated with a different config: " + demos_dir);
    std::string env_id;
    std::vector<Demonstration> demos = load_demo_set(demos_dir, &env_id);
    if (env_id != cfg.env) throw IntegrityError("run: demo set env mismatch: " + env_id);
    std::unique_ptr<Environment> env = make_env(cfg.env, cfg.horizon);

    fs::create_directories(args.out);
    fs::create_directories(fs::path(args.out) / "checkpoints");
    stamp_config(cfg, args.out);

    fs::path registry_dir = fs::path(args.out) / "registry";
    Registry registry = [&] {
        if (resume && fs::exists(registry_dir / "manifest.json")) {
            Registry r = load_registry(registry_dir.string(), *env, demos, cfg.lifelong());
            std::cout << "run: resuming after " << r.demonstrations().size()
                      << " ingested demos\n";
            return r;
        }
        RandomStream create_rng = RandomStream(cfg.seed).spawn(0);
        return Registry::create(*env, cfg.lifelong(), create_rng);
    }();

    for (const Demonstration& d : demos) {
        bool done = false;
        for (const Demonstration& seen : registry.demonstrations())
            if (seen.arrival_index == d.arrival_index) done = true;
        if (done) continue;
        RandomStream ingest_rng = RandomStream(cfg.seed).spawn(d.arrival_index);
        DecisionRecord decision = registry.process_demonstration(d, *env, ingest_rng);
        std::cout << "run: demo " << d.arrival_index << " -> " << decision.branch
                  << " (M=" << registry.strategy_count() << ")\n";
        char name[32];
        std::snprintf(name, sizeof(name), "after_%04zu", d.arrival_index);
        save_registry(registry, (fs::path(args.out) / "checkpoints" / name).string());
        save_registry(registry, registry_dir.string());
        write_decision_log(registry, args.out);
    }
    std::cout << "run: done, " << registry.strategy_count() << " strategies\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& run_dir, const std::string& demos_dir) {
    ExperimentConfig cfg = resolve_config(args);
    if (read_hash(run_dir) != cfg.hash())
        throw IntegrityError("eval: run was produced with a different config: " + run_dir);
    if (read_hash(demos_dir) != cfg.hash())
        throw IntegrityError("eval: demo set was generated with a different config: " + demos_dir);

    std::string env_id;
    std::vector<Demonstration> demos = load_demo_set(demos_dir, &env_id);
    std::unique_ptr<Environment> env = make_env(cfg.env, cfg.horizon);
    Registry registry =
        load_registry((fs::path(run_dir) / "registry").string(), *env, demos, cfg.lifelong());
    if (registry.demonstrations().size() != demos.size())
        throw IntegrityError("eval: registry has not ingested the full demo set");

    EvalReport report;
    report.seed = cfg.seed;
    report.config_hash = cfg.hash();

    RandomStream rng = RandomStream(cfg.seed).spawn(0xE);
    report.rows = policy_metrics(registry, demos, *env, cfg.eval_rollouts, rng);

    std::size_t m = registry.strategy_count();
    if (m >= 2) {
        std::vector<const Trajectory*> pure;
        for (const StrategyRecord& s : registry.strategies())
            for (const Demonstration& d : registry.demonstrations())
                if (d.arrival_index == s.pure_demo_index) pure.push_back(&d.trajectory);
        std::vector<std::size_t> constant_cols;
        report.heatmap = strategy_heatmap(registry, pure, &constant_cols);
        for (std::size_t k : constant_cols)
            report.warnings.push_back("heatmap column " + std::to_string(k) +
                                      " is constant, normalized to zeros");
        report.identified = strategies_identified(report.heatmap);
    } else {
        report.identified = 1.0;
    }

    bool correlation_present =
        cfg.test_policies > 0 && cfg.test_snapshots > 0 && cfg.test_per_snapshot > 0;
    if (correlation_present) {
        RandomStream test_rng = RandomStream(cfg.seed).spawn(0xF);
        std::vector<Trajectory> test_set = build_test_set(*env, test_rng, cfg.test_policies,
                                                          cfg.test_snapshots, cfg.test_per_snapshot);
        StateRewardFn task = registry.task_reward().fn();
        for (const Trajectory& t : test_set)
            report.scatter.emplace_back(discounted_return(t, task, env->spec().gamma),
                                        env_return(t));
        report.pearson_r =
            task_reward_correlation(registry.task_reward(), test_set, env->spec().gamma);
    } else {
        report.warnings.push_back("no test set configured; correlation section absent");
    }

    // oracle self-KL comparison, driven by the demo set's ground-truth
    // metadata (evaluation-only)
    std::vector<ScriptedStrategy> bases;
    for (const std::string& id : cfg.demo_strategies) bases.push_back(find_strategy(cfg.env, id));
    std::size_t kl_checked = 0, kl_ok = 0;
    std::size_t mixtures_total = 0, mixtures_explained = 0;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const Demonstration& d = demos[i];
        std::unique_ptr<PolicyBase> oracle;
        bool is_mixture_demo = false;
        if (!d.true_mixture_weights.empty()) {
            std::size_t nonzero = 0;
            for (double w : d.true_mixture_weights)
                if (w > 0.0) ++nonzero;
            is_mixture_demo = nonzero > 1;
            oracle = std::make_unique<ScriptedMixturePolicy>(bases, d.true_mixture_weights,
                                                             env->spec());
        } else if (d.true_strategy_label) {
            oracle = std::make_unique<ScriptedPolicy>(bases.at(*d.true_strategy_label),
                                                      env->spec());
        }
        if (is_mixture_demo) {
            ++mixtures_total;
            const std::string& branch = registry.explain(d.arrival_index).second.branch;
            if (branch == "mixture-threshold" || branch == "mixture-vs-new") ++mixtures_explained;
        }
        if (oracle && cfg.kl_factor > 0.0) {
            RandomStream kl_rng = RandomStream(cfg.seed).spawn(0xAB00 + d.arrival_index);
            double self_kl = std::fabs(
                trajectory_kl(d.trajectory, *oracle, *env, cfg.eval_rollouts, kl_rng, cfg.knn_k));
            ++kl_checked;
            if (std::fabs(report.rows[i].kl) <= cfg.kl_factor * self_kl) ++kl_ok;
        }
    }

    // threshold verdicts
    std::vector<std::string> failures;
    if (m < cfg.min_strategies || m > cfg.max_strategies)
        failures.push_back("strategy count " + std::to_string(m) + " outside [" +
                           std::to_string(cfg.min_strategies) + ", " +
                           std::to_string(cfg.max_strategies) + "]");
    if (report.identified < cfg.min_identified)
        failures.push_back("strategies_identified below threshold");
    if (cfg.min_correlation > -1.0) {
        if (!correlation_present)
            failures.push_back("correlation required but test set absent");
        else if (report.pearson_r < cfg.min_correlation)
            failures.push_back("task-reward correlation below threshold");
    }
    if (cfg.kl_factor > 0.0 && kl_checked > 0 &&
        double(kl_ok) / double(kl_checked) < cfg.kl_fraction)
        failures.push_back("per-demo KL vs oracle self-KL below required fraction");
    if (cfg.min_mixture_fraction > 0.0) {
        double frac =
            mixtures_total == 0 ? 0.0 : double(mixtures_explained) / double(mixtures_total);
        if (frac < cfg.min_mixture_fraction)
            failures.push_back("too few mixture demos explained without a new strategy");
    }
    for (const std::string& msg : failures) report.warnings.push_back("THRESHOLD FAIL: " + msg);

    fs::path tmp = fs::path(args.out + ".tmp");
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    write_report_csv(report, (tmp / "report.csv").string());
    write_report_summary(report, (tmp / "summary.txt").string());
    write_report_svg(report, (tmp / "scatter.svg").string());
    {
        std::ostringstream extra;
        extra.precision(12);
        extra << "strategies: " << m << '\n';
        extra << "mixture_demos_explained: " << mixtures_explained << "/" << mixtures_total
              << '\n';
        if (kl_checked > 0)
            extra << "kl_vs_oracle_ok: " << kl_ok << "/" << kl_checked << '\n';
        extra << "thresholds: " << (failures.empty() ? "pass" : "FAIL") << '\n';
        for (const std::string& msg : failures) extra << "  " << msg << '\n';
        write_text_file(tmp / "verdict.txt", extra.str());
    }
    stamp_config(cfg, tmp);
    fs::remove_all(args.out);
    fs::rename(tmp, args.out);

    std::cout << read_text_file(fs::path(args.out) / "verdict.txt");
    return failures.empty() ? 0 : 1;
}

int cmd_report(const std::string& eval_dir) {
    fs::path dir(eval_dir);
    if (!fs::exists(dir / "summary.txt"))
        throw IntegrityError("report: no evaluation summary in " + eval_dir);
    std::cout << read_text_file(dir / "summary.txt");
    if (fs::exists(dir / "verdict.txt")) std::cout << read_text_file(dir / "verdict.txt");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dmsrd: lifelong multi-strategy reward distillation"};
    app.require_subcommand(1);

    CommonArgs demogen_args, run_args, eval_args;
    std::string run_demos, eval_run, eval_demos, report_dir;
    bool resume = false;

    CLI::App* sub_demogen = app.add_subcommand("demogen", "generate a demonstration set");
    add_common(sub_demogen, demogen_args, true);

    CLI::App* sub_run = app.add_subcommand("run", "ingest a demo set per Algorithm 1");
    add_common(sub_run, run_args, true);
    sub_run->add_option("--demos", run_demos, "demo set directory")->required();
    sub_run->add_flag("--resume", resume, "resume from the last completed ingestion");

    CLI::App* sub_eval = app.add_subcommand("eval", "evaluate a finished run");
    add_common(sub_eval, eval_args, true);
    sub_eval->add_option("--run", eval_run, "run output directory")->required();
    sub_eval->add_option("--demos", eval_demos, "demo set directory")->required();

    CLI::App* sub_report = app.add_subcommand("report", "print a saved evaluation report");
    sub_report->add_option("--out", report_dir, "evaluation output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sub_demogen->parsed()) return cmd_demogen(demogen_args);
        if (sub_run->parsed()) return cmd_run(run_args, run_demos, resume);
        if (sub_eval->parsed()) return cmd_eval(eval_args, eval_run, eval_demos);
        if (sub_report->parsed()) return cmd_report(report_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
