#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmsrd/config.hpp"
#include "dmsrd/demogen.hpp"
#include "dmsrd/evalkit.hpp"
#include "dmsrd/lifelong.hpp"

namespace py = pybind11;
using namespace dmsrd;

namespace {

std::vector<Demonstration> make_demos(const Environment& env,
                                      const std::vector<std::string>& strategy_ids,
                                      std::size_t per_strategy, std::uint64_t seed) {
    std::vector<ScriptedStrategy> bases;
    for (const std::string& id : strategy_ids) bases.push_back(find_strategy(env.spec().id, id));
    RandomStream rng(seed);
    return generate_demo_set(env, bases, per_strategy, rng);
}

Demonstration make_mixture_demo(const Environment& env,
                                const std::vector<std::string>& strategy_ids, const Vec& weights,
                                std::size_t arrival_index, std::uint64_t seed) {
    std::vector<ScriptedStrategy> bases;
    for (const std::string& id : strategy_ids) bases.push_back(find_strategy(env.spec().id, id));
    RandomStream rng(seed);
    return generate_weighted_demo(env, bases, weights, arrival_index, rng);
}

py::dict decision_to_dict(const DecisionRecord& d) {
    py::dict out;
    out["arrival_index"] = d.arrival_index;
    out["branch"] = d.branch;
    out["kl_mix"] = d.kl_mix;
    out["kl_new"] = d.kl_new;
    out["epsilon"] = d.epsilon;
    out["weights"] = d.weights;
    return out;
}

}  // namespace

PYBIND11_MODULE(_dmsrd, m) {
    m.doc() = "lifelong multi-strategy reward distillation core";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<ContractError>(m, "ContractError");
    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<TrainingError>(m, "TrainingError");
    py::register_exception<IntegrityError>(m, "IntegrityError");

    py::class_<EnvSpec>(m, "EnvSpec")
        .def_readonly("id", &EnvSpec::id)
        .def_readonly("state_dim", &EnvSpec::state_dim)
        .def_readonly("action_dim", &EnvSpec::action_dim)
        .def_readonly("horizon", &EnvSpec::horizon)
        .def_readonly("gamma", &EnvSpec::gamma);

    py::class_<Environment>(m, "Environment")
        .def_property_readonly("spec", &Environment::spec,
                               py::return_value_policy::reference_internal);
    m.def("make_env", &make_env, py::arg("id"), py::arg("horizon") = 0);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("states", &Trajectory::states)
        .def_readonly("actions", &Trajectory::actions)
        .def_readonly("env_rewards", &Trajectory::env_rewards)
        .def_readonly("gamma", &Trajectory::gamma)
        .def("steps", &Trajectory::steps);
    m.def("env_return", &env_return);

    py::class_<Demonstration>(m, "Demonstration")
        .def_readonly("trajectory", &Demonstration::trajectory)
        .def_readonly("arrival_index", &Demonstration::arrival_index)
        .def_readonly("true_mixture_weights", &Demonstration::true_mixture_weights)
        .def_property_readonly("true_strategy_label", [](const Demonstration& d) -> py::object {
            if (d.true_strategy_label) return py::int_(*d.true_strategy_label);
            return py::none();
        });

    m.def("builtin_strategy_ids", [](const std::string& env_id) {
        std::vector<std::string> out;
        for (const ScriptedStrategy& s : builtin_strategies(env_id)) out.push_back(s.id);
        return out;
    });
    m.def("generate_demos", &make_demos, py::arg("env"), py::arg("strategy_ids"),
          py::arg("per_strategy"), py::arg("seed"));
    m.def("generate_mixture_demo", &make_mixture_demo, py::arg("env"), py::arg("strategy_ids"),
          py::arg("weights"), py::arg("arrival_index"), py::arg("seed"));
    m.def("save_demo_set", &save_demo_set, py::arg("demos"), py::arg("env_id"), py::arg("seed"),
          py::arg("dir"));
    m.def("load_demo_set", [](const std::string& dir) {
        std::string env_id;
        std::uint64_t seed = 0;
        auto demos = load_demo_set(dir, &env_id, &seed);
        return py::make_tuple(demos, env_id, seed);
    });

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readonly("env", &ExperimentConfig::env)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def("serialize", &ExperimentConfig::serialize)
        .def("hash", &ExperimentConfig::hash);
    m.def("load_config", &load_config, "load a config file or preset name");
    m.def("parse_config", &parse_config);
    m.def("is_preset", &is_preset);
    m.def("fnv1a64", &fnv1a64);

    py::class_<Registry>(m, "Registry")
        .def_static("create",
                    [](const Environment& env, const ExperimentConfig& cfg, std::uint64_t seed) {
                        RandomStream rng(seed);
                        return Registry::create(env, cfg.lifelong(), rng);
                    },
                    py::arg("env"), py::arg("config"), py::arg("seed"))
        .def_property_readonly("strategy_count", &Registry::strategy_count)
        .def_property_readonly("epsilon", &Registry::epsilon)
        .def_property_readonly("strategy_count_history", &Registry::strategy_count_history)
        .def("process_demonstration",
             [](Registry& r, const Demonstration& demo, const Environment& env,
                std::uint64_t seed) {
                 RandomStream rng(seed);
                 return decision_to_dict(r.process_demonstration(demo, env, rng));
             },
             py::arg("demo"), py::arg("env"), py::arg("seed"))
        .def("explain",
             [](const Registry& r, std::size_t arrival_index) {
                 auto [weights, decision] = r.explain(arrival_index);
                 return py::make_tuple(weights, decision_to_dict(decision));
             })
        .def("decision_log", [](const Registry& r) {
            py::list out;
            for (const DecisionRecord& d : r.decision_log()) out.append(decision_to_dict(d));
            return out;
        });
    m.def("save_registry", &save_registry);
    m.def("load_registry",
          [](const std::string& dir, const Environment& env,
             const std::vector<Demonstration>& demos, const ExperimentConfig& cfg) {
              return load_registry(dir, env, demos, cfg.lifelong());
          });

    m.def("knn_kl_estimate", &knn_kl_estimate, py::arg("sample_p"), py::arg("sample_q"),
          py::arg("k") = 4);
    m.def("pearson_correlation", &pearson_correlation);
    m.def("fisher_z_test", [](double r1, std::size_t n1, double r2, std::size_t n2) {
        FisherZResult res = fisher_z_test(r1, n1, r2, n2);
        return py::make_tuple(res.z, res.p);
    });
    m.def("strategies_identified", &strategies_identified);
    m.def("policy_metrics",
          [](const Registry& registry, const std::vector<Demonstration>& demos,
             const Environment& env, std::size_t n_eval_rollouts, std::uint64_t seed) {
              RandomStream rng(seed);
              py::list out;
              for (const PolicyMetricsRow& row :
                   policy_metrics(registry, demos, env, n_eval_rollouts, rng)) {
                  py::dict d;
                  d["arrival_index"] = row.arrival_index;
                  d["branch"] = row.branch;
                  d["env_return"] = row.env_return;
                  d["log_likelihood"] = row.log_likelihood;
                  d["kl"] = row.kl;
                  out.append(d);
              }
              return out;
          },
          py::arg("registry"), py::arg("demos"), py::arg("env"), py::arg("n_eval_rollouts"),
          py::arg("seed"));
}
