#include "evocaf/acqopt.hpp"
#include "evocaf/acquisition.hpp"
#include "evocaf/afdsl.hpp"
#include "evocaf/bench.hpp"
#include "evocaf/bo.hpp"
#include "evocaf/errors.hpp"
#include "evocaf/evolve.hpp"
#include "evocaf/gp.hpp"
#include "evocaf/llm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace evocaf;

namespace {

// Context plus owned models, so Python holds one self-contained object.
struct BoundContext {
    gp::GpModel obj_model;
    gp::GpModel cost_model;
    acquisition::AfContext ctx;
};

std::shared_ptr<BoundContext> make_py_context(const Eigen::MatrixXd& train_x,
                                           const Eigen::VectorXd& train_y,
                                           const Eigen::VectorXd& train_cost,
                                           double budget_used, double budget_total,
                                           double budget_init, const gp::GpConfig& config) {
    auto out = std::make_shared<BoundContext>();
    out->obj_model = gp::fit(train_x, train_y, config);
    out->cost_model = gp::fit(train_x, train_cost, config);
    out->ctx = acquisition::make_context(train_x, train_y, out->obj_model, out->cost_model,
                                         budget_used, budget_total, budget_init);
    return out;
}

py::dict record_to_dict(const bo::RunRecord& rec) {
    py::dict d;
    py::list history;
    for (const auto& step : rec.history) {
        py::dict s;
        s["x"] = step.x;
        s["y"] = step.y;
        s["z"] = step.z;
        s["cum_budget"] = step.cum_budget;
        s["wall_ms"] = step.wall_ms;
        history.append(std::move(s));
    }
    d["history"] = std::move(history);
    d["T"] = rec.T;
    d["best_y"] = rec.best_y;
    d["gap"] = rec.optimal_gap ? py::cast(*rec.optimal_gap) : py::none();
    d["seed"] = rec.seed;
    d["status"] = rec.status == bo::RunStatus::ok
                      ? "ok"
                      : rec.status == bo::RunStatus::failed ? "failed" : "timed_out";
    return d;
}

bo::Problem make_problem(const bench::BenchmarkInstance& inst) {
    bo::Problem problem;
    problem.objective = [inst](const Eigen::VectorXd& x) { return bench::eval_objective(inst, x); };
    problem.cost = [inst](const Eigen::VectorXd& x) { return bench::eval_cost(inst, x); };
    problem.lo = inst.lo;
    problem.hi = inst.hi;
    problem.f_star = inst.f_star;
    problem.x_star = bench::from_unit(inst, inst.x_star_unit);
    return problem;
}

} // namespace

PYBIND11_MODULE(_evocaf, m) {
    m.doc() = "cost-aware Bayesian optimization core";

    py::register_exception<Error>(m, "EvocafError");

    // bench
    py::class_<bench::BenchmarkInstance>(m, "BenchmarkInstance")
        .def_readonly("name", &bench::BenchmarkInstance::name)
        .def_readonly("dim", &bench::BenchmarkInstance::dim)
        .def_readonly("lo", &bench::BenchmarkInstance::lo)
        .def_readonly("hi", &bench::BenchmarkInstance::hi)
        .def_readonly("x_star_unit", &bench::BenchmarkInstance::x_star_unit)
        .def_readonly("f_star", &bench::BenchmarkInstance::f_star)
        .def_readonly("seed", &bench::BenchmarkInstance::seed);
    m.def("supported_benchmarks", [] { return bench::supported_names(); });
    m.def("make_instance", &bench::make_instance, py::arg("name"), py::arg("seed") = 0);
    m.def("eval_objective", &bench::eval_objective);
    m.def("eval_cost", &bench::eval_cost);

    // gp
    py::class_<gp::GpConfig>(m, "GpConfig")
        .def(py::init<>())
        .def_readwrite("noise_floor", &gp::GpConfig::noise_floor)
        .def_readwrite("standardize_outputs", &gp::GpConfig::standardize_outputs)
        .def_readwrite("normalize_inputs", &gp::GpConfig::normalize_inputs)
        .def_readwrite("hyperopt_restarts", &gp::GpConfig::hyperopt_restarts)
        .def_readwrite("hyperopt_max_iters", &gp::GpConfig::hyperopt_max_iters)
        .def_readwrite("map_priors", &gp::GpConfig::map_priors)
        .def_readwrite("optimize_noise", &gp::GpConfig::optimize_noise);
    py::class_<gp::GpModel>(m, "GpModel")
        .def_property_readonly("lengthscales",
                               [](const gp::GpModel& model) {
                                   return model.kernel_params.lengthscales;
                               })
        .def_property_readonly("signal_var",
                               [](const gp::GpModel& model) {
                                   return model.kernel_params.signal_var;
                               })
        .def_readonly("noise_var", &gp::GpModel::noise_var);
    m.def("gp_fit", &gp::fit, py::arg("X"), py::arg("y"), py::arg("config") = gp::GpConfig{});
    m.def("gp_predict", [](const gp::GpModel& model, const Eigen::MatrixXd& Xq) {
        const gp::Posterior post = gp::predict(model, Xq);
        return py::make_tuple(post.mean, post.var);
    });
    m.def("gp_log_marginal_likelihood", &gp::log_marginal_likelihood);

    // acquisition context + built-in AFs
    py::class_<BoundContext, std::shared_ptr<BoundContext>>(m, "AfContext")
        .def_property_readonly("best_y", [](const BoundContext& c) { return c.ctx.best_y; })
        .def_property_readonly("budget_used",
                               [](const BoundContext& c) { return c.ctx.budget_used; })
        .def_property_readonly("budget_total",
                               [](const BoundContext& c) { return c.ctx.budget_total; });
    m.def("make_context", &make_py_context, py::arg("train_x"), py::arg("train_y"),
          py::arg("train_cost"), py::arg("budget_used"), py::arg("budget_total"),
          py::arg("budget_init"), py::arg("gp_config") = gp::GpConfig{});

    auto utility = [](const acquisition::BatchUtility& u) {
        return py::make_tuple(u.values, u.per_point_costs);
    };
    m.def("eval_ei", [utility](const BoundContext& c, const Eigen::MatrixXd& xq) {
        return utility(acquisition::eval_ei(c.ctx, xq));
    });
    m.def("eval_eipu", [utility](const BoundContext& c, const Eigen::MatrixXd& xq) {
        return utility(acquisition::eval_eipu(c.ctx, xq));
    });
    m.def("eval_eicool", [utility](const BoundContext& c, const Eigen::MatrixXd& xq) {
        return utility(acquisition::eval_eicool(c.ctx, xq));
    });
    m.def(
        "eval_evolcaf",
        [utility](const BoundContext& c, const Eigen::MatrixXd& xq, bool a1, bool a2, bool a3) {
            return utility(acquisition::eval_evolcaf(c.ctx, xq, {a1, a2, a3}));
        },
        py::arg("ctx"), py::arg("xq"), py::arg("use_alpha1") = true,
        py::arg("use_alpha2") = true, py::arg("use_alpha3") = true);

    // afdsl
    py::class_<afdsl::AfProgram>(m, "AfProgram")
        .def_readonly("description", &afdsl::AfProgram::description)
        .def_readonly("source", &afdsl::AfProgram::source)
        .def_readonly("node_count", &afdsl::AfProgram::node_count)
        .def_property_readonly("result_shape", [](const afdsl::AfProgram& p) {
            return afdsl::to_string(p.result_shape);
        });
    m.def("parse_program", [](const std::string& source) { return afdsl::parse(source); });
    m.def("print_program", [](const afdsl::AfProgram& p) { return afdsl::print(p); });
    m.def("grammar_ebnf", [] { return afdsl::grammar_ebnf(); });
    m.def("input_names", [] { return afdsl::input_names(); });
    m.def("validate_program", [](const afdsl::AfProgram& p) {
        const auto probe = afdsl::make_probe_context();
        const afdsl::ValidationReport report = afdsl::validate(p, *probe);
        return py::make_tuple(report.pass, report.reason);
    });
    m.def(
        "evaluate_program",
        [](const afdsl::AfProgram& p, const BoundContext& c, const Eigen::MatrixXd& xq) {
            const acquisition::BatchUtility u = afdsl::evaluate(p, c.ctx, xq, {});
            return py::make_tuple(u.values, u.per_point_costs);
        },
        py::arg("program"), py::arg("ctx"), py::arg("xq"));

    // acqopt
    m.def(
        "maximize_af",
        [](const BoundContext& c, const std::string& af_spec, int n_raw, int n_restarts,
           std::uint64_t seed) {
            const bo::AfChoice af = bo::AfChoice::parse_spec(af_spec);
            acqopt::AcqOptConfig config;
            config.n_raw = n_raw;
            config.n_restarts = n_restarts;
            config.rng_seed = seed;
            const acqopt::MaximizeResult res = acqopt::maximize(af.callable(), c.ctx, config);
            return py::make_tuple(res.x, res.utility);
        },
        py::arg("ctx"), py::arg("af") = "ei", py::arg("n_raw") = 100,
        py::arg("n_restarts") = 20, py::arg("seed") = 0);

    // bo
    m.def("init_design", &bo::init_design, py::arg("lo"), py::arg("hi"), py::arg("n"),
          py::arg("seed"));
    m.def(
        "run_benchmark",
        [](const std::string& instance, const std::string& af_spec, double b_total,
           std::uint64_t seed) {
            const bench::BenchmarkInstance inst = bench::make_instance(instance, seed);
            const bo::AfChoice af = bo::AfChoice::parse_spec(af_spec);
            return record_to_dict(bo::run(make_problem(inst), af, b_total, seed));
        },
        py::arg("instance"), py::arg("af") = "evolcaf", py::arg("b_total") = 30.0,
        py::arg("seed") = 0);

    // llm + evolve (mock-provider path)
    m.def("extract_program", [](const std::string& text) {
        const auto [description, source] = llm::extract_program(text);
        return py::make_tuple(description, source);
    });
    m.def(
        "evolve_with_mock",
        [](const std::map<std::string, std::vector<std::string>>& script, int pop_size,
           int generations, const std::vector<std::string>& instances, double b_total,
           int seeds_per_instance, std::uint64_t seed, double time_threshold_s,
           const std::string& run_dir) {
            auto provider = llm::make_mock_provider(script);
            evolve::EvolveConfig config;
            config.pop_size = pop_size;
            config.generations = generations;
            config.rng_seed = seed;
            config.time_threshold_s = time_threshold_s;
            config.run_dir = run_dir;
            config.fitness_instances.clear();
            for (const auto& name : instances) {
                evolve::FitnessInstance fi;
                fi.bench_name = name;
                fi.b_total = b_total;
                for (int s = 1; s <= seeds_per_instance; ++s)
                    fi.seeds.push_back(static_cast<std::uint64_t>(s));
                config.fitness_instances.push_back(std::move(fi));
            }
            const evolve::EvolveResult result = evolve::evolve(config, *provider);
            py::dict d;
            d["best_source"] = result.best.program.source;
            d["best_fitness"] = result.best.fitness;
            py::list trace;
            for (const auto& row : result.trace)
                trace.append(py::make_tuple(row.generation, row.best, row.mean));
            d["trace"] = std::move(trace);
            return d;
        },
        py::arg("script"), py::arg("pop_size") = 4, py::arg("generations") = 3,
        py::arg("instances") = std::vector<std::string>{"ackley2"}, py::arg("b_total") = 8.0,
        py::arg("seeds_per_instance") = 1, py::arg("seed") = 0,
        py::arg("time_threshold_s") = 60.0, py::arg("run_dir") = std::string{});
}
