#include "evocaf/bo.hpp"

#include "evocaf/errors.hpp"
#include "evocaf/sampling.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

namespace evocaf::bo {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point since) {
    return std::chrono::duration<double>(Clock::now() - since).count();
}

} // namespace

AfChoice AfChoice::parse_spec(const std::string& text) {
    AfChoice c;
    if (text == "ei") {
        c.kind = Kind::ei;
    } else if (text == "eipu") {
        c.kind = Kind::eipu;
    } else if (text == "eicool") {
        c.kind = Kind::eicool;
    } else if (text == "evolcaf" || text.rfind("evolcaf:", 0) == 0) {
        c.kind = Kind::evolcaf;
        if (text.size() > 8) {
            const std::string mask = text.substr(8);
            if (mask.size() != 3 || mask.find_first_not_of("01") != std::string::npos)
                throw ConfigError("evolcaf component mask must be three binary digits, e.g. "
                                  "evolcaf:110");
            c.components.use_alpha1 = mask[0] == '1';
            c.components.use_alpha2 = mask[1] == '1';
            c.components.use_alpha3 = mask[2] == '1';
            if (!(c.components.use_alpha1 || c.components.use_alpha2 ||
                  c.components.use_alpha3))
                throw ConfigError("evolcaf mask must enable at least one component");
        }
    } else if (text.rfind("dsl:", 0) == 0) {
        const std::string path = text.substr(4);
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open DSL program: " + path);
        std::string source((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        c.kind = Kind::dsl;
        c.program = std::make_shared<const afdsl::AfProgram>(afdsl::parse(source));
    } else {
        throw ConfigError("unknown acquisition spec: " + text);
    }
    return c;
}

std::string AfChoice::label() const {
    switch (kind) {
        case Kind::ei: return "ei";
        case Kind::eipu: return "eipu";
        case Kind::eicool: return "eicool";
        case Kind::evolcaf: {
            if (components.use_alpha1 && components.use_alpha2 && components.use_alpha3)
                return "evolcaf";
            std::string mask;
            mask += components.use_alpha1 ? '1' : '0';
            mask += components.use_alpha2 ? '1' : '0';
            mask += components.use_alpha3 ? '1' : '0';
            return "evolcaf:" + mask;
        }
        case Kind::dsl: return "dsl";
    }
    return "?";
}

acquisition::AcquisitionFn AfChoice::callable() const {
    switch (kind) {
        case Kind::ei: return &acquisition::ei_values;
        case Kind::eipu: return &acquisition::eipu_values;
        case Kind::eicool: return &acquisition::eicool_values;
        case Kind::evolcaf: {
            const acquisition::EvolcafComponents comp = components;
            return [comp](const acquisition::AfContext& ctx, const acquisition::AfInputs& in) {
                return acquisition::evolcaf_values(ctx, in, comp);
            };
        }
        case Kind::dsl: {
            const auto prog = program;
            const afdsl::EvalLimits lim = limits;
            if (!prog) throw ConfigError("dsl acquisition has no program");
            return [prog, lim](const acquisition::AfContext& ctx,
                               const acquisition::AfInputs& in) {
                return afdsl::evaluate_with_inputs(*prog, ctx, in, lim);
            };
        }
    }
    throw ConfigError("bad acquisition kind");
}

Eigen::MatrixXd init_design(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                            std::uint64_t seed) {
    const int d = static_cast<int>(lo.size());
    Eigen::MatrixXd unit = sampling::latin_hypercube(n, d, seed);
    for (int i = 0; i < n; ++i)
        unit.row(i) = (lo.array() + unit.row(i).transpose().array() * (hi - lo).array())
                          .transpose();
    return unit;
}

RunRecord run(const Problem& problem, const AfChoice& af, double b_total, std::uint64_t seed,
              const RunOptions& options) {
    const auto t_start = Clock::now();
    const Eigen::Index d = problem.lo.size();
    RunRecord rec;
    rec.seed = seed;

    std::mt19937_64 noise_rng(sampling::split_seed(seed, 2));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto observe = [&](const Eigen::VectorXd& x) {
        double y = problem.objective(x);
        double z = problem.cost(x);
        if (problem.obj_noise_sd > 0.0) y += problem.obj_noise_sd * gauss(noise_rng);
        if (problem.cost_noise_sd > 0.0) z += problem.cost_noise_sd * gauss(noise_rng);
        return std::make_pair(y, std::max(z, 1e-12));
    };

    rec.ledger.total = b_total;
    auto record_step = [&](const Eigen::VectorXd& x, double y, double z,
                           Clock::time_point step_start) {
        rec.ledger.used += z;
        EvalStep step;
        step.x = x;
        step.y = y;
        step.z = z;
        step.cum_budget = rec.ledger.used;
        step.wall_ms = elapsed_s(step_start) * 1e3;
        rec.history.push_back(std::move(step));
    };

    // Initial design: 2d points.
    const int n0 = static_cast<int>(2 * d);
    const Eigen::MatrixXd X0 = init_design(problem.lo, problem.hi, n0, seed);
    Eigen::MatrixXd X_unit(n0, d);
    std::vector<double> ys, zs;
    for (int i = 0; i < n0; ++i) {
        const auto step_start = Clock::now();
        const Eigen::VectorXd x = X0.row(i).transpose();
        const auto [y, z] = observe(x);
        record_step(x, y, z, step_start);
        ys.push_back(y);
        zs.push_back(z);
        X_unit.row(i) = ((x - problem.lo).array() / (problem.hi - problem.lo).array())
                            .transpose();
    }
    rec.ledger.init = rec.ledger.used;

    const acquisition::AcquisitionFn af_fn = af.callable();

    int iteration = 0;
    while (rec.ledger.used < b_total) {
        if (elapsed_s(t_start) > options.wall_clock_limit_s) {
            rec.status = RunStatus::timed_out;
            break;
        }
        const auto step_start = Clock::now();
        const Eigen::Map<const Eigen::VectorXd> y_vec(ys.data(),
                                                      static_cast<Eigen::Index>(ys.size()));
        const Eigen::Map<const Eigen::VectorXd> z_vec(zs.data(),
                                                      static_cast<Eigen::Index>(zs.size()));
        Eigen::VectorXd x_unit;
        try {
            const gp::GpModel obj_model = gp::fit(X_unit, y_vec, options.gp_config);
            const gp::GpModel cost_model = gp::fit(X_unit, z_vec, options.gp_config);
            const acquisition::AfContext ctx =
                acquisition::make_context(X_unit, y_vec, obj_model, cost_model,
                                          rec.ledger.used, rec.ledger.total, rec.ledger.init);
            acqopt::AcqOptConfig acq = options.acq;
            acq.rng_seed = sampling::split_seed(seed, 1000 + static_cast<std::uint64_t>(iteration));
            const acqopt::MaximizeResult next = acqopt::maximize(af_fn, ctx, acq);
            x_unit = next.x;
        } catch (const Error&) {
            rec.status = RunStatus::failed;
            break;
        }

        const Eigen::VectorXd x =
            problem.lo.array() + x_unit.array() * (problem.hi - problem.lo).array();
        const auto [y, z] = observe(x);
        record_step(x, y, z, step_start);
        ys.push_back(y);
        zs.push_back(z);
        X_unit.conservativeResize(X_unit.rows() + 1, Eigen::NoChange);
        X_unit.row(X_unit.rows() - 1) = x_unit.transpose();
        ++iteration;
    }

    rec.T = static_cast<int>(rec.history.size());
    for (const auto& step : rec.history) rec.best_y = std::max(rec.best_y, step.y);
    if (problem.f_star) rec.optimal_gap = *problem.f_star - rec.best_y;
    return rec;
}

double optimal_gap(const RunRecord& record, double f_star) {
    if (record.history.empty()) throw InvalidData("empty run record");
    return f_star - record.best_y;
}

void write_history_jsonl(const RunRecord& record, std::ostream& os) {
    for (const auto& step : record.history) {
        json j;
        j["x"] = std::vector<double>(step.x.data(), step.x.data() + step.x.size());
        j["y"] = step.y;
        j["z"] = step.z;
        j["cum_budget"] = step.cum_budget;
        j["wall_ms"] = step.wall_ms;
        os << j.dump() << '\n';
    }
}

void write_summary_json(const RunRecord& record, std::ostream& os) {
    json j;
    j["T"] = record.T;
    j["best_y"] = record.best_y;
    if (record.optimal_gap)
        j["gap"] = *record.optimal_gap;
    else
        j["gap"] = nullptr;
    j["seed"] = record.seed;
    j["status"] = record.status == RunStatus::ok
                      ? "ok"
                      : record.status == RunStatus::failed ? "failed" : "timed_out";
    os << j.dump() << '\n';
}

} // namespace evocaf::bo
