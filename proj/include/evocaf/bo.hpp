#pragma once

#include "evocaf/acqopt.hpp"
#include "evocaf/acquisition.hpp"
#include "evocaf/afdsl.hpp"
#include "evocaf/gp.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evocaf::bo {

// Black-box problem in maximization convention with strictly positive
// evaluation costs. Observation noises default to zero.
struct Problem {
    std::function<double(const Eigen::VectorXd&)> objective;
    std::function<double(const Eigen::VectorXd&)> cost;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::optional<double> f_star;          // true optimum value, for gap reporting
    std::optional<Eigen::VectorXd> x_star; // true optimizer, raw coordinates
    double obj_noise_sd = 0.0;
    double cost_noise_sd = 0.0;
};

// Which acquisition drives the loop.
struct AfChoice {
    enum class Kind { ei, eipu, eicool, evolcaf, dsl };
    Kind kind = Kind::ei;
    acquisition::EvolcafComponents components{}; // evolcaf only
    std::shared_ptr<const afdsl::AfProgram> program; // dsl only
    afdsl::EvalLimits limits{};

    // "ei" | "eipu" | "eicool" | "evolcaf" | "evolcaf:110" | "dsl:<path>"
    static AfChoice parse_spec(const std::string& text);
    std::string label() const;

    // The joint-batch callable used by the optimizer.
    acquisition::AcquisitionFn callable() const;
};

struct EvalStep {
    Eigen::VectorXd x; // raw coordinates
    double y = 0.0;
    double z = 0.0;
    double cum_budget = 0.0;
    double wall_ms = 0.0;
};

// Running account of evaluation costs. used equals the sum of observed z;
// init is the amount spent by the initial design; the loop only starts an
// iteration while used < total.
struct BudgetLedger {
    double total = 0.0;
    double init = 0.0;
    double used = 0.0;
};

enum class RunStatus { ok, failed, timed_out };

struct RunRecord {
    std::vector<EvalStep> history;
    int T = 0;
    double best_y = -std::numeric_limits<double>::infinity();
    std::optional<double> optimal_gap; // set when the problem declares f_star
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::ok;
    BudgetLedger ledger;
};

struct RunOptions {
    gp::GpConfig gp_config{};
    acqopt::AcqOptConfig acq{};
    double wall_clock_limit_s = std::numeric_limits<double>::infinity();

    RunOptions() {
        // Surrogate-toolchain defaults for the loop: MAP hyperpriors and a
        // fitted noise term keep the surrogate smooth on rugged objectives.
        gp_config.map_priors = true;
        gp_config.optimize_noise = true;
        gp_config.noise_floor = 1e-6;
    }
};

// Scrambled stratified design mapped into bounds; deterministic per seed.
Eigen::MatrixXd init_design(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                            std::uint64_t seed);

// The cost-aware loop: initial design, fit GP_f / GP_c, maximize the AF,
// evaluate, refit, accumulate; the final step may overspend because the
// budget check happens before, not after, an evaluation.
RunRecord run(const Problem& problem, const AfChoice& af, double b_total, std::uint64_t seed,
              const RunOptions& options = {});

double optimal_gap(const RunRecord& record, double f_star);

void write_history_jsonl(const RunRecord& record, std::ostream& os);
void write_summary_json(const RunRecord& record, std::ostream& os);

} // namespace evocaf::bo
