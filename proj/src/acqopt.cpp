#include "evocaf/acqopt.hpp"

#include "evocaf/bfgs.hpp"
#include "evocaf/errors.hpp"
#include "evocaf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace evocaf::acqopt {

namespace {

using acquisition::AfContext;
using acquisition::AfInputs;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void swap_row(AfInputs& batch, Eigen::Index row, const AfInputs& source, Eigen::Index src_row) {
    batch.xq.row(row) = source.xq.row(src_row);
    batch.mu(row) = source.mu(src_row);
    batch.sigma(row) = source.sigma(src_row);
    batch.cost(row) = source.cost(src_row);
}

void validate_config(const AcqOptConfig& cfg) {
    if (cfg.n_raw < 1 || cfg.n_restarts < 1 || cfg.local_max_iters < 1)
        throw OptFailure("acquisition optimizer counts must be positive");
    if (cfg.n_restarts > cfg.n_raw)
        throw OptFailure("n_restarts must not exceed n_raw");
}

} // namespace

Eigen::MatrixXd seed_restarts(const acquisition::AcquisitionFn& af, const AfContext& ctx,
                              const AcqOptConfig& config) {
    validate_config(config);
    const Eigen::Index d = ctx.train_x.cols();
    const Eigen::MatrixXd raw = sampling::latin_hypercube(
        config.n_raw, static_cast<int>(d), sampling::split_seed(config.rng_seed, 0x5eed));

    const AfInputs inputs = acquisition::make_af_inputs(ctx, raw);
    Eigen::VectorXd util;
    try {
        util = af(ctx, inputs);
    } catch (const Error&) {
        throw SeedingFailure("acquisition evaluation failed on the raw probe batch");
    }
    if (util.size() != raw.rows())
        throw SeedingFailure("acquisition returned a batch of unexpected size");

    int finite_count = 0;
    for (Eigen::Index i = 0; i < util.size(); ++i)
        if (std::isfinite(util(i))) ++finite_count;
    if (finite_count == 0) throw SeedingFailure("all probe utilities are non-finite");

    if (config.n_restarts >= config.n_raw) return raw;

    // Standardize over finite entries; a flat landscape degrades to uniform
    // sampling without replacement.
    double mean = 0.0;
    for (Eigen::Index i = 0; i < util.size(); ++i)
        if (std::isfinite(util(i))) mean += util(i);
    mean /= finite_count;
    double var = 0.0;
    for (Eigen::Index i = 0; i < util.size(); ++i)
        if (std::isfinite(util(i))) var += (util(i) - mean) * (util(i) - mean);
    var = finite_count > 1 ? var / (finite_count - 1) : 0.0;
    const double sd = var > 1e-24 ? std::sqrt(var) : 0.0;

    const double tau = std::max(config.softmax_temperature, 1e-300);
    std::mt19937_64 rng(sampling::split_seed(config.rng_seed, 0xb017));
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);

    // Gumbel-top-k == softmax sampling without replacement.
    std::vector<std::pair<double, int>> keys;
    keys.reserve(static_cast<std::size_t>(util.size()));
    for (Eigen::Index i = 0; i < util.size(); ++i) {
        const double gumbel = -std::log(-std::log(unif(rng)));
        const double logits = std::isfinite(util(i))
                                  ? (sd > 0.0 ? (util(i) - mean) / sd : 0.0) / tau
                                  : kNegInf;
        keys.emplace_back(logits == kNegInf ? kNegInf : logits + gumbel, static_cast<int>(i));
    }
    std::stable_sort(keys.begin(), keys.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    Eigen::MatrixXd selected(config.n_restarts, d);
    for (int k = 0; k < config.n_restarts; ++k)
        selected.row(k) = raw.row(keys[static_cast<std::size_t>(k)].second);
    return selected;
}

// Block-coordinate BFGS ascent on the summed batch utility F(U) = sum_i af(U)_i,
// mirroring multi-start schemes that optimize the joint restart batch: every
// restart feels the full gradient of batch-coupled terms through the sum, while
// per-point terms reduce to its own entry.
MaximizeResult maximize(const acquisition::AcquisitionFn& af, const AfContext& ctx,
                        const AcqOptConfig& config) {
    validate_config(config);
    const Eigen::Index d = ctx.train_x.cols();
    const int R = config.n_restarts;
    Eigen::MatrixXd X = seed_restarts(af, ctx, config); // R x d

    auto af_on = [&](const AfInputs& in) { return af(ctx, in); };
    auto predict_inputs = [&](const Eigen::MatrixXd& pts) {
        return acquisition::make_af_inputs(ctx, pts);
    };

    AfInputs base = predict_inputs(X);
    Eigen::VectorXd values;
    try {
        values = af_on(base);
    } catch (const Error&) {
        throw OptFailure("acquisition evaluation failed on the seeded batch");
    }

    double best_seed_val = kNegInf;
    Eigen::Index best_seed_i = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (std::isfinite(values(i)) && values(i) > best_seed_val) {
            best_seed_val = values(i);
            best_seed_i = i;
        }
    if (!std::isfinite(best_seed_val)) throw OptFailure("no restart has a finite utility");
    const Eigen::VectorXd best_seed_x = X.row(best_seed_i).transpose();

    const double h = config.fd_step;
    std::vector<Eigen::MatrixXd> h_inv(static_cast<std::size_t>(R),
                                       Eigen::MatrixXd::Identity(d, d));
    std::vector<Eigen::VectorXd> prev_grad(static_cast<std::size_t>(R));
    std::vector<Eigen::VectorXd> prev_step(static_cast<std::size_t>(R));
    std::vector<bool> frozen(static_cast<std::size_t>(R), false);

    for (int iter = 0; iter < config.local_max_iters; ++iter) {
        std::vector<int> active;
        for (int i = 0; i < R; ++i)
            if (!frozen[static_cast<std::size_t>(i)]) active.push_back(i);
        if (active.empty()) break;

        base = predict_inputs(X);
        try {
            values = af_on(base);
        } catch (const Error&) {
            break; // keep last good state
        }
        const double base_sum = values.sum();
        if (!std::isfinite(base_sum)) break;

        // One batched posterior evaluation covers every perturbed point.
        Eigen::MatrixXd pert(static_cast<Eigen::Index>(active.size()) * 2 * d, d);
        std::vector<std::pair<double, double>> steps(active.size() * static_cast<std::size_t>(d));
        Eigen::Index row = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int i = active[a];
            for (Eigen::Index j = 0; j < d; ++j) {
                const double hp = std::min(h, 1.0 - X(i, j));
                const double hm = std::min(h, X(i, j));
                steps[a * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] = {hp, hm};
                Eigen::VectorXd xp = X.row(i).transpose();
                Eigen::VectorXd xm = xp;
                xp(j) += hp;
                xm(j) -= hm;
                pert.row(row++) = xp.transpose();
                pert.row(row++) = xm.transpose();
            }
        }
        const AfInputs pert_inputs = predict_inputs(pert);

        AfInputs scratch = base;
        // Sum of the batch utility with one row swapped out.
        auto sum_with_row = [&](Eigen::Index batch_row, const AfInputs& src,
                                Eigen::Index src_row) -> double {
            swap_row(scratch, batch_row, src, src_row);
            double v;
            try {
                v = af_on(scratch).sum();
            } catch (const Error&) {
                v = std::numeric_limits<double>::quiet_NaN();
            }
            swap_row(scratch, batch_row, base, batch_row);
            return v;
        };

        struct Move {
            int restart;
            Eigen::VectorXd x_new;
            Eigen::VectorXd grad;
        };
        std::vector<Move> moves;

        row = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int i = active[a];
            Eigen::VectorXd g(d);
            for (Eigen::Index j = 0; j < d; ++j) {
                const auto [hp, hm] =
                    steps[a * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
                const double fp = sum_with_row(i, pert_inputs, row++);
                const double fm = sum_with_row(i, pert_inputs, row++);
                const double denom = hp + hm;
                g(j) = (std::isfinite(fp) && std::isfinite(fm) && denom > 0.0)
                           ? (fp - fm) / denom
                           : 0.0;
            }
            auto& H = h_inv[static_cast<std::size_t>(i)];
            if (prev_grad[static_cast<std::size_t>(i)].size() == d &&
                prev_step[static_cast<std::size_t>(i)].size() == d) {
                // BFGS on -F: y = g_prev - g_new.
                optim::bfgs_update(H, prev_step[static_cast<std::size_t>(i)],
                                   prev_grad[static_cast<std::size_t>(i)] - g);
            }

            // Projected-gradient stationarity for this block.
            const Eigen::VectorXd proj =
                (X.row(i).transpose() + g).cwiseMin(1.0).cwiseMax(0.0) - X.row(i).transpose();
            if (proj.lpNorm<Eigen::Infinity>() < config.local_tol) {
                frozen[static_cast<std::size_t>(i)] = true;
                prev_grad[static_cast<std::size_t>(i)].resize(0);
                prev_step[static_cast<std::size_t>(i)].resize(0);
                continue;
            }

            Eigen::VectorXd dir = H * g;
            if (!dir.allFinite() || dir.dot(g) <= 0.0) {
                H.setIdentity();
                dir = g;
            }

            double step = 1.0;
            bool accepted = false;
            Eigen::VectorXd x_new;
            for (int ls = 0; ls < 12; ++ls) {
                x_new = (X.row(i).transpose() + step * dir).cwiseMin(1.0).cwiseMax(0.0);
                const Eigen::VectorXd delta = x_new - X.row(i).transpose();
                if (delta.lpNorm<Eigen::Infinity>() < 1e-15) break;
                const AfInputs trial = predict_inputs(x_new.transpose());
                const double f_new = sum_with_row(i, trial, 0);
                if (std::isfinite(f_new) && f_new >= base_sum + 1e-4 * g.dot(delta)) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                frozen[static_cast<std::size_t>(i)] = true;
                prev_grad[static_cast<std::size_t>(i)].resize(0);
                prev_step[static_cast<std::size_t>(i)].resize(0);
                continue;
            }
            moves.push_back({i, x_new, g});
        }

        // Jacobi update: every accepted move was judged against the same base.
        for (const auto& move : moves) {
            prev_step[static_cast<std::size_t>(move.restart)] =
                move.x_new - X.row(move.restart).transpose();
            prev_grad[static_cast<std::size_t>(move.restart)] = move.grad;
            X.row(move.restart) = move.x_new.transpose();
        }
    }

    // Final selection: every converged restart (plus the best seed, as the
    // never-regress fallback) is scored as its own single-point batch, so
    // batch-coupled terms differentiate the candidates instead of adding a
    // shared constant.
    Eigen::MatrixXd finalists(R + 1, d);
    finalists.topRows(R) = X;
    finalists.row(R) = best_seed_x.transpose();
    const AfInputs final_inputs = predict_inputs(finalists);

    MaximizeResult res;
    res.utility = kNegInf;
    for (int i = 0; i <= R; ++i) {
        AfInputs one;
        one.xq = final_inputs.xq.row(i);
        one.mu = final_inputs.mu.segment(i, 1);
        one.sigma = final_inputs.sigma.segment(i, 1);
        one.cost = final_inputs.cost.segment(i, 1);
        double v;
        try {
            v = af_on(one)(0);
        } catch (const Error&) {
            continue;
        }
        if (std::isfinite(v) && v > res.utility) {
            res.utility = v;
            res.x = finalists.row(i).transpose();
        }
    }
    if (!std::isfinite(res.utility)) throw OptFailure("no successful restart");
    res.x = res.x.cwiseMin(1.0).cwiseMax(0.0);
    return res;
}

} // namespace evocaf::acqopt
