#include "evocaf/bench.hpp"

#include "evocaf/errors.hpp"

#include <cmath>
#include <numbers>

namespace evocaf::bench {

namespace {

constexpr double kPi = std::numbers::pi;

double ackley(const Eigen::VectorXd& x) {
    const double d = static_cast<double>(x.size());
    const double s1 = x.squaredNorm() / d;
    const double s2 = (2.0 * kPi * x.array()).cos().sum() / d;
    return -20.0 * std::exp(-0.2 * std::sqrt(s1)) - std::exp(s2) + 20.0 + std::exp(1.0);
}

double rastrigin(const Eigen::VectorXd& x) {
    const double d = static_cast<double>(x.size());
    return 10.0 * d + (x.array().square() - 10.0 * (2.0 * kPi * x.array()).cos()).sum();
}

double griewank(const Eigen::VectorXd& x) {
    double prod = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        prod *= std::cos(x(i) / std::sqrt(static_cast<double>(i + 1)));
    return x.squaredNorm() / 4000.0 - prod + 1.0;
}

double rosenbrock(const Eigen::VectorXd& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x(i + 1) - x(i) * x(i);
        const double b = 1.0 - x(i);
        s += 100.0 * a * a + b * b;
    }
    return s;
}

double levy(const Eigen::VectorXd& x) {
    const Eigen::ArrayXd w = 1.0 + (x.array() - 1.0) / 4.0;
    const Eigen::Index n = x.size();
    double s = std::pow(std::sin(kPi * w(0)), 2);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double wi = w(i);
        s += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * std::pow(std::sin(kPi * wi + 1.0), 2));
    }
    const double wn = w(n - 1);
    s += (wn - 1.0) * (wn - 1.0) * (1.0 + std::pow(std::sin(2.0 * kPi * wn), 2));
    return s;
}

double three_hump_camel(const Eigen::VectorXd& x) {
    const double x1 = x(0), x2 = x(1);
    return 2.0 * x1 * x1 - 1.05 * std::pow(x1, 4) + std::pow(x1, 6) / 6.0 + x1 * x2 + x2 * x2;
}

double styblinski_tang(const Eigen::VectorXd& x) {
    return 0.5 * (x.array().pow(4) - 16.0 * x.array().square() + 5.0 * x.array()).sum();
}

// Hartmann constants are the canonical ones from Dixon & Szego.
double hartmann3(const Eigen::VectorXd& x) {
    static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
    static const double A[4][3] = {
        {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
    static const double P[4][3] = {{0.3689, 0.1170, 0.2673},
                                   {0.4699, 0.4387, 0.7470},
                                   {0.1091, 0.8732, 0.5547},
                                   {0.0381, 0.5743, 0.8828}};
    double outer = 0.0;
    for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double diff = x(j) - P[i][j];
            inner += A[i][j] * diff * diff;
        }
        outer += alpha[i] * std::exp(-inner);
    }
    return -outer;
}

double hartmann6(const Eigen::VectorXd& x) {
    static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
    static const double A[4][6] = {{10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
                                   {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
                                   {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
                                   {17.0, 8.0, 0.05, 10.0, 0.1, 14.0}};
    static const double P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                   {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                   {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                   {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    double outer = 0.0;
    for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 6; ++j) {
            const double diff = x(j) - P[i][j];
            inner += A[i][j] * diff * diff;
        }
        outer += alpha[i] * std::exp(-inner);
    }
    return -outer;
}

// 10-peak Shekel.
double shekel(const Eigen::VectorXd& x) {
    static const double beta[10] = {0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5};
    static const double C[4][10] = {{4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0},
                                    {4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6},
                                    {4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0},
                                    {4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6}};
    double s = 0.0;
    for (int i = 0; i < 10; ++i) {
        double inner = beta[i];
        for (int j = 0; j < 4; ++j) {
            const double diff = x(j) - C[j][i];
            inner += diff * diff;
        }
        s -= 1.0 / inner;
    }
    return s;
}

// Natively a maximization problem; not negated below.
double cosine8(const Eigen::VectorXd& x) {
    return 0.1 * (5.0 * kPi * x.array()).cos().sum() - x.array().square().sum();
}

struct Definition {
    int dim;
    double lo, hi;                // uniform box per dimension
    std::vector<double> x_star;  // raw coordinates
    bool negate;                 // true for minimization benchmarks
    double (*fn)(const Eigen::VectorXd&);
};

Definition definition_for(const std::string& name) {
    if (name == "ackley2")
        return {2, -32.768, 32.768, {0.0, 0.0}, true, &ackley};
    if (name == "rastrigin2")
        return {2, -5.12, 5.12, {0.0, 0.0}, true, &rastrigin};
    if (name == "griewank2")
        return {2, -600.0, 600.0, {0.0, 0.0}, true, &griewank};
    if (name == "rosenbrock2")
        return {2, -5.0, 10.0, {1.0, 1.0}, true, &rosenbrock};
    if (name == "levy2")
        return {2, -10.0, 10.0, {1.0, 1.0}, true, &levy};
    if (name == "threehumpcamel2")
        return {2, -5.0, 5.0, {0.0, 0.0}, true, &three_hump_camel};
    if (name == "styblinskitang2")
        return {2, -5.0, 5.0, {-2.903534, -2.903534}, true, &styblinski_tang};
    if (name == "hartmann3")
        return {3, 0.0, 1.0, {0.114614, 0.555649, 0.852547}, true, &hartmann3};
    if (name == "powell4")
        return {4, -4.0, 5.0, {0.0, 0.0, 0.0, 0.0}, true,
                +[](const Eigen::VectorXd& x) {
                    double s = 0.0;
                    for (Eigen::Index i = 0; i + 3 < x.size(); i += 4) {
                        const double a = x(i) + 10.0 * x(i + 1);
                        const double b = x(i + 2) - x(i + 3);
                        const double c = x(i + 1) - 2.0 * x(i + 2);
                        const double e = x(i) - x(i + 3);
                        s += a * a + 5.0 * b * b + c * c * c * c + 10.0 * e * e * e * e;
                    }
                    return s;
                }};
    if (name == "shekel4")
        return {4, 0.0, 10.0, {4.0, 4.0, 4.0, 4.0}, true, &shekel};
    if (name == "hartmann6")
        return {6, 0.0, 1.0,
                {0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573}, true, &hartmann6};
    if (name == "cosine8")
        return {8, -1.0, 1.0, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, false, &cosine8};
    throw NotSupported("unknown benchmark: " + name);
}

void check_in_bounds(const BenchmarkInstance& inst, const Eigen::VectorXd& x) {
    if (x.size() != inst.dim)
        throw ShapeError("benchmark " + inst.name + " expects dimension " +
                         std::to_string(inst.dim));
    constexpr double slack = 1e-9;
    for (int j = 0; j < inst.dim; ++j) {
        const double width = inst.hi(j) - inst.lo(j);
        if (x(j) < inst.lo(j) - slack * width || x(j) > inst.hi(j) + slack * width)
            throw DomainError("point outside bounds of " + inst.name + " in dimension " +
                              std::to_string(j));
    }
}

double raw_objective(const Definition& def, const Eigen::VectorXd& x) {
    const double v = def.fn(x);
    return def.negate ? -v : v;
}

} // namespace

const std::vector<std::string>& supported_names() {
    static const std::vector<std::string> names = {
        "ackley2",  "rastrigin2",      "griewank2",       "rosenbrock2",
        "levy2",    "threehumpcamel2", "styblinskitang2", "hartmann3",
        "powell4",  "shekel4",         "hartmann6",       "cosine8"};
    return names;
}

BenchmarkInstance make_instance(const std::string& name, std::uint64_t seed) {
    const Definition def = definition_for(name);
    BenchmarkInstance inst;
    inst.name = name;
    inst.dim = def.dim;
    inst.lo = Eigen::VectorXd::Constant(def.dim, def.lo);
    inst.hi = Eigen::VectorXd::Constant(def.dim, def.hi);
    inst.seed = seed;
    Eigen::VectorXd x_star_raw(def.dim);
    for (int j = 0; j < def.dim; ++j) x_star_raw(j) = def.x_star[static_cast<std::size_t>(j)];
    inst.x_star_unit = (x_star_raw - inst.lo).array() / (inst.hi - inst.lo).array();
    inst.f_star = raw_objective(def, x_star_raw);
    return inst;
}

double eval_objective(const BenchmarkInstance& inst, const Eigen::VectorXd& x) {
    check_in_bounds(inst, x);
    return raw_objective(definition_for(inst.name), x);
}

double eval_cost(const BenchmarkInstance& inst, const Eigen::VectorXd& x) {
    check_in_bounds(inst, x);
    const Eigen::VectorXd u = to_unit(inst, x);
    return std::exp(-(u - inst.x_star_unit).norm());
}

Eigen::VectorXd to_unit(const BenchmarkInstance& inst, const Eigen::VectorXd& x) {
    return (x - inst.lo).array() / (inst.hi - inst.lo).array();
}

Eigen::VectorXd from_unit(const BenchmarkInstance& inst, const Eigen::VectorXd& u) {
    return inst.lo.array() + u.array() * (inst.hi - inst.lo).array();
}

} // namespace evocaf::bench
