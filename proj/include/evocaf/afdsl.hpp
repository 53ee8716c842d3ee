#pragma once

#include "evocaf/acquisition.hpp"

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace evocaf::afdsl {

// Closed expression language for acquisition functions over the ten-input
// signature (train_x, train_y, best_x, best_y, test_x, mean_test_y,
// std_test_y, cost_test_y, budget_used, budget_total). No loops, recursion,
// state, or I/O exist in the grammar; evaluation is pure and deterministic.

enum class InputId {
    train_x,
    train_y,
    best_x,
    best_y,
    test_x,
    mean_test_y,
    std_test_y,
    cost_test_y,
    budget_used,
    budget_total
};

enum class FuncId {
    exp,
    log,
    sqrt,
    abs,
    max,
    min,
    clamp,
    normpdf,
    normcdf,
    mean,
    sum,
    std,
    minrows,
    pairwise_dist
};

struct Dim {
    enum class Tag { lit, m, t, d } tag = Tag::lit;
    Eigen::Index n = 1; // valid when tag == lit
};

struct Shape {
    enum class Rank { scalar, vector, matrix } rank = Rank::scalar;
    Dim d0, d1;
};

std::string to_string(const Shape& shape);

struct Node {
    enum class Kind { number, vector_lit, matrix_lit, input, neg, binary, call };
    Kind kind = Kind::number;
    double num = 0.0;
    Eigen::VectorXd vec;
    Eigen::MatrixXd mat;
    InputId input = InputId::train_x;
    char op = 0; // + - * / ^
    FuncId func = FuncId::exp;
    std::vector<std::shared_ptr<const Node>> args;
    Shape shape;
};

using NodePtr = std::shared_ptr<const Node>;

struct AfProgram {
    std::string description; // the authoring model's one-paragraph idea
    std::string source;      // original program text
    NodePtr ast;
    Shape result_shape;
    int node_count = 0;
};

struct EvalLimits {
    long max_nodes = 100000;     // node visits per evaluation
    double max_wall_time_s = 1.0;
    long max_batch = 4096;
};

const std::vector<std::string>& input_names();

// Full grammar in EBNF; also embedded in the LLM prompts.
const std::string& grammar_ebnf();

AfProgram parse(const std::string& source);

// Canonical fully parenthesized form; parse(print(p)) reproduces the AST.
std::string print(const Node& node);
std::string print(const AfProgram& prog);

bool ast_equal(const Node& a, const Node& b);

// Evaluates with bindings derived from ctx's models at Xq.
acquisition::BatchUtility evaluate(const AfProgram& prog, const acquisition::AfContext& ctx,
                                   const Eigen::MatrixXd& Xq, const EvalLimits& limits);

// Optimizer path: posterior summaries already computed.
Eigen::VectorXd evaluate_with_inputs(const AfProgram& prog, const acquisition::AfContext& ctx,
                                     const acquisition::AfInputs& in, const EvalLimits& limits);

struct ValidationReport {
    bool pass = false;
    std::string reason; // empty on pass
};

// Self-contained synthetic probe; AfContext points at the owned models, so
// instances are handed out behind shared_ptr and never moved.
struct ProbeContext {
    gp::GpModel obj_model;
    gp::GpModel cost_model;
    acquisition::AfContext ctx;
    Eigen::MatrixXd xq;

    ProbeContext() = default;
    ProbeContext(const ProbeContext&) = delete;
    ProbeContext& operator=(const ProbeContext&) = delete;
};

std::shared_ptr<const ProbeContext> make_probe_context();

ValidationReport validate(const AfProgram& prog, const ProbeContext& probe);

} // namespace evocaf::afdsl
