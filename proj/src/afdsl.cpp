#include "evocaf/afdsl.hpp"

#include "evocaf/errors.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace evocaf::afdsl {

namespace {

// ---------------------------------------------------------------- inputs ---

struct InputInfo {
    const char* name;
    InputId id;
    Shape shape;
};

Shape scalar_shape() { return {Shape::Rank::scalar, {}, {}}; }
Shape vector_shape(Dim::Tag tag, Eigen::Index n = 1) {
    return {Shape::Rank::vector, {tag, n}, {}};
}
Shape matrix_shape(Dim r, Dim c) { return {Shape::Rank::matrix, r, c}; }

const std::array<InputInfo, 10>& input_table() {
    static const std::array<InputInfo, 10> table = {{
        {"train_x", InputId::train_x, matrix_shape({Dim::Tag::t, 1}, {Dim::Tag::d, 1})},
        {"train_y", InputId::train_y, vector_shape(Dim::Tag::t)},
        {"best_x", InputId::best_x, vector_shape(Dim::Tag::d)},
        {"best_y", InputId::best_y, scalar_shape()},
        {"test_x", InputId::test_x, matrix_shape({Dim::Tag::m, 1}, {Dim::Tag::d, 1})},
        {"mean_test_y", InputId::mean_test_y, vector_shape(Dim::Tag::m)},
        {"std_test_y", InputId::std_test_y, vector_shape(Dim::Tag::m)},
        {"cost_test_y", InputId::cost_test_y, vector_shape(Dim::Tag::m)},
        {"budget_used", InputId::budget_used, scalar_shape()},
        {"budget_total", InputId::budget_total, scalar_shape()},
    }};
    return table;
}

struct FuncInfo {
    const char* name;
    FuncId id;
    int arity;
};

const std::array<FuncInfo, 14>& func_table() {
    static const std::array<FuncInfo, 14> table = {{
        {"exp", FuncId::exp, 1},
        {"log", FuncId::log, 1},
        {"sqrt", FuncId::sqrt, 1},
        {"abs", FuncId::abs, 1},
        {"max", FuncId::max, 2},
        {"min", FuncId::min, 2},
        {"clamp", FuncId::clamp, 3},
        {"normpdf", FuncId::normpdf, 1},
        {"normcdf", FuncId::normcdf, 1},
        {"mean", FuncId::mean, 1},
        {"sum", FuncId::sum, 1},
        {"std", FuncId::std, 1},
        {"minrows", FuncId::minrows, 1},
        {"pairwise_dist", FuncId::pairwise_dist, 2},
    }};
    return table;
}

const char* func_name(FuncId id) {
    for (const auto& f : func_table())
        if (f.id == id) return f.name;
    return "?";
}

const char* input_name(InputId id) {
    for (const auto& i : input_table())
        if (i.id == id) return i.name;
    return "?";
}

// ----------------------------------------------------------------- shapes ---

std::optional<Dim> unify(const Dim& a, const Dim& b) {
    if (a.tag != b.tag) return std::nullopt;
    if (a.tag == Dim::Tag::lit && a.n != b.n) return std::nullopt;
    return a;
}

std::string dim_str(const Dim& d) {
    switch (d.tag) {
        case Dim::Tag::m: return "m";
        case Dim::Tag::t: return "t";
        case Dim::Tag::d: return "d";
        case Dim::Tag::lit: return std::to_string(d.n);
    }
    return "?";
}

std::optional<Shape> broadcast(const Shape& a, const Shape& b) {
    if (a.rank == Shape::Rank::scalar) return b;
    if (b.rank == Shape::Rank::scalar) return a;
    if (a.rank != b.rank) return std::nullopt;
    if (a.rank == Shape::Rank::vector) {
        const auto d0 = unify(a.d0, b.d0);
        if (!d0) return std::nullopt;
        return Shape{Shape::Rank::vector, *d0, {}};
    }
    const auto d0 = unify(a.d0, b.d0);
    const auto d1 = unify(a.d1, b.d1);
    if (!d0 || !d1) return std::nullopt;
    return Shape{Shape::Rank::matrix, *d0, *d1};
}

// ------------------------------------------------------------------ lexer ---

enum class TokKind { number, ident, op, lparen, rparen, lbracket, rbracket, comma, end };

struct Token {
    TokKind kind = TokKind::end;
    double num = 0.0;
    std::string text;
    char op = 0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) bump();
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.kind = TokKind::end;
            return;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                name += src_[pos_];
                bump();
            }
            tok_.kind = TokKind::ident;
            tok_.text = name;
            return;
        }
        bump();
        switch (c) {
            case '+': case '-': case '*': case '/': case '^':
                tok_.kind = TokKind::op;
                tok_.op = c;
                return;
            case '(': tok_.kind = TokKind::lparen; return;
            case ')': tok_.kind = TokKind::rparen; return;
            case '[': tok_.kind = TokKind::lbracket; return;
            case ']': tok_.kind = TokKind::rbracket; return;
            case ',': tok_.kind = TokKind::comma; return;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", tok_.line,
                                 tok_.col);
        }
    }

    void lex_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            bump();
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                bump();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            bump();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    bump();
            } else {
                // not an exponent, rewind
                while (pos_ > mark) { --pos_; --col_; }
            }
        }
        tok_.kind = TokKind::number;
        tok_.num = std::strtod(src_.substr(start, pos_ - start).c_str(), nullptr);
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token tok_;
};

// ----------------------------------------------------------------- parser ---

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    NodePtr parse_program() {
        NodePtr e = parse_expr();
        const Token& t = lex_.peek();
        if (t.kind != TokKind::end)
            throw ParseError("unexpected trailing input", t.line, t.col);
        return e;
    }

    int node_count() const { return nodes_; }

private:
    NodePtr make(Node n) {
        ++nodes_;
        return std::make_shared<const Node>(std::move(n));
    }

    NodePtr parse_expr() {
        NodePtr left = parse_term();
        while (lex_.peek().kind == TokKind::op &&
               (lex_.peek().op == '+' || lex_.peek().op == '-')) {
            const Token t = lex_.take();
            NodePtr right = parse_term();
            left = make_binary(t, left, right);
        }
        return left;
    }

    NodePtr parse_term() {
        NodePtr left = parse_factor();
        while (lex_.peek().kind == TokKind::op &&
               (lex_.peek().op == '*' || lex_.peek().op == '/')) {
            const Token t = lex_.take();
            NodePtr right = parse_factor();
            left = make_binary(t, left, right);
        }
        return left;
    }

    NodePtr parse_factor() {
        if (lex_.peek().kind == TokKind::op && lex_.peek().op == '-') {
            lex_.take();
            NodePtr inner = parse_factor();
            Node n;
            n.kind = Node::Kind::neg;
            n.shape = inner->shape;
            n.args = {inner};
            return make(std::move(n));
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (lex_.peek().kind == TokKind::op && lex_.peek().op == '^') {
            const Token t = lex_.take();
            NodePtr exponent = parse_factor(); // right-associative
            return make_binary(t, base, exponent);
        }
        return base;
    }

    NodePtr parse_atom() {
        const Token t = lex_.peek();
        switch (t.kind) {
            case TokKind::number: {
                lex_.take();
                Node n;
                n.kind = Node::Kind::number;
                n.num = t.num;
                n.shape = scalar_shape();
                return make(std::move(n));
            }
            case TokKind::ident: {
                lex_.take();
                if (lex_.peek().kind == TokKind::lparen) return parse_call(t);
                for (const auto& info : input_table()) {
                    if (t.text == info.name) {
                        Node n;
                        n.kind = Node::Kind::input;
                        n.input = info.id;
                        n.shape = info.shape;
                        return make(std::move(n));
                    }
                }
                throw NameError("unknown identifier '" + t.text + "' at line " +
                                std::to_string(t.line) + ", col " + std::to_string(t.col));
            }
            case TokKind::lparen: {
                lex_.take();
                NodePtr e = parse_expr();
                expect(TokKind::rparen, "expected ')'");
                return e;
            }
            case TokKind::lbracket:
                return parse_literal();
            default:
                throw ParseError("expected expression", t.line, t.col);
        }
    }

    NodePtr parse_call(const Token& name_tok) {
        const FuncInfo* info = nullptr;
        for (const auto& f : func_table())
            if (name_tok.text == f.name) info = &f;
        if (!info)
            throw NameError("unknown function '" + name_tok.text + "' at line " +
                            std::to_string(name_tok.line) + ", col " +
                            std::to_string(name_tok.col));
        expect(TokKind::lparen, "expected '('");
        std::vector<NodePtr> args;
        if (lex_.peek().kind != TokKind::rparen) {
            args.push_back(parse_expr());
            while (lex_.peek().kind == TokKind::comma) {
                lex_.take();
                args.push_back(parse_expr());
            }
        }
        expect(TokKind::rparen, "expected ')'");
        if (static_cast<int>(args.size()) != info->arity)
            throw TypeError(std::string("function ") + info->name + " expects " +
                            std::to_string(info->arity) + " argument(s), got " +
                            std::to_string(args.size()));
        Node n;
        n.kind = Node::Kind::call;
        n.func = info->id;
        n.args = std::move(args);
        n.shape = infer_call_shape(*info, n.args);
        return make(std::move(n));
    }

    // Vector and matrix literals hold signed numeric constants only.
    NodePtr parse_literal() {
        const Token open = lex_.take(); // '['
        if (lex_.peek().kind == TokKind::lbracket) {
            std::vector<std::vector<double>> rows;
            rows.push_back(parse_row());
            while (lex_.peek().kind == TokKind::comma) {
                lex_.take();
                rows.push_back(parse_row());
            }
            expect(TokKind::rbracket, "expected ']'");
            const std::size_t cols = rows.front().size();
            for (const auto& r : rows)
                if (r.size() != cols)
                    throw TypeError("matrix literal rows must have equal length");
            Node n;
            n.kind = Node::Kind::matrix_lit;
            n.mat.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols));
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    n.mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        rows[i][j];
            n.shape = matrix_shape({Dim::Tag::lit, n.mat.rows()}, {Dim::Tag::lit, n.mat.cols()});
            return make(std::move(n));
        }
        std::vector<double> vals;
        vals.push_back(parse_signed_number());
        while (lex_.peek().kind == TokKind::comma) {
            lex_.take();
            vals.push_back(parse_signed_number());
        }
        expect(TokKind::rbracket, "expected ']'");
        Node n;
        n.kind = Node::Kind::vector_lit;
        n.vec = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                  static_cast<Eigen::Index>(vals.size()));
        n.shape = vector_shape(Dim::Tag::lit, n.vec.size());
        (void)open;
        return make(std::move(n));
    }

    std::vector<double> parse_row() {
        expect(TokKind::lbracket, "expected '['");
        std::vector<double> vals;
        vals.push_back(parse_signed_number());
        while (lex_.peek().kind == TokKind::comma) {
            lex_.take();
            vals.push_back(parse_signed_number());
        }
        expect(TokKind::rbracket, "expected ']'");
        return vals;
    }

    double parse_signed_number() {
        double sign = 1.0;
        if (lex_.peek().kind == TokKind::op && lex_.peek().op == '-') {
            lex_.take();
            sign = -1.0;
        }
        const Token t = lex_.peek();
        if (t.kind != TokKind::number)
            throw ParseError("expected number in literal", t.line, t.col);
        lex_.take();
        return sign * t.num;
    }

    NodePtr make_binary(const Token& t, NodePtr left, NodePtr right) {
        const auto shape = broadcast(left->shape, right->shape);
        if (!shape)
            throw TypeError(std::string("operator '") + t.op + "' cannot combine shapes " +
                            to_string(left->shape) + " and " + to_string(right->shape));
        Node n;
        n.kind = Node::Kind::binary;
        n.op = t.op;
        n.args = {left, right};
        n.shape = *shape;
        return make(std::move(n));
    }

    Shape infer_call_shape(const FuncInfo& info, const std::vector<NodePtr>& args) {
        switch (info.id) {
            case FuncId::exp:
            case FuncId::log:
            case FuncId::sqrt:
            case FuncId::abs:
            case FuncId::normpdf:
            case FuncId::normcdf:
                return args[0]->shape;
            case FuncId::max:
            case FuncId::min: {
                const auto s = broadcast(args[0]->shape, args[1]->shape);
                if (!s)
                    throw TypeError(std::string(info.name) + " cannot combine shapes " +
                                    to_string(args[0]->shape) + " and " +
                                    to_string(args[1]->shape));
                return *s;
            }
            case FuncId::clamp: {
                auto s = broadcast(args[0]->shape, args[1]->shape);
                if (s) s = broadcast(*s, args[2]->shape);
                if (!s) throw TypeError("clamp arguments have incompatible shapes");
                return *s;
            }
            case FuncId::mean:
            case FuncId::sum:
            case FuncId::std:
                return scalar_shape();
            case FuncId::minrows: {
                if (args[0]->shape.rank != Shape::Rank::matrix)
                    throw TypeError("minrows expects a matrix, got " +
                                    to_string(args[0]->shape));
                return Shape{Shape::Rank::vector, args[0]->shape.d0, {}};
            }
            case FuncId::pairwise_dist: {
                const Shape& a = args[0]->shape;
                const Shape& b = args[1]->shape;
                if (a.rank != Shape::Rank::matrix || b.rank != Shape::Rank::matrix)
                    throw TypeError("pairwise_dist expects two matrices");
                if (!unify(a.d1, b.d1))
                    throw TypeError("pairwise_dist column counts do not match: " +
                                    to_string(a) + " vs " + to_string(b));
                return matrix_shape(a.d0, b.d0);
            }
        }
        throw TypeError("unhandled function");
    }

    void expect(TokKind kind, const char* msg) {
        const Token& t = lex_.peek();
        if (t.kind != kind) throw ParseError(msg, t.line, t.col);
        lex_.take();
    }

    Lexer lex_;
    int nodes_ = 0;
};

// ---------------------------------------------------------------- printer ---

std::string fmt_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void print_node(const Node& n, std::string& out) {
    switch (n.kind) {
        case Node::Kind::number:
            out += fmt_number(n.num);
            return;
        case Node::Kind::vector_lit: {
            out += '[';
            for (Eigen::Index i = 0; i < n.vec.size(); ++i) {
                if (i) out += ", ";
                out += fmt_number(n.vec(i));
            }
            out += ']';
            return;
        }
        case Node::Kind::matrix_lit: {
            out += '[';
            for (Eigen::Index i = 0; i < n.mat.rows(); ++i) {
                if (i) out += ", ";
                out += '[';
                for (Eigen::Index j = 0; j < n.mat.cols(); ++j) {
                    if (j) out += ", ";
                    out += fmt_number(n.mat(i, j));
                }
                out += ']';
            }
            out += ']';
            return;
        }
        case Node::Kind::input:
            out += input_name(n.input);
            return;
        case Node::Kind::neg:
            out += "(-";
            print_node(*n.args[0], out);
            out += ')';
            return;
        case Node::Kind::binary:
            out += '(';
            print_node(*n.args[0], out);
            out += ' ';
            out += n.op;
            out += ' ';
            print_node(*n.args[1], out);
            out += ')';
            return;
        case Node::Kind::call:
            out += func_name(n.func);
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                print_node(*n.args[i], out);
            }
            out += ')';
            return;
    }
}

// -------------------------------------------------------------- evaluator ---

struct Value {
    Shape::Rank rank = Shape::Rank::scalar;
    double s = 0.0;
    Eigen::VectorXd v;
    Eigen::MatrixXd m;

    bool finite() const {
        switch (rank) {
            case Shape::Rank::scalar: return std::isfinite(s);
            case Shape::Rank::vector: return v.allFinite();
            case Shape::Rank::matrix: return m.allFinite();
        }
        return false;
    }
};

Value scalar_value(double s) {
    Value v;
    v.rank = Shape::Rank::scalar;
    v.s = s;
    return v;
}

Value vector_value(Eigen::VectorXd vec) {
    Value v;
    v.rank = Shape::Rank::vector;
    v.v = std::move(vec);
    return v;
}

Value matrix_value(Eigen::MatrixXd mat) {
    Value v;
    v.rank = Shape::Rank::matrix;
    v.m = std::move(mat);
    return v;
}

struct Bindings {
    const Eigen::MatrixXd* train_x = nullptr;
    const Eigen::VectorXd* train_y = nullptr;
    const Eigen::VectorXd* best_x = nullptr;
    double best_y = 0.0;
    const Eigen::MatrixXd* test_x = nullptr;
    const Eigen::VectorXd* mean_test_y = nullptr;
    const Eigen::VectorXd* std_test_y = nullptr;
    const Eigen::VectorXd* cost_test_y = nullptr;
    double budget_used = 0.0;
    double budget_total = 0.0;
};

class Evaluator {
public:
    Evaluator(const Bindings& b, const EvalLimits& limits)
        : b_(b), limits_(limits), start_(std::chrono::steady_clock::now()) {}

    Value eval(const Node& n) {
        tick();
        Value out;
        switch (n.kind) {
            case Node::Kind::number: out = scalar_value(n.num); break;
            case Node::Kind::vector_lit: out = vector_value(n.vec); break;
            case Node::Kind::matrix_lit: out = matrix_value(n.mat); break;
            case Node::Kind::input: out = lookup(n.input); break;
            case Node::Kind::neg: out = negate(eval(*n.args[0])); break;
            case Node::Kind::binary:
                out = apply_binary(n.op, eval(*n.args[0]), eval(*n.args[1]));
                break;
            case Node::Kind::call: out = apply_call(n); break;
        }
        if (!out.finite())
            throw NumericalFault("non-finite intermediate value");
        return out;
    }

private:
    void tick() {
        if (++visits_ > limits_.max_nodes)
            throw LimitExceeded("node-visit limit exceeded");
        if ((visits_ & 63) == 0) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
            if (elapsed > limits_.max_wall_time_s)
                throw LimitExceeded("evaluation wall-time limit exceeded");
        }
    }

    Value lookup(InputId id) const {
        switch (id) {
            case InputId::train_x: return matrix_value(*b_.train_x);
            case InputId::train_y: return vector_value(*b_.train_y);
            case InputId::best_x: return vector_value(*b_.best_x);
            case InputId::best_y: return scalar_value(b_.best_y);
            case InputId::test_x: return matrix_value(*b_.test_x);
            case InputId::mean_test_y: return vector_value(*b_.mean_test_y);
            case InputId::std_test_y: return vector_value(*b_.std_test_y);
            case InputId::cost_test_y: return vector_value(*b_.cost_test_y);
            case InputId::budget_used: return scalar_value(b_.budget_used);
            case InputId::budget_total: return scalar_value(b_.budget_total);
        }
        throw NameError("unbound input");
    }

    static Value negate(Value a) {
        switch (a.rank) {
            case Shape::Rank::scalar: a.s = -a.s; break;
            case Shape::Rank::vector: a.v = -a.v; break;
            case Shape::Rank::matrix: a.m = -a.m; break;
        }
        return a;
    }

    template <typename Fn>
    static Value zip(const Value& a, const Value& b, Fn fn, const char* what) {
        if (a.rank == Shape::Rank::scalar && b.rank == Shape::Rank::scalar)
            return scalar_value(fn(a.s, b.s));
        if (a.rank == Shape::Rank::scalar) {
            Value out = b;
            if (b.rank == Shape::Rank::vector)
                out.v = b.v.unaryExpr([&](double x) { return fn(a.s, x); });
            else
                out.m = b.m.unaryExpr([&](double x) { return fn(a.s, x); });
            return out;
        }
        if (b.rank == Shape::Rank::scalar) {
            Value out = a;
            if (a.rank == Shape::Rank::vector)
                out.v = a.v.unaryExpr([&](double x) { return fn(x, b.s); });
            else
                out.m = a.m.unaryExpr([&](double x) { return fn(x, b.s); });
            return out;
        }
        if (a.rank != b.rank)
            throw TypeError(std::string(what) + ": incompatible operand shapes");
        if (a.rank == Shape::Rank::vector) {
            if (a.v.size() != b.v.size())
                throw TypeError(std::string(what) + ": vector lengths differ");
            Value out = a;
            out.v = a.v.binaryExpr(b.v, fn);
            return out;
        }
        if (a.m.rows() != b.m.rows() || a.m.cols() != b.m.cols())
            throw TypeError(std::string(what) + ": matrix shapes differ");
        Value out = a;
        out.m = a.m.binaryExpr(b.m, fn);
        return out;
    }

    static Value apply_binary(char op, const Value& a, const Value& b) {
        switch (op) {
            case '+': return zip(a, b, [](double x, double y) { return x + y; }, "+");
            case '-': return zip(a, b, [](double x, double y) { return x - y; }, "-");
            case '*': return zip(a, b, [](double x, double y) { return x * y; }, "*");
            case '/': return zip(a, b, [](double x, double y) { return x / y; }, "/");
            case '^':
                return zip(a, b, [](double x, double y) { return std::pow(x, y); }, "^");
        }
        throw TypeError("unknown operator");
    }

    template <typename Fn>
    static Value map(const Value& a, Fn fn) {
        switch (a.rank) {
            case Shape::Rank::scalar: return scalar_value(fn(a.s));
            case Shape::Rank::vector: {
                Value out = a;
                out.v = a.v.unaryExpr(fn);
                return out;
            }
            case Shape::Rank::matrix: {
                Value out = a;
                out.m = a.m.unaryExpr(fn);
                return out;
            }
        }
        throw TypeError("bad value");
    }

    static double reduce_count(const Value& a) {
        switch (a.rank) {
            case Shape::Rank::scalar: return 1.0;
            case Shape::Rank::vector: return static_cast<double>(a.v.size());
            case Shape::Rank::matrix: return static_cast<double>(a.m.size());
        }
        return 0.0;
    }

    static double reduce_sum(const Value& a) {
        switch (a.rank) {
            case Shape::Rank::scalar: return a.s;
            case Shape::Rank::vector: return a.v.sum();
            case Shape::Rank::matrix: return a.m.sum();
        }
        return 0.0;
    }

    static double reduce_sq_dev(const Value& a, double mean) {
        switch (a.rank) {
            case Shape::Rank::scalar: return (a.s - mean) * (a.s - mean);
            case Shape::Rank::vector: return (a.v.array() - mean).square().sum();
            case Shape::Rank::matrix: return (a.m.array() - mean).square().sum();
        }
        return 0.0;
    }

    Value apply_call(const Node& n) {
        switch (n.func) {
            case FuncId::exp: return map(eval(*n.args[0]), [](double x) { return std::exp(x); });
            case FuncId::log: return map(eval(*n.args[0]), [](double x) { return std::log(x); });
            case FuncId::sqrt:
                return map(eval(*n.args[0]), [](double x) { return std::sqrt(x); });
            case FuncId::abs: return map(eval(*n.args[0]), [](double x) { return std::abs(x); });
            case FuncId::normpdf:
                return map(eval(*n.args[0]),
                           [](double x) { return acquisition::std_normal_pdf(x); });
            case FuncId::normcdf:
                return map(eval(*n.args[0]),
                           [](double x) { return acquisition::std_normal_cdf(x); });
            case FuncId::max:
                return zip(eval(*n.args[0]), eval(*n.args[1]),
                           [](double x, double y) { return std::max(x, y); }, "max");
            case FuncId::min:
                return zip(eval(*n.args[0]), eval(*n.args[1]),
                           [](double x, double y) { return std::min(x, y); }, "min");
            case FuncId::clamp: {
                const Value x = eval(*n.args[0]);
                const Value lo = eval(*n.args[1]);
                const Value hi = eval(*n.args[2]);
                const Value lower =
                    zip(x, lo, [](double a, double b) { return std::max(a, b); }, "clamp");
                return zip(lower, hi, [](double a, double b) { return std::min(a, b); },
                           "clamp");
            }
            case FuncId::mean: {
                const Value a = eval(*n.args[0]);
                return scalar_value(reduce_sum(a) / reduce_count(a));
            }
            case FuncId::sum: return scalar_value(reduce_sum(eval(*n.args[0])));
            case FuncId::std: {
                const Value a = eval(*n.args[0]);
                const double count = reduce_count(a);
                const double mean = reduce_sum(a) / count;
                // Bessel-corrected; a single element yields NaN -> NumericalFault.
                return scalar_value(std::sqrt(reduce_sq_dev(a, mean) / (count - 1.0)));
            }
            case FuncId::minrows: {
                const Value a = eval(*n.args[0]);
                if (a.rank != Shape::Rank::matrix) throw TypeError("minrows expects a matrix");
                return vector_value(a.m.rowwise().minCoeff());
            }
            case FuncId::pairwise_dist: {
                const Value a = eval(*n.args[0]);
                const Value b = eval(*n.args[1]);
                if (a.rank != Shape::Rank::matrix || b.rank != Shape::Rank::matrix)
                    throw TypeError("pairwise_dist expects two matrices");
                if (a.m.cols() != b.m.cols())
                    throw TypeError("pairwise_dist column counts differ");
                Eigen::MatrixXd out(a.m.rows(), b.m.rows());
                for (Eigen::Index i = 0; i < a.m.rows(); ++i)
                    for (Eigen::Index j = 0; j < b.m.rows(); ++j)
                        out(i, j) = (a.m.row(i) - b.m.row(j)).norm();
                return matrix_value(std::move(out));
            }
        }
        throw TypeError("unknown function");
    }

    const Bindings& b_;
    const EvalLimits& limits_;
    std::chrono::steady_clock::time_point start_;
    long visits_ = 0;
};

} // namespace

// ------------------------------------------------------------- public api ---

std::string to_string(const Shape& shape) {
    switch (shape.rank) {
        case Shape::Rank::scalar: return "scalar";
        case Shape::Rank::vector: return "vector(" + dim_str(shape.d0) + ")";
        case Shape::Rank::matrix:
            return "matrix(" + dim_str(shape.d0) + ", " + dim_str(shape.d1) + ")";
    }
    return "?";
}

const std::vector<std::string>& input_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& i : input_table()) v.emplace_back(i.name);
        return v;
    }();
    return names;
}

const std::string& grammar_ebnf() {
    static const std::string g = R"ebnf(program = expr ;
expr    = term { ("+" | "-") term } ;
term    = factor { ("*" | "/") factor } ;
factor  = "-" factor | power ;
power   = atom [ "^" factor ] ;
atom    = number | input | call | "(" expr ")" | vector | matrix ;
call    = function "(" expr { "," expr } ")" ;
vector  = "[" signed { "," signed } "]" ;
matrix  = "[" vector { "," vector } "]" ;
signed  = [ "-" ] number ;
input   = "train_x" | "train_y" | "best_x" | "best_y" | "test_x"
        | "mean_test_y" | "std_test_y" | "cost_test_y"
        | "budget_used" | "budget_total" ;
function = "exp" | "log" | "sqrt" | "abs" | "max" | "min" | "clamp"
         | "normpdf" | "normcdf" | "mean" | "sum" | "std" | "minrows"
         | "pairwise_dist" ;)ebnf";
    return g;
}

AfProgram parse(const std::string& source) {
    if (source.empty()) throw ParseError("empty program", 1, 1);
    Parser parser(source);
    AfProgram prog;
    prog.source = source;
    prog.ast = parser.parse_program();
    prog.result_shape = prog.ast->shape;
    prog.node_count = parser.node_count();
    return prog;
}

std::string print(const Node& node) {
    std::string out;
    print_node(node, out);
    return out;
}

std::string print(const AfProgram& prog) { return print(*prog.ast); }

bool ast_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Node::Kind::number:
            if (a.num != b.num) return false;
            break;
        case Node::Kind::vector_lit:
            if (a.vec.size() != b.vec.size() || (a.vec.array() != b.vec.array()).any())
                return false;
            break;
        case Node::Kind::matrix_lit:
            if (a.mat.rows() != b.mat.rows() || a.mat.cols() != b.mat.cols() ||
                (a.mat.array() != b.mat.array()).any())
                return false;
            break;
        case Node::Kind::input:
            if (a.input != b.input) return false;
            break;
        case Node::Kind::neg: break;
        case Node::Kind::binary:
            if (a.op != b.op) return false;
            break;
        case Node::Kind::call:
            if (a.func != b.func) return false;
            break;
    }
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!ast_equal(*a.args[i], *b.args[i])) return false;
    return true;
}

Eigen::VectorXd evaluate_with_inputs(const AfProgram& prog, const acquisition::AfContext& ctx,
                                     const acquisition::AfInputs& in, const EvalLimits& limits) {
    if (!prog.ast) throw TypeError("program has no AST");
    const Eigen::Index m = in.xq.rows();
    if (m < 1) throw TypeError("query batch must be non-empty");
    if (m > limits.max_batch) throw LimitExceeded("query batch exceeds max_batch");

    Bindings b;
    b.train_x = &ctx.train_x;
    b.train_y = &ctx.train_y;
    b.best_x = &ctx.best_x;
    b.best_y = ctx.best_y;
    b.test_x = &in.xq;
    b.mean_test_y = &in.mu;
    b.std_test_y = &in.sigma;
    b.cost_test_y = &in.cost;
    b.budget_used = ctx.budget_used;
    b.budget_total = ctx.budget_total;

    Evaluator ev(b, limits);
    const Value result = ev.eval(*prog.ast);
    if (result.rank != Shape::Rank::vector || result.v.size() != m)
        throw TypeError("program must evaluate to a vector of length m (batch size " +
                        std::to_string(m) + "), got " +
                        (result.rank == Shape::Rank::scalar
                             ? std::string("a scalar")
                             : result.rank == Shape::Rank::vector
                                   ? "a vector of length " + std::to_string(result.v.size())
                                   : std::string("a matrix")));
    return result.v;
}

acquisition::BatchUtility evaluate(const AfProgram& prog, const acquisition::AfContext& ctx,
                                   const Eigen::MatrixXd& Xq, const EvalLimits& limits) {
    const acquisition::AfInputs in = acquisition::make_af_inputs(ctx, Xq);
    acquisition::BatchUtility u;
    u.values = evaluate_with_inputs(prog, ctx, in, limits);
    u.per_point_costs = in.cost;
    return u;
}

std::shared_ptr<const ProbeContext> make_probe_context() {
    auto probe = std::make_shared<ProbeContext>();
    Eigen::MatrixXd X(4, 2);
    X << 0.15, 0.25, 0.85, 0.35, 0.45, 0.75, 0.65, 0.10;
    Eigen::VectorXd y(4);
    y << 0.8, -0.3, 1.4, 0.2;
    Eigen::VectorXd z(4);
    z << 0.6, 0.9, 0.4, 0.7;

    gp::GpConfig cfg;
    gp::KernelParams params;
    params.lengthscales = Eigen::VectorXd::Constant(2, 0.4);
    params.signal_var = 1.0;
    probe->obj_model = gp::make_model(X, y, params, cfg);
    probe->cost_model = gp::make_model(X, z, params, cfg);
    probe->ctx = acquisition::make_context(X, y, probe->obj_model, probe->cost_model,
                                           /*budget_used=*/4.0, /*budget_total=*/12.0,
                                           /*budget_init=*/4.0);
    probe->xq.resize(3, 2);
    probe->xq << 0.5, 0.5, 0.2, 0.8, 0.9, 0.9;
    return probe;
}

ValidationReport validate(const AfProgram& prog, const ProbeContext& probe) {
    ValidationReport report;
    try {
        EvalLimits limits;
        limits.max_wall_time_s = 2.0;
        const acquisition::BatchUtility u = evaluate(prog, probe.ctx, probe.xq, limits);
        if (!u.values.allFinite()) {
            report.reason = "NumericalFault: non-finite utility";
            return report;
        }
        report.pass = true;
    } catch (const NameError& e) {
        report.reason = std::string("NameError: ") + e.what();
    } catch (const TypeError& e) {
        report.reason = std::string("TypeError: ") + e.what();
    } catch (const NumericalFault& e) {
        report.reason = std::string("NumericalFault: ") + e.what();
    } catch (const LimitExceeded& e) {
        report.reason = std::string("LimitExceeded: ") + e.what();
    } catch (const ParseError& e) {
        report.reason = std::string("ParseError: ") + e.what();
    } catch (const Error& e) {
        report.reason = e.what();
    }
    return report;
}

} // namespace evocaf::afdsl
