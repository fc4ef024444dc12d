#include "model_build.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <stdexcept>

namespace qbsdej::cli {
namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("config: " + what);
}

// ---------------------------------------------------------------------------
// Expression compiler.  Parses once into an immutable tree; evaluation walks
// the tree with no shared mutable state, so compiled expressions can be
// called concurrently from the parallel solvers.

struct Node {
    virtual ~Node() = default;
    virtual double eval(const std::vector<double>& vars) const = 0;
};
using NodePtr = std::unique_ptr<const Node>;

struct NumberNode final : Node {
    double value;
    explicit NumberNode(double v) : value(v) {}
    double eval(const std::vector<double>&) const override { return value; }
};

struct VarNode final : Node {
    std::size_t index;
    explicit VarNode(std::size_t i) : index(i) {}
    double eval(const std::vector<double>& vars) const override { return vars[index]; }
};

struct BinaryNode final : Node {
    char op;
    NodePtr lhs, rhs;
    BinaryNode(char o, NodePtr l, NodePtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
    double eval(const std::vector<double>& vars) const override {
        const double a = lhs->eval(vars);
        const double b = rhs->eval(vars);
        switch (op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            default: return a / b;
        }
    }
};

struct NegNode final : Node {
    NodePtr child;
    explicit NegNode(NodePtr c) : child(std::move(c)) {}
    double eval(const std::vector<double>& vars) const override { return -child->eval(vars); }
};

struct Call1Node final : Node {
    double (*fn)(double);
    NodePtr arg;
    Call1Node(double (*f)(double), NodePtr a) : fn(f), arg(std::move(a)) {}
    double eval(const std::vector<double>& vars) const override { return fn(arg->eval(vars)); }
};

struct Call2Node final : Node {
    double (*fn)(double, double);
    NodePtr lhs, rhs;
    Call2Node(double (*f)(double, double), NodePtr a, NodePtr b)
        : fn(f), lhs(std::move(a)), rhs(std::move(b)) {}
    double eval(const std::vector<double>& vars) const override {
        return fn(lhs->eval(vars), rhs->eval(vars));
    }
};

// Wrappers pin down the double overloads; taking the address of a std::
// math function directly is not portable.
double fn_exp(double x) { return std::exp(x); }
double fn_log(double x) { return std::log(x); }
double fn_expm1(double x) { return std::expm1(x); }
double fn_log1p(double x) { return std::log1p(x); }
double fn_abs(double x) { return std::fabs(x); }
double fn_sqrt(double x) { return std::sqrt(x); }
double fn_tanh(double x) { return std::tanh(x); }
double fn_min(double a, double b) { return std::min(a, b); }
double fn_max(double a, double b) { return std::max(a, b); }
double fn_pow(double a, double b) { return std::pow(a, b); }

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& variables)
        : text_(text), vars_(variables) {}

    NodePtr parse() {
        NodePtr e = expression();
        skip_space();
        if (pos_ != text_.size())
            fail("expression: unexpected text at '" + text_.substr(pos_) + "'");
        return e;
    }

private:
    NodePtr expression() {
        NodePtr lhs = term();
        for (;;) {
            skip_space();
            if (peek() == '+' || peek() == '-') {
                char op = take();
                lhs = std::make_unique<BinaryNode>(op, std::move(lhs), term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            skip_space();
            if (peek() == '*' || peek() == '/') {
                char op = take();
                lhs = std::make_unique<BinaryNode>(op, std::move(lhs), factor());
            } else {
                return lhs;
            }
        }
    }

    NodePtr factor() {
        skip_space();
        if (peek() == '-') {
            take();
            return std::make_unique<NegNode>(factor());
        }
        if (peek() == '+') {
            take();
            return factor();
        }
        return primary();
    }

    NodePtr primary() {
        skip_space();
        const char c = peek();
        if (c == '(') {
            take();
            NodePtr e = expression();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail(std::string("expression: unexpected character '") + (c ? std::string(1, c) : "<end>") +
             "'");
    }

    NodePtr number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("expression: bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        return std::make_unique<NumberNode>(v);
    }

    NodePtr identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);
        skip_space();
        if (peek() == '(') {
            take();
            std::vector<NodePtr> args;
            args.push_back(expression());
            skip_space();
            while (peek() == ',') {
                take();
                args.push_back(expression());
                skip_space();
            }
            expect(')');
            return call(name, std::move(args));
        }
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i] == name) return std::make_unique<VarNode>(i);
        fail("expression: unknown variable '" + name + "'");
    }

    NodePtr call(const std::string& name, std::vector<NodePtr> args) {
        struct Fn1 { const char* name; double (*fn)(double); };
        struct Fn2 { const char* name; double (*fn)(double, double); };
        static constexpr Fn1 unary[] = {
            {"exp", fn_exp},     {"log", fn_log},   {"expm1", fn_expm1},
            {"log1p", fn_log1p}, {"abs", fn_abs},   {"sqrt", fn_sqrt},
            {"tanh", fn_tanh},
        };
        static constexpr Fn2 binary[] = {
            {"min", fn_min}, {"max", fn_max}, {"pow", fn_pow},
        };
        for (const auto& f : unary)
            if (name == f.name) {
                if (args.size() != 1)
                    fail("expression: " + name + " takes one argument");
                return std::make_unique<Call1Node>(f.fn, std::move(args[0]));
            }
        for (const auto& f : binary)
            if (name == f.name) {
                if (args.size() != 2)
                    fail("expression: " + name + " takes two arguments");
                return std::make_unique<Call2Node>(f.fn, std::move(args[0]), std::move(args[1]));
            }
        fail("expression: unknown function '" + name + "'");
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    char take() { return text_[pos_++]; }
    void expect(char c) {
        skip_space();
        if (peek() != c) fail(std::string("expression: expected '") + c + "'");
        take();
    }

    const std::string& text_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

// Whether `name` appears as a standalone identifier (not a function call and
// not a prefix of a longer name).  Used to decide y-dependence of custom
// drivers without asking for a redundant config flag.
bool references_variable(const std::string& expr, const std::string& name) {
    std::size_t pos = 0;
    while ((pos = expr.find(name, pos)) != std::string::npos) {
        const bool left_ok =
            pos == 0 || (!std::isalnum(static_cast<unsigned char>(expr[pos - 1])) &&
                         expr[pos - 1] != '_');
        std::size_t after = pos + name.size();
        const bool right_ok =
            after >= expr.size() || (!std::isalnum(static_cast<unsigned char>(expr[after])) &&
                                     expr[after] != '_' && expr[after] != '(');
        if (left_ok && right_ok) return true;
        pos = after;
    }
    return false;
}

std::vector<std::string> generator_variables(int mark_count) {
    std::vector<std::string> vars = {"t", "y", "z"};
    for (int j = 1; j <= mark_count; ++j) vars.push_back("u" + std::to_string(j));
    return vars;
}

std::vector<std::string> payoff_variables(int mark_count) {
    std::vector<std::string> vars = {"b"};
    for (int j = 1; j <= mark_count; ++j) vars.push_back("c" + std::to_string(j));
    return vars;
}

}  // namespace

CompiledExpr compile_expression(const std::string& expr,
                                const std::vector<std::string>& variables) {
    Parser parser(expr, variables);
    std::shared_ptr<const Node> root(parser.parse().release());
    return [root](const std::vector<double>& vars) { return root->eval(vars); };
}

GeneratorSpec build_generator(const Config& cfg, const std::string& section,
                              const MarkSpace& marks) {
    const std::string kind = cfg.get_string(section, "kind");
    if (kind == "entropic") return entropic_generator(cfg.get_double(section, "theta"), marks);
    if (kind == "linear")
        return linear_generator(cfg.get_double(section, "a"), cfg.get_double(section, "b"), marks);
    if (kind == "royer")
        return royer_generator(cfg.get_double(section, "eta"), cfg.get_double(section, "c1"),
                               marks);
    if (kind != "custom") fail("[" + section + "] kind must be entropic, linear, royer or custom");

    const std::string expr = cfg.get_string(section, "expr");
    const int m = marks.size();
    CompiledExpr fn = compile_expression(expr, generator_variables(m));

    GeneratorSpec g;
    g.name = "custom";
    g.marks = marks;
    g.depends_on_y = references_variable(expr, "y");
    g.convex_in_zu = cfg.get_bool(section, "convex", false);
    g.concave_in_zu = cfg.get_bool(section, "concave", false);
    g.positively_homogeneous = cfg.get_bool(section, "positively_homogeneous", false);
    g.profile.m = cfg.get_double(section, "profile_m", 0.0);
    g.profile.beta = cfg.get_double(section, "profile_beta", 0.0);
    g.profile.gamma = cfg.get_double(section, "profile_gamma", 1.0);
    g.profile.lipschitz_y = cfg.get_double(section, "lipschitz_y", g.depends_on_y ? 1.0 : 0.0);
    if (!(g.profile.gamma > 0.0)) fail("[" + section + "] profile_gamma must be positive");
    g.evaluate = [fn, m](double t, double y, double z, std::span<const double> u) {
        std::vector<double> vars(3 + static_cast<std::size_t>(m));
        vars[0] = t;
        vars[1] = y;
        vars[2] = z;
        for (int j = 0; j < m; ++j) vars[3 + static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)];
        return fn(vars);
    };
    return g;
}

TerminalCondition build_payoff(const Config& cfg, const MarkSpace& marks) {
    const std::string kind = cfg.get_string("payoff", "kind");
    const int m = marks.size();
    TerminalCondition xi;

    if (kind == "constant") {
        const double value = cfg.get_double("payoff", "value");
        xi.payoff = [value](double, std::span<const int>) { return value; };
        xi.bound = std::max(std::fabs(value), 1e-12);
        return xi;
    }

    if (kind == "tanh") {
        const double a = cfg.get_double("payoff", "a", 1.0);
        const double e = cfg.get_double("payoff", "e", 0.0);
        const double scale = cfg.get_double("payoff", "scale", 1.0);
        std::vector<double> d = cfg.get_doubles("payoff", "d", std::vector<double>(
                                                                   static_cast<std::size_t>(m), 0.0));
        if (static_cast<int>(d.size()) != m) fail("[payoff] d needs one entry per mark");
        xi.payoff = [a, e, scale, d](double b, std::span<const int> counts) {
            double s = a * b + e;
            for (std::size_t j = 0; j < d.size(); ++j) s += d[j] * counts[j];
            return scale * std::tanh(s);
        };
        xi.bound = std::max(std::fabs(scale), 1e-12);
        return xi;
    }

    if (kind == "additive") {
        // brownian_scale * tanh(B_T) + sum_j jump_scale_j * min(c_j, jump_cap_j).
        // Additively separable across the Brownian and each jump coordinate,
        // which is the structure under which the lattice extraction
        // identities hold without cross terms.
        const double bs = cfg.get_double("payoff", "brownian_scale", 1.0);
        std::vector<double> js = cfg.get_doubles(
            "payoff", "jump_scale", std::vector<double>(static_cast<std::size_t>(m), 0.0));
        std::vector<double> cap = cfg.get_doubles(
            "payoff", "jump_cap", std::vector<double>(static_cast<std::size_t>(m), 2.0));
        if (static_cast<int>(js.size()) != m) fail("[payoff] jump_scale needs one entry per mark");
        if (static_cast<int>(cap.size()) != m) fail("[payoff] jump_cap needs one entry per mark");
        double bound = std::fabs(bs);
        for (std::size_t j = 0; j < js.size(); ++j) bound += std::fabs(js[j]) * std::fabs(cap[j]);
        xi.payoff = [bs, js, cap](double b, std::span<const int> counts) {
            double s = bs * std::tanh(b);
            for (std::size_t j = 0; j < js.size(); ++j)
                s += js[j] * std::min(static_cast<double>(counts[j]), cap[j]);
            return s;
        };
        xi.bound = std::max(bound, 1e-12);
        return xi;
    }

    if (kind == "custom") {
        const std::string expr = cfg.get_string("payoff", "expr");
        CompiledExpr fn = compile_expression(expr, payoff_variables(m));
        xi.bound = cfg.get_double("payoff", "bound");
        if (!(xi.bound > 0.0)) fail("[payoff] custom payoff needs a positive declared bound");
        xi.payoff = [fn, m](double b, std::span<const int> counts) {
            std::vector<double> vars(1 + static_cast<std::size_t>(m));
            vars[0] = b;
            for (int j = 0; j < m; ++j)
                vars[1 + static_cast<std::size_t>(j)] = counts[static_cast<std::size_t>(j)];
            return fn(vars);
        };
        return xi;
    }

    fail("[payoff] kind must be constant, tanh, additive or custom");
}

Experiment build_experiment(const Config& cfg) {
    Experiment ex;
    const double horizon = cfg.get_double("model", "horizon");
    const long long steps = cfg.get_int("model", "steps");
    if (steps < 1 || steps > 1'000'000) fail("[model] steps out of range");
    ex.grid = TimeGrid(horizon, static_cast<int>(steps));

    std::vector<double> marks = cfg.get_doubles("model", "marks", {});
    std::vector<double> weights = cfg.get_doubles("model", "weights", {});
    if (marks.size() != weights.size()) fail("[model] marks and weights must have equal length");
    ex.marks = MarkSpace(marks, weights);

    ex.seed = cfg.get_u64("model", "seed", 0);
    ex.lattice = std::make_unique<Lattice>(ex.grid, ex.marks);
    ex.generator = build_generator(cfg, "generator", ex.marks);
    if (cfg.has_section("generator2")) ex.generator2 = build_generator(cfg, "generator2", ex.marks);
    ex.payoff = build_payoff(cfg, ex.marks);
    return ex;
}

}  // namespace qbsdej::cli
