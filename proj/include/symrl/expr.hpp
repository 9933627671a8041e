#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace symrl {

/// Elementary functions available to evolved features.
enum class Op : std::uint8_t { Add, Sub, Mul, Sin, Cos, Sign, Square, Cube };

int arity(Op op);
std::string_view op_name(Op op);
Op op_from_name(std::string_view name);

/// Raised for malformed trees, e.g. a variable index past the regressor length.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered, duplicate-free set of operators a search may use.
class FunctionSet {
public:
    explicit FunctionSet(std::vector<Op> ops);

    /// Parses a comma separated list such as "add,sub,mul,sin,cos".
    static FunctionSet parse(std::string_view list);
    std::string to_string() const;

    const std::vector<Op>& ops() const { return ops_; }
    bool contains(Op op) const;
    std::vector<Op> with_arity(int a) const;

    bool operator==(const FunctionSet&) const = default;

private:
    std::vector<Op> ops_;
};

struct Node {
    enum class Kind : std::uint8_t { Constant, Variable, Operator };

    Kind kind = Kind::Constant;
    Op op = Op::Add;
    std::uint32_t var = 0;
    double value = 0.0;

    static Node constant(double v) { return {Kind::Constant, Op::Add, 0, v}; }
    static Node variable(std::uint32_t i) { return {Kind::Variable, Op::Add, i, 0.0}; }
    static Node op_node(Op o) { return {Kind::Operator, o, 0, 0.0}; }

    bool operator==(const Node&) const = default;
};

/// Immutable expression tree stored as a prefix-ordered node list.
class Expression {
public:
    /// Validates that `nodes` forms exactly one well-formed prefix tree.
    explicit Expression(std::vector<Node> nodes);

    static Expression constant(double v);
    static Expression variable(std::uint32_t index);
    static Expression unary(Op op, const Expression& arg);
    static Expression binary(Op op, const Expression& lhs, const Expression& rhs);

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    /// One past the last node of the subtree rooted at `pos`.
    std::size_t subtree_end(std::size_t pos) const;
    /// Largest variable index referenced, or -1 when there is none.
    long max_variable() const;

    bool operator==(const Expression&) const = default;

private:
    std::vector<Node> nodes_;
};

inline Expression operator+(const Expression& a, const Expression& b) { return Expression::binary(Op::Add, a, b); }
inline Expression operator-(const Expression& a, const Expression& b) { return Expression::binary(Op::Sub, a, b); }
inline Expression operator*(const Expression& a, const Expression& b) { return Expression::binary(Op::Mul, a, b); }

/// sign(0) == 0.
double apply_op(Op op, double a, double b = 0.0);

/// Scalar evaluation; non-finite results are returned as is.
double evaluate(const Expression& expr, std::span<const double> regressor);

/// Evaluates the expression for every row of `regressors` (rows x dims).
Eigen::VectorXd evaluate_rows(const Expression& expr, const Eigen::MatrixXd& regressors);

/// Leaves have depth 0.
int depth(const Expression& expr);

/// Depth of each node measured from the root (root is 0).
std::vector<int> node_levels(const Expression& expr);

Expression random_expression(const FunctionSet& fs, std::uint32_t n_vars, int max_depth, std::mt19937_64& rng);

Expression mutate(const Expression& expr, const FunctionSet& fs, std::uint32_t n_vars, int max_depth,
                  std::mt19937_64& rng);

/// Replaces a random subtree of `receiver` with a subtree of `donor` that keeps the
/// result within `max_depth`.
Expression crossover(const Expression& receiver, const Expression& donor, int max_depth, std::mt19937_64& rng);

/// Parenthesized infix text, e.g. "(v0 * sin(v1))"; constants in fixed notation
/// with `precision` decimals, or in shortest round-trip form when precision < 0.
std::string to_canonical_text(const Expression& expr, int precision = 10);

/// Inverse of to_canonical_text.
Expression parse_expression(std::string_view text);

/// Fixed-point formatting shared by the expression and model printers.
std::string format_fixed(double value, int precision);

} // namespace symrl
