#include "symrl/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace symrl {

namespace {

constexpr Op kAllOps[] = {Op::Add, Op::Sub, Op::Mul, Op::Sin, Op::Cos, Op::Sign, Op::Square, Op::Cube};

// Probability that a non-forced node becomes a leaf while growing a random tree.
constexpr double kLeafProbability = 0.3;
// Probability that a leaf is a variable rather than a constant.
constexpr double kVariableProbability = 0.75;
constexpr double kConstantStep = 0.1;

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Node random_leaf(std::uint32_t n_vars, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < kVariableProbability)
        return Node::variable(static_cast<std::uint32_t>(pick(n_vars, rng)));
    return Node::constant(std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
}

void grow(const FunctionSet& fs, std::uint32_t n_vars, int remaining, std::mt19937_64& rng, std::vector<Node>& out) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (remaining <= 0 || u01(rng) < kLeafProbability) {
        out.push_back(random_leaf(n_vars, rng));
        return;
    }
    const Op op = fs.ops()[pick(fs.ops().size(), rng)];
    out.push_back(Node::op_node(op));
    for (int i = 0; i < arity(op); ++i)
        grow(fs, n_vars, remaining - 1, rng, out);
}

double eval_at(const std::vector<Node>& nodes, std::size_t& pos, std::span<const double> x) {
    const Node& n = nodes[pos++];
    switch (n.kind) {
    case Node::Kind::Constant:
        return n.value;
    case Node::Kind::Variable:
        if (n.var >= x.size())
            throw StructuralError("variable v" + std::to_string(n.var) + " out of bounds for regressor of length " +
                                  std::to_string(x.size()));
        return x[n.var];
    case Node::Kind::Operator:
        break;
    }
    if (arity(n.op) == 1)
        return apply_op(n.op, eval_at(nodes, pos, x));
    const double a = eval_at(nodes, pos, x);
    const double b = eval_at(nodes, pos, x);
    return apply_op(n.op, a, b);
}

void print_at(const std::vector<Node>& nodes, std::size_t& pos, int precision, std::string& out) {
    const Node& n = nodes[pos++];
    switch (n.kind) {
    case Node::Kind::Constant:
        out += format_fixed(n.value, precision);
        return;
    case Node::Kind::Variable:
        out += 'v';
        out += std::to_string(n.var);
        return;
    case Node::Kind::Operator:
        break;
    }
    if (arity(n.op) == 1) {
        out += op_name(n.op);
        out += '(';
        print_at(nodes, pos, precision, out);
        out += ')';
        return;
    }
    out += '(';
    print_at(nodes, pos, precision, out);
    out += n.op == Op::Add ? " + " : n.op == Op::Sub ? " - " : " * ";
    print_at(nodes, pos, precision, out);
    out += ')';
}

} // namespace

int arity(Op op) {
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
        return 2;
    default:
        return 1;
    }
}

std::string_view op_name(Op op) {
    switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sign: return "sign";
    case Op::Square: return "square";
    case Op::Cube: return "cube";
    }
    return "?";
}

Op op_from_name(std::string_view name) {
    for (Op op : kAllOps)
        if (op_name(op) == name)
            return op;
    throw std::invalid_argument("unknown operator '" + std::string(name) + "'");
}

FunctionSet::FunctionSet(std::vector<Op> ops) : ops_(std::move(ops)) {
    if (ops_.empty())
        throw std::invalid_argument("function set must not be empty");
    for (std::size_t i = 0; i < ops_.size(); ++i)
        for (std::size_t j = i + 1; j < ops_.size(); ++j)
            if (ops_[i] == ops_[j])
                throw std::invalid_argument("duplicate operator '" + std::string(op_name(ops_[i])) + "' in function set");
}

FunctionSet FunctionSet::parse(std::string_view list) {
    std::vector<Op> ops;
    std::size_t start = 0;
    while (start <= list.size()) {
        std::size_t end = list.find(',', start);
        if (end == std::string_view::npos)
            end = list.size();
        std::string_view item = list.substr(start, end - start);
        while (!item.empty() && item.front() == ' ')
            item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ')
            item.remove_suffix(1);
        if (!item.empty())
            ops.push_back(op_from_name(item));
        start = end + 1;
    }
    return FunctionSet(std::move(ops));
}

std::string FunctionSet::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
        if (i)
            s += ',';
        s += op_name(ops_[i]);
    }
    return s;
}

bool FunctionSet::contains(Op op) const { return std::find(ops_.begin(), ops_.end(), op) != ops_.end(); }

std::vector<Op> FunctionSet::with_arity(int a) const {
    std::vector<Op> out;
    std::copy_if(ops_.begin(), ops_.end(), std::back_inserter(out), [a](Op op) { return arity(op) == a; });
    return out;
}

Expression::Expression(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty())
        throw StructuralError("empty expression");
    // Each node consumes one open slot and opens arity(op) new ones.
    long open = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (open <= 0)
            throw StructuralError("trailing nodes after a complete expression");
        open -= 1;
        if (nodes_[i].kind == Node::Kind::Operator)
            open += arity(nodes_[i].op);
    }
    if (open != 0)
        throw StructuralError("incomplete expression: missing operands");
}

Expression Expression::constant(double v) { return Expression({Node::constant(v)}); }

Expression Expression::variable(std::uint32_t index) { return Expression({Node::variable(index)}); }

Expression Expression::unary(Op op, const Expression& arg) {
    if (arity(op) != 1)
        throw StructuralError("operator '" + std::string(op_name(op)) + "' is not unary");
    std::vector<Node> n{Node::op_node(op)};
    n.insert(n.end(), arg.nodes_.begin(), arg.nodes_.end());
    return Expression(std::move(n));
}

Expression Expression::binary(Op op, const Expression& lhs, const Expression& rhs) {
    if (arity(op) != 2)
        throw StructuralError("operator '" + std::string(op_name(op)) + "' is not binary");
    std::vector<Node> n{Node::op_node(op)};
    n.insert(n.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    n.insert(n.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return Expression(std::move(n));
}

std::size_t Expression::subtree_end(std::size_t pos) const {
    long open = 1;
    while (open > 0) {
        open -= 1;
        if (nodes_[pos].kind == Node::Kind::Operator)
            open += arity(nodes_[pos].op);
        ++pos;
    }
    return pos;
}

long Expression::max_variable() const {
    long m = -1;
    for (const Node& n : nodes_)
        if (n.kind == Node::Kind::Variable)
            m = std::max(m, static_cast<long>(n.var));
    return m;
}

double apply_op(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : (std::isnan(a) ? a : 0.0));
    case Op::Square: return a * a;
    case Op::Cube: return a * a * a;
    }
    return 0.0;
}

double evaluate(const Expression& expr, std::span<const double> regressor) {
    std::size_t pos = 0;
    return eval_at(expr.nodes(), pos, regressor);
}

Eigen::VectorXd evaluate_rows(const Expression& expr, const Eigen::MatrixXd& regressors) {
    const auto& nodes = expr.nodes();
    const Eigen::Index rows = regressors.rows();
    if (expr.max_variable() >= regressors.cols())
        throw StructuralError("variable v" + std::to_string(expr.max_variable()) +
                              " out of bounds for regressor of length " + std::to_string(regressors.cols()));

    // Postfix walk over the reversed prefix list.
    std::vector<Eigen::ArrayXd> stack;
    stack.reserve(nodes.size());
    for (std::size_t k = nodes.size(); k-- > 0;) {
        const Node& n = nodes[k];
        switch (n.kind) {
        case Node::Kind::Constant:
            stack.push_back(Eigen::ArrayXd::Constant(rows, n.value));
            break;
        case Node::Kind::Variable:
            stack.push_back(regressors.col(n.var).array());
            break;
        case Node::Kind::Operator: {
            if (arity(n.op) == 2) {
                Eigen::ArrayXd a = std::move(stack.back());
                stack.pop_back();
                Eigen::ArrayXd& b = stack.back();
                switch (n.op) {
                case Op::Add: b = a + b; break;
                case Op::Sub: b = a - b; break;
                default: b = a * b; break;
                }
            } else {
                Eigen::ArrayXd& a = stack.back();
                switch (n.op) {
                case Op::Sin: a = a.sin(); break;
                case Op::Cos: a = a.cos(); break;
                case Op::Square: a = a.square(); break;
                case Op::Cube: a = a.cube(); break;
                default: a = a.unaryExpr([](double v) { return apply_op(Op::Sign, v); }); break;
                }
            }
            break;
        }
        }
    }
    return stack.back().matrix();
}

int depth(const Expression& expr) {
    const auto levels = node_levels(expr);
    return *std::max_element(levels.begin(), levels.end());
}

std::vector<int> node_levels(const Expression& expr) {
    const auto& nodes = expr.nodes();
    std::vector<int> levels(nodes.size(), 0);
    // Stack of (level, remaining children) for open operators.
    std::vector<std::pair<int, int>> open;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const int level = open.empty() ? 0 : open.back().first + 1;
        levels[i] = level;
        if (!open.empty() && --open.back().second == 0)
            open.pop_back();
        if (nodes[i].kind == Node::Kind::Operator)
            open.emplace_back(level, arity(nodes[i].op));
        // Pop operators whose children are all placed.
        while (!open.empty() && open.back().second == 0)
            open.pop_back();
    }
    return levels;
}

Expression random_expression(const FunctionSet& fs, std::uint32_t n_vars, int max_depth, std::mt19937_64& rng) {
    if (n_vars == 0)
        throw std::invalid_argument("random_expression needs at least one variable");
    std::vector<Node> nodes;
    grow(fs, n_vars, std::max(max_depth, 0), rng, nodes);
    return Expression(std::move(nodes));
}

Expression mutate(const Expression& expr, const FunctionSet& fs, std::uint32_t n_vars, int max_depth,
                  std::mt19937_64& rng) {
    const auto& nodes = expr.nodes();
    std::vector<std::size_t> constants, variables, operators;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        switch (nodes[i].kind) {
        case Node::Kind::Constant: constants.push_back(i); break;
        case Node::Kind::Variable: variables.push_back(i); break;
        case Node::Kind::Operator:
            if (fs.with_arity(arity(nodes[i].op)).size() > 1)
                operators.push_back(i);
            break;
        }
    }

    std::vector<Node> out = nodes;
    switch (pick(4, rng)) {
    case 1:
        if (!constants.empty()) {
            const std::size_t i = constants[pick(constants.size(), rng)];
            out[i].value += std::normal_distribution<double>(0.0, kConstantStep)(rng);
            return Expression(std::move(out));
        }
        break;
    case 2:
        if (!operators.empty()) {
            const std::size_t i = operators[pick(operators.size(), rng)];
            std::vector<Op> same = fs.with_arity(arity(nodes[i].op));
            std::erase(same, nodes[i].op);
            out[i].op = same[pick(same.size(), rng)];
            return Expression(std::move(out));
        }
        break;
    case 3:
        if (!variables.empty() && n_vars > 1) {
            const std::size_t i = variables[pick(variables.size(), rng)];
            auto v = static_cast<std::uint32_t>(pick(n_vars - 1, rng));
            out[i].var = v >= nodes[i].var ? v + 1 : v;
            return Expression(std::move(out));
        }
        break;
    default:
        break;
    }

    // Subtree replacement, also the fallback when the chosen kind does not apply.
    const std::size_t at = pick(nodes.size(), rng);
    const std::size_t end = expr.subtree_end(at);
    const int level = node_levels(expr)[at];
    std::vector<Node> fresh;
    grow(fs, n_vars, std::max(0, max_depth - level), rng, fresh);
    out.clear();
    out.insert(out.end(), nodes.begin(), nodes.begin() + static_cast<long>(at));
    out.insert(out.end(), fresh.begin(), fresh.end());
    out.insert(out.end(), nodes.begin() + static_cast<long>(end), nodes.end());
    return Expression(std::move(out));
}

Expression crossover(const Expression& receiver, const Expression& donor, int max_depth, std::mt19937_64& rng) {
    const auto& r = receiver.nodes();
    const auto& d = donor.nodes();
    const std::size_t at = pick(r.size(), rng);
    const int room = std::max(0, max_depth - node_levels(receiver)[at]);

    std::vector<std::size_t> fits;
    const auto levels = node_levels(donor);
    for (std::size_t j = 0; j < d.size(); ++j) {
        int sub_depth = 0;
        for (std::size_t k = j; k < donor.subtree_end(j); ++k)
            sub_depth = std::max(sub_depth, levels[k] - levels[j]);
        if (sub_depth <= room)
            fits.push_back(j);
    }
    // Leaves always fit, so `fits` is never empty.
    const std::size_t from = fits[pick(fits.size(), rng)];
    std::vector<Node> out(r.begin(), r.begin() + static_cast<long>(at));
    out.insert(out.end(), d.begin() + static_cast<long>(from), d.begin() + static_cast<long>(donor.subtree_end(from)));
    out.insert(out.end(), r.begin() + static_cast<long>(receiver.subtree_end(at)), r.end());
    return Expression(std::move(out));
}

std::string to_canonical_text(const Expression& expr, int precision) {
    std::string out;
    std::size_t pos = 0;
    print_at(expr.nodes(), pos, precision, out);
    return out;
}

std::string format_fixed(double value, int precision) {
    if (!std::isfinite(value)) {
        if (std::isnan(value))
            return "nan";
        return value > 0 ? "inf" : "-inf";
    }
    char buf[512];
    auto res = precision < 0 ? std::to_chars(buf, buf + sizeof buf, value)
                             : std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, precision);
    std::string s(buf, res.ptr);
    // Avoid "-0.000" for values that round to zero.
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos)
        s.erase(0, 1);
    return s;
}

} // namespace symrl
