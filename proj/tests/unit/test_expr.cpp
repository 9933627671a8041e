#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "symrl/expr.hpp"

using namespace symrl;

namespace {

Expression v(std::uint32_t i) { return Expression::variable(i); }
Expression c(double x) { return Expression::constant(x); }

double eval(const Expression& e, std::vector<double> x) { return evaluate(e, x); }

} // namespace

TEST_CASE("function set parsing and validation") {
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign");
    CHECK(fs.ops().size() == 6);
    CHECK(fs.to_string() == "add,sub,mul,sin,cos,sign");
    CHECK(fs.contains(Op::Sign));
    CHECK_FALSE(fs.contains(Op::Cube));
    CHECK(fs.with_arity(2) == std::vector<Op>{Op::Add, Op::Sub, Op::Mul});
    CHECK(fs.with_arity(1) == std::vector<Op>{Op::Sin, Op::Cos, Op::Sign});

    CHECK_THROWS_AS(FunctionSet::parse("add,add"), std::invalid_argument);
    CHECK_THROWS_AS(FunctionSet::parse(""), std::invalid_argument);
    CHECK_THROWS_AS(FunctionSet::parse("add,div"), std::invalid_argument);

    CHECK(arity(Op::Square) == 1);
    CHECK(arity(Op::Mul) == 2);
    CHECK(op_from_name("cube") == Op::Cube);
}

TEST_CASE("evaluate hand cases") {
    CHECK(eval(Expression::unary(Op::Sin, v(0)) + v(1), {0.0, 2.0}) == 2.0);
    CHECK(eval(Expression::unary(Op::Sign, v(0)), {0.0}) == 0.0);
    CHECK(eval(Expression::unary(Op::Sign, v(0)), {-3.0}) == -1.0);
    CHECK(eval(Expression::unary(Op::Cube, v(0)) - Expression::unary(Op::Square, v(1)), {2.0, 3.0}) == -1.0);
    CHECK(eval(v(0) * c(0.5), {4.0}) == 2.0);
}

TEST_CASE("evaluate reports non-finite values and structural errors separately") {
    const auto e = v(0) * v(1);
    CHECK(std::isnan(eval(e, {0.0, std::numeric_limits<double>::infinity()})));
    CHECK(std::isinf(eval(Expression::unary(Op::Cube, v(0)), {1e200})));
    CHECK_THROWS_AS(eval(v(2), {1.0, 2.0}), StructuralError);
}

TEST_CASE("evaluate is pure and matches row evaluation") {
    std::mt19937_64 rng(7);
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign,square,cube");
    Eigen::MatrixXd rows = Eigen::MatrixXd::Random(50, 3);
    for (int t = 0; t < 200; ++t) {
        const auto e = random_expression(fs, 3, 5, rng);
        const Eigen::VectorXd col = evaluate_rows(e, rows);
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            std::vector<double> x{rows(i, 0), rows(i, 1), rows(i, 2)};
            const double a = evaluate(e, x);
            const double b = evaluate(e, x);
            CHECK(std::memcmp(&a, &b, sizeof a) == 0);
            if (std::isfinite(a))
                CHECK(col(i) == doctest::Approx(a).epsilon(1e-14));
        }
    }
}

TEST_CASE("depth") {
    CHECK(depth(v(0)) == 0);
    CHECK(depth(Expression::unary(Op::Sin, v(0))) == 1);
    CHECK(depth(Expression::unary(Op::Sin, v(0)) + Expression::unary(Op::Cos, v(1))) == 2);
    const auto e = (v(0) * Expression::unary(Op::Sin, v(1))) + c(1.0);
    CHECK(node_levels(e) == std::vector<int>{0, 1, 2, 2, 3, 1});
}

TEST_CASE("malformed prefix lists are rejected") {
    CHECK_THROWS_AS(Expression({}), StructuralError);
    CHECK_THROWS_AS(Expression({Node::op_node(Op::Add), Node::variable(0)}), StructuralError);
    CHECK_THROWS_AS(Expression({Node::variable(0), Node::variable(1)}), StructuralError);
    CHECK_NOTHROW(Expression({Node::op_node(Op::Add), Node::variable(0), Node::constant(1.0)}));
}

TEST_CASE("random_expression respects depth, variables and seeds") {
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign");
    SUBCASE("depth zero gives leaves") {
        std::mt19937_64 rng(1);
        for (int i = 0; i < 100; ++i)
            CHECK(random_expression(fs, 3, 0, rng).size() == 1);
    }
    SUBCASE("same seed, same tree") {
        std::mt19937_64 a(99), b(99);
        for (int i = 0; i < 50; ++i)
            CHECK(random_expression(fs, 4, 6, a) == random_expression(fs, 4, 6, b));
    }
    SUBCASE("operator coverage over many draws") {
        std::mt19937_64 rng(5);
        std::set<Op> seen;
        for (int i = 0; i < 10000; ++i) {
            const auto e = random_expression(fs, 3, 4, rng);
            CHECK(depth(e) <= 4);
            CHECK(e.max_variable() < 3);
            for (const auto& n : e.nodes())
                if (n.kind == Node::Kind::Operator)
                    seen.insert(n.op);
        }
        CHECK(seen.size() == fs.ops().size());
    }
}

TEST_CASE("mutate keeps invariants over chained mutations") {
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign");
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        std::mt19937_64 rng(seed);
        auto e = random_expression(fs, 3, 3, rng);
        for (int i = 0; i < 10000; ++i) {
            const auto before = e;
            auto next = mutate(e, fs, 3, 7, rng);
            REQUIRE(e == before);
            REQUIRE(depth(next) <= 7);
            REQUIRE(next.max_variable() < 3);
            for (const auto& n : next.nodes())
                if (n.kind == Node::Kind::Operator)
                    REQUIRE(fs.contains(n.op));
            e = std::move(next);
        }
    }
}

TEST_CASE("mutate is deterministic and handles single leaves") {
    const auto fs = FunctionSet::parse("add,mul,sin");
    std::mt19937_64 a(11), b(11);
    const auto base = v(0) * Expression::unary(Op::Sin, v(1));
    for (int i = 0; i < 200; ++i)
        CHECK(mutate(base, fs, 2, 4, a) == mutate(base, fs, 2, 4, b));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i)
        CHECK(depth(mutate(v(0), fs, 2, 2, rng)) <= 2);
}

TEST_CASE("crossover stays within depth") {
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos");
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_expression(fs, 3, 5, rng);
        const auto b = random_expression(fs, 3, 5, rng);
        const auto child = crossover(a, b, 5, rng);
        CHECK(depth(child) <= 5);
    }
}

TEST_CASE("canonical text") {
    CHECK(to_canonical_text(c(0.05)) == "0.0500000000");
    CHECK(to_canonical_text(v(0) * Expression::unary(Op::Sin, v(1))) == "(v0 * sin(v1))");
    CHECK(to_canonical_text(c(0.0499998879)) == "0.0499998879");
    CHECK(to_canonical_text(c(-1e-12)) == "0.0000000000");
    CHECK(format_fixed(std::numeric_limits<double>::quiet_NaN(), 3) == "nan");
}

TEST_CASE("parse inverts canonical text") {
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign,square,cube");
    std::mt19937_64 rng(23);
    for (int i = 0; i < 2000; ++i) {
        const auto e = random_expression(fs, 4, 5, rng);
        const std::string exact = to_canonical_text(e, -1);
        CHECK(parse_expression(exact) == e);
        const std::string rounded = to_canonical_text(e);
        CHECK(to_canonical_text(parse_expression(rounded)) == rounded);
    }
    CHECK_THROWS(parse_expression("(v0 + )"));
    CHECK_THROWS(parse_expression("tan(v0)"));
}
