#include <doctest.h>

#include <cmath>
#include <random>

#include "symrl/dynamics.hpp"
#include "symrl/model.hpp"
#include "symrl/seed.hpp"

using namespace symrl;

namespace {

Expression v(std::uint32_t i) { return Expression::variable(i); }

Dataset table(std::vector<std::vector<double>> x, std::vector<double> y) {
    Eigen::MatrixXd r(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.front().size()));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(y.size()), 1);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < x.front().size(); ++j)
        names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x[i].size(); ++j)
            r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i][j];
        t(static_cast<Eigen::Index>(i), 0) = y[i];
    }
    return Dataset(r, t, names, {"y"});
}

// Euler-discretized pendulum velocity update written out term by term.
struct EulerCoefficients {
    double velocity, coulomb, input, gravity;
};
EulerCoefficients euler_coefficients(const PendulumParams& p, double ts) {
    return {1.0 - ts * (p.b + p.K * p.K / p.R) / p.J, -ts * p.c / p.J, ts * p.K / (p.R * p.J),
            -ts * p.m * p.g * p.l / p.J};
}

} // namespace

TEST_CASE("state-space rows pair consecutive records") {
    const auto spec = RegressorSpec::state_space({"x"}, {"u"});
    std::vector<Episode> one{{{{0.0}, {1.0}}, {{5.0}, {2.0}}}};
    const auto d = build_state_space_dataset(one, spec);
    REQUIRE(d.rows() == 1);
    CHECK(d.regressors()(0, 0) == 0.0);
    CHECK(d.regressors()(0, 1) == 1.0);
    CHECK(d.targets()(0, 0) == 5.0);

    std::vector<Episode> two{{{{0.0}, {0.0}}, {{1.0}, {0.0}}, {{2.0}, {0.0}}}, {{{3.0}, {0.0}}, {{4.0}, {0.0}}}};
    CHECK(build_state_space_dataset(two, spec).rows() == 3);

    std::size_t skipped = 0;
    std::vector<Episode> short_ones{{{{0.0}, {0.0}}}, {{{3.0}, {0.0}}, {{4.0}, {0.0}}}};
    CHECK(build_state_space_dataset(short_ones, spec, &skipped).rows() == 1);
    CHECK(skipped == 1);
}

TEST_CASE("pendulum episode rows follow the raw trajectory") {
    const auto sys = pendulum_system();
    const auto step = make_step(sys.derivative, Integrator::Euler, 0.05);
    std::mt19937_64 rng(4);
    const auto ep = random_trajectory(step, {0.0, 0.0}, sys.input_ranges, 99, rng);
    REQUIRE(ep.size() == 100);
    std::vector<Episode> eps{ep};
    const auto d = build_state_space_dataset(eps, sys.regressor_spec());
    REQUIRE(d.rows() == 99);
    for (std::size_t k = 0; k < 99; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        CHECK(d.regressors()(i, 0) == ep[k].state[0]);
        CHECK(d.regressors()(i, 2) == ep[k].input[0]);
        CHECK(d.targets()(i, 0) == ep[k + 1].state[0]);
        CHECK(d.targets()(i, 1) == ep[k + 1].state[1]);
    }
}

TEST_CASE("NARX regressors") {
    SUBCASE("lagged outputs then the current input") {
        std::vector<double> y{1, 2, 3, 4}, u{10, 20, 30};
        const auto d = build_narx_dataset(y, u, 2, 1);
        REQUIRE(d.rows() == 2);
        CHECK(d.regressors().row(0) == Eigen::RowVector3d(2, 1, 20));
        CHECK(d.targets()(0, 0) == 3.0);
        CHECK(d.regressors().row(1) == Eigen::RowVector3d(3, 2, 30));
        CHECK(d.targets()(1, 0) == 4.0);
    }
    SUBCASE("two input lags on a five sample record") {
        // Rows exist for k = 1, 2, 3 since y_{k+1} must be recorded.
        std::vector<double> y{1, 2, 3, 4, 5}, u{10, 20, 30, 40};
        const auto d = build_narx_dataset(y, u, 2, 2);
        REQUIRE(d.rows() == 3);
        CHECK(d.regressor_length() == 4);
        CHECK(d.regressors().row(0) == Eigen::RowVector4d(2, 1, 10, 20));
        CHECK(d.targets()(2, 0) == 5.0);
    }
    SUBCASE("unit lags match state-space rows") {
        std::vector<double> y{0.5, -1, 2, 3.5, 4}, u{1, 2, 3, 4};
        const auto narx = build_narx_dataset(y, u, 1, 1);
        Episode ep;
        for (std::size_t k = 0; k < y.size(); ++k)
            ep.push_back({{y[k]}, {k < u.size() ? u[k] : 0.0}});
        std::vector<Episode> eps{ep};
        const auto ss = build_state_space_dataset(eps, RegressorSpec::state_space({"y"}, {"u"}));
        CHECK(narx.regressors() == ss.regressors());
        CHECK(narx.targets() == ss.targets());
    }
    CHECK_THROWS_AS(build_narx_dataset(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 3, 1), DataError);
}

TEST_CASE("regressor lengths") {
    CHECK(RegressorSpec::state_space({"a", "b"}, {"u"}).regressor_length() == 3);
    const auto narx = RegressorSpec::narx(3, 2, {"y1", "y2"}, {"u"});
    CHECK(narx.regressor_length() == 3 * 2 + 1 + 1);
    CHECK(narx.regressor_names().back() == "u_k");
}

TEST_CASE("dataset rejects non-finite entries") {
    Eigen::MatrixXd r(1, 1), t(1, 1);
    r << std::nan("");
    t << 1.0;
    CHECK_THROWS_AS(Dataset(r, t, {"x"}, {"y"}), DataError);
}

TEST_CASE("split every third sample") {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 9; ++i) {
        x.push_back({double(i)});
        y.push_back(i);
    }
    const auto s = split_every_third(table(x, y));
    CHECK(s.test.rows() == 3);
    CHECK(s.train.rows() == 6);
    CHECK(s.test.targets()(0, 0) == 2.0);
    CHECK(s.test.targets()(2, 0) == 8.0);
}

TEST_CASE("least squares examples") {
    const auto d = table({{1, 0}, {0, 1}, {1, 1}}, {2, 3, 5});
    const auto m = fit_least_squares({v(0), v(1)}, d, 0);
    CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.coefficients[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m.coefficients[1] == doctest::Approx(3.0).epsilon(1e-12));
    const std::vector<double> q{2, 1};
    CHECK(predict(m, q) == doctest::Approx(7.0).epsilon(1e-12));

    const auto flat = table({{1, 4}, {1, 5}, {1, 6}}, {7, 7, 7});
    const auto c = fit_least_squares({v(0)}, flat, 0);
    for (double p : predict_rows(c, flat.regressors()))
        CHECK(p == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(rmse(c, flat, 0) < 1e-12);
}

TEST_CASE("Euler pendulum coefficients recovered from twenty rows") {
    const PendulumParams p;
    const auto oracle = euler_coefficients(p, 0.05);
    // Reference coefficients of the discrete model, ten decimals.
    CHECK(std::abs(oracle.velocity - 0.9102924564) < 5e-10);
    CHECK(std::abs(oracle.coulomb - -0.2369404025) < 5e-10);
    CHECK(std::abs(oracle.input - 1.5727561084) < 5e-10);
    CHECK(std::abs(oracle.gravity - -6.3168590065) < 5e-10);

    std::mt19937_64 rng(derive_seed(1, "data", {20}));
    const auto d = pendulum_training_dataset({}, rng);
    REQUIRE(d.rows() == 20);
    const std::vector<Expression> features{v(1), Expression::unary(Op::Sign, v(1)), v(2),
                                           Expression::unary(Op::Sin, v(0))};
    const auto m = fit_least_squares(features, d, 1);
    CHECK(std::abs(m.intercept) < 1e-8);
    CHECK(std::abs(m.coefficients[0] - 0.9102924564) < 1e-8);
    CHECK(std::abs(m.coefficients[1] - -0.2369404025) < 1e-8);
    CHECK(std::abs(m.coefficients[2] - 1.5727561084) < 1e-8);
    CHECK(std::abs(m.coefficients[3] - -6.3168590065) < 1e-8);
    CHECK(model_to_text(m, 4).find("0.9103 * v1") != std::string::npos);
}

TEST_CASE("exact data gives exact coefficients") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::vector<Expression> features{v(0) * v(1), Expression::unary(Op::Cos, v(2)), v(0)};
    for (int trial = 0; trial < 20; ++trial) {
        const double b0 = u(rng);
        const std::vector<double> beta{u(rng), u(rng), u(rng)};
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (int i = 0; i < 40; ++i) {
            std::vector<double> row{u(rng), u(rng), u(rng)};
            double t = b0;
            for (std::size_t j = 0; j < 3; ++j)
                t += beta[j] * evaluate(features[j], row);
            x.push_back(row);
            y.push_back(t);
        }
        const auto d = table(x, y);
        const auto m = fit_least_squares(features, d, 0);
        CHECK(std::abs(m.intercept - b0) <= 1e-10 * std::max(1.0, std::abs(b0)));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(m.coefficients[j] - beta[j]) <= 1e-10 * std::max(1.0, std::abs(beta[j])));

        // Perturbing the fitted coefficients never lowers the training error.
        const double best = rmse(m, d, 0);
        for (int k = 0; k < 20; ++k) {
            auto other = m;
            other.intercept += 0.01 * u(rng);
            for (auto& c : other.coefficients)
                c += 0.01 * u(rng);
            CHECK(rmse(other, d, 0) >= best);
        }
    }
}

TEST_CASE("least squares on noisy data beats perturbed coefficients") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
        x.push_back({n(rng), n(rng)});
        y.push_back(std::sin(x.back()[0]) + x.back()[1] * x.back()[1] + 0.3 * n(rng));
    }
    const auto d = table(x, y);
    const auto m = fit_least_squares({Expression::unary(Op::Sin, v(0)), v(1)}, d, 0);
    const double best = rmse(m, d, 0);
    for (double di : {-0.1, 0.0, 0.1})
        for (double d0 : {-0.1, 0.0, 0.1})
            for (double d1 : {-0.1, 0.0, 0.1}) {
                auto other = m;
                other.intercept += di;
                other.coefficients[0] += d0;
                other.coefficients[1] += d1;
                CHECK(rmse(other, d, 0) >= best - 1e-15);
            }
}

TEST_CASE("features that are non-finite on training rows are dropped") {
    const auto d = table({{1e200}, {1.0}, {2.0}}, {1, 2, 3});
    FitReport report;
    const auto m = fit_least_squares({Expression::unary(Op::Cube, v(0)), v(0)}, d, 0, &report);
    CHECK(report.excluded == std::vector<std::size_t>{0});
    CHECK(m.features.size() == 1);
}

TEST_CASE("predict") {
    FeatureModel constant;
    constant.intercept = 3.25;
    const std::vector<double> any{1.0, -7.0};
    CHECK(predict(constant, any) == 3.25);

    // x_next = x_pos + 0.0499998879 * v_f * cos(phi)
    FeatureModel robot;
    robot.features = {v(0), v(3) * Expression::unary(Op::Cos, v(2))};
    robot.coefficients = {1.0, 0.0499998879};
    const std::vector<double> at{0, 0, 0, 1, 0};
    CHECK(predict(robot, at) == doctest::Approx(0.0499998879).epsilon(1e-15));

    FeatureModel wrong;
    wrong.features = {v(5)};
    wrong.coefficients = {1.0};
    CHECK_THROWS_AS(predict(wrong, at), StructuralError);
}

TEST_CASE("predict superposes over coefficient vectors") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const std::vector<Expression> features{v(0), Expression::unary(Op::Sin, v(1)), v(0) * v(1)};
    for (int t = 0; t < 100; ++t) {
        FeatureModel a, b, sum;
        a.features = b.features = sum.features = features;
        for (std::size_t j = 0; j < 3; ++j) {
            a.coefficients.push_back(u(rng));
            b.coefficients.push_back(u(rng));
            sum.coefficients.push_back(a.coefficients[j] + b.coefficients[j]);
        }
        const std::vector<double> x{u(rng), u(rng)};
        CHECK(predict(sum, x) == doctest::Approx(predict(a, x) + predict(b, x)).epsilon(1e-12));
    }
}

TEST_CASE("rmse") {
    FeatureModel one;
    one.intercept = 1.0;
    CHECK(rmse(one, table({{0}, {0}}, {0, 2}), 0) == doctest::Approx(1.0));
    CHECK(rmse(one, table({{0}}, {-2.5}), 0) == doctest::Approx(3.5));
    FeatureModel ident;
    ident.features = {v(0)};
    ident.coefficients = {1.0};
    CHECK(rmse(ident, table({{1}, {2}, {3}}, {1, 2, 3}), 0) == 0.0);
}

TEST_CASE("model text") {
    FeatureModel m;
    m.intercept = 0.5;
    CHECK(model_to_text(m) == "0.5000000000");
    m.features = {v(0), Expression::unary(Op::Sin, v(1))};
    m.coefficients = {2.0, -0.25};
    const auto text = model_to_text(m);
    CHECK(text == "0.5000000000 + 2.0000000000 * v0 - 0.2500000000 * sin(v1)");
    CHECK(model_to_text(m) == text);
}

TEST_CASE("model files round-trip exactly") {
    std::mt19937_64 rng(3);
    const auto fs = FunctionSet::parse("add,sub,mul,sin,cos,sign,square,cube");
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<FeatureModel> models;
    for (int i = 0; i < 20; ++i) {
        FeatureModel m;
        m.regressor_names = {"alpha", "alpha_dot", "u"};
        m.target_name = i % 2 ? "alpha" : "alpha_dot";
        m.intercept = u(rng) / 3.0;
        for (int j = 0; j < i % 5; ++j) {
            m.features.push_back(random_expression(fs, 3, 4, rng));
            m.coefficients.push_back(u(rng) * 1e-7);
        }
        models.push_back(m);
    }
    const auto text = serialize_models(models);
    CHECK(deserialize_models(text) == models);
    CHECK(serialize_models(deserialize_models(text)) == text);
}
