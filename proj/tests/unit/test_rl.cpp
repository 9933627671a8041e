#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "symrl/rl.hpp"

using namespace symrl;

namespace {

constexpr double pi = std::numbers::pi;

RLConfig coarse_config() {
    RLConfig c = RLConfig::swing_up();
    c.grid = StateGrid{{uniform_axis(-pi, pi, 21, true), uniform_axis(-40.0, 40.0, 21)}};
    return c;
}

StepFn euler_pendulum() { return make_step(pendulum_system().derivative, Integrator::Euler, 0.05); }

ValueFunction random_value(const StateGrid& grid, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<double> v(grid.size());
    for (auto& x : v)
        x = u(rng);
    // Wrapped axes share their end nodes.
    const ValueFunction tmp(grid, v);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto node = grid.node(i);
        if (grid.axes[0].wrap && node[0] == grid.axes[0].hi()) {
            auto twin = node;
            twin[0] = grid.axes[0].lo();
            v[i] = tmp.interpolate(twin);
        }
    }
    return ValueFunction(grid, v);
}

} // namespace

TEST_CASE("pendulum reward") {
    const std::vector<double> ref{pi, 0.0};
    CHECK(reward_pendulum(std::vector<double>{pi, 0.0}, std::vector<double>{0.0}, ref) == 0.0);
    const double down = reward_pendulum(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0}, ref);
    CHECK(down == doctest::Approx(-0.5 * pi).epsilon(1e-15));
    CHECK(down == doctest::Approx(-1.570796).epsilon(1e-6));
    CHECK(reward_pendulum(std::vector<double>{0.0, 0.0}, std::vector<double>{2.0}, ref) ==
          doctest::Approx(down - 0.1).epsilon(1e-15));
    CHECK(reward_pendulum(std::vector<double>{pi, 3.0}, std::vector<double>{0.0}, ref) ==
          doctest::Approx(-0.03).epsilon(1e-15));
    // Wrapped distance treats -pi and pi as the same angle.
    CHECK(reward_pendulum(std::vector<double>{-pi, 0.0}, std::vector<double>{0.0}, ref) == doctest::Approx(0.0));
    CHECK(reward_pendulum(std::vector<double>{-pi, 0.0}, std::vector<double>{0.0}, ref, false) ==
          doctest::Approx(-pi));
    CHECK(angular_distance(0.1, 2 * pi - 0.1) == doctest::Approx(0.2));
}

TEST_CASE("interpolation examples") {
    const StateGrid line{{uniform_axis(0.0, 1.0, 2)}};
    const ValueFunction v(line, {0.0, 2.0});
    CHECK(v.interpolate(std::vector<double>{0.5}) == 1.0);
    CHECK(v.interpolate(std::vector<double>{1.0}) == 2.0);
    bool clamped = false;
    CHECK(v.interpolate(std::vector<double>{3.0}, &clamped) == 2.0);
    CHECK(clamped);

    std::mt19937_64 rng(1);
    const auto grid = coarse_config().grid;
    const auto val = random_value(grid, rng);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(val.interpolate(grid.node(i)) == doctest::Approx(val.values()[i]).epsilon(1e-12));
    // Wrapped axis: a full period away gives the same value.
    const std::vector<double> a{0.3, 5.0}, b{0.3 + 2 * pi, 5.0}, c{0.3 - 4 * pi, 5.0};
    CHECK(val.interpolate(a) == doctest::Approx(val.interpolate(b)).epsilon(1e-12));
    CHECK(val.interpolate(a) == doctest::Approx(val.interpolate(c)).epsilon(1e-12));
}

TEST_CASE("interpolation is non-expansive") {
    std::mt19937_64 rng(2);
    const auto grid = coarse_config().grid;
    std::uniform_real_distribution<double> ua(-4.0, 4.0), uv(-45.0, 45.0);
    for (int t = 0; t < 20; ++t) {
        const auto v1 = random_value(grid, rng);
        const auto v2 = random_value(grid, rng);
        double sup = 0.0, lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            sup = std::max(sup, std::abs(v1.values()[i] - v2.values()[i]));
            lo = std::min(lo, v1.values()[i]);
            hi = std::max(hi, v1.values()[i]);
        }
        for (int q = 0; q < 200; ++q) {
            const std::vector<double> x{ua(rng), uv(rng)};
            const double a = v1.interpolate(x);
            CHECK(std::abs(a - v2.interpolate(x)) <= sup + 1e-12);
            CHECK(a >= lo - 1e-12);
            CHECK(a <= hi + 1e-12);
        }
    }
}

TEST_CASE("stencil weights are a partition of unity") {
    const auto grid = coarse_config().grid;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ua(-pi, pi), uv(-40.0, 40.0);
    for (int t = 0; t < 500; ++t) {
        const auto s = interpolation_stencil(grid, std::vector<double>{ua(rng), uv(rng)});
        double sum = 0.0;
        for (double w : s.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (auto c : s.corners)
            CHECK(c < grid.size());
    }
}

TEST_CASE("value iteration closed forms") {
    SUBCASE("myopic limit gives the best one-step reward") {
        auto cfg = coarse_config();
        cfg.gamma = 1e-12;
        const auto model = euler_pendulum();
        const auto reward = pendulum_reward(cfg);
        const auto res = value_iteration(model, reward, cfg);
        CHECK(res.converged);
        for (std::size_t i = 0; i < cfg.grid.size(); i += 7) {
            const auto x = cfg.grid.node(i);
            double best = -1e300;
            for (const auto& u : cfg.actions)
                best = std::max(best, reward(x, u, model(x, u)));
            CHECK(std::abs(res.value.values()[i] - best) < 1e-9);
        }
    }
    SUBCASE("constant reward") {
        auto cfg = coarse_config();
        cfg.gamma = 0.9;
        cfg.tolerance = 1e-10;
        const Reward r = [](auto, auto, auto) { return -2.0; };
        const auto res = value_iteration(euler_pendulum(), r, cfg);
        for (double v : res.value.values())
            CHECK(v == doctest::Approx(-2.0 / 0.1).epsilon(1e-8));
    }
    SUBCASE("two-node chain") {
        RLConfig cfg;
        cfg.gamma = 0.5;
        cfg.tolerance = 1e-13;
        cfg.actions = {{0.0}};
        cfg.grid = StateGrid{{uniform_axis(0.0, 1.0, 2)}};
        const StepFn to_b = [](auto, auto) { return State{1.0}; };
        const Reward at_b = [](std::span<const double> x, auto, auto) { return x[0] == 1.0 ? 1.0 : 0.0; };
        const auto res = value_iteration(to_b, at_b, cfg);
        CHECK(res.value.values()[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(res.value.values()[1] == doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("value iteration contracts by gamma") {
    auto cfg = coarse_config();
    cfg.gamma = 0.9;
    const auto res = value_iteration(euler_pendulum(), pendulum_reward(cfg), cfg, 2);
    REQUIRE(res.converged);
    REQUIRE(res.residuals.size() == res.sweeps);
    CHECK(res.residuals.back() < cfg.tolerance);
    for (std::size_t k = 2; k < res.residuals.size(); ++k)
        CHECK(res.residuals[k] <= (cfg.gamma + 1e-9) * res.residuals[k - 1] + 1e-12);
}

TEST_CASE("value iteration reports non-finite models and non-convergence") {
    auto cfg = coarse_config();
    const StepFn broken = [](std::span<const double> x, auto) {
        return State{x[0], x[1] > 30.0 ? std::nan("") : x[1]};
    };
    CHECK_THROWS_AS(value_iteration(broken, pendulum_reward(cfg), cfg), ModelOutputError);
    cfg.max_sweeps = 3;
    const auto res = value_iteration(euler_pendulum(), pendulum_reward(cfg), cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.sweeps == 3);
}

TEST_CASE("greedy action rules") {
    const StateGrid grid{{uniform_axis(-1.0, 1.0, 3)}};
    const ValueFunction zero(grid, {0.0, 0.0, 0.0});
    const StepFn hold = [](std::span<const double> x, auto) { return State(x.begin(), x.end()); };
    const std::vector<double> x{0.0};

    const Reward effort = [](auto, std::span<const double> u, auto) { return -0.05 * std::abs(u[0]); };
    const std::vector<Action> three{{-1.0}, {0.0}, {1.0}};
    CHECK(greedy_action(zero, hold, effort, x, three, 0.98) == Action{0.0});

    const Reward flat = [](auto, auto, auto) { return 0.0; };
    const std::vector<Action> pm{{1.0}, {-1.0}, {0.0}};
    CHECK(greedy_action(zero, hold, flat, x, pm, 0.98) == Action{0.0});
    const std::vector<Action> sym{{-2.0}, {2.0}};
    CHECK(greedy_action_index(zero, hold, flat, x, sym, 0.98) == 0);
    const std::vector<Action> sym_rev{{2.0}, {-2.0}};
    CHECK(greedy_action_index(zero, hold, flat, x, sym_rev, 0.98) == 0);

    const Reward gain = [](auto, std::span<const double> u, auto) { return u[0]; };
    const std::vector<Action> two{{0.0}, {1.0}};
    CHECK(greedy_action(zero, hold, gain, x, two, 0.0) == Action{1.0});
}

TEST_CASE("greedy action is unchanged by shifting the value function") {
    std::mt19937_64 rng(4);
    auto cfg = coarse_config();
    const auto model = euler_pendulum();
    const auto reward = pendulum_reward(cfg);
    std::uniform_real_distribution<double> ua(-pi, pi), uv(-30.0, 30.0);
    for (int t = 0; t < 10; ++t) {
        const auto v = random_value(cfg.grid, rng);
        auto shifted_values = v.values();
        for (auto& s : shifted_values)
            s += 1e3;
        const ValueFunction shifted(cfg.grid, shifted_values);
        for (int q = 0; q < 50; ++q) {
            const std::vector<double> x{ua(rng), uv(rng)};
            CHECK(greedy_action_index(v, model, reward, x, cfg.actions, cfg.gamma) ==
                  greedy_action_index(shifted, model, reward, x, cfg.actions, cfg.gamma));
        }
    }
}

TEST_CASE("rollouts") {
    auto cfg = coarse_config();
    const auto model = euler_pendulum();
    const auto reward = pendulum_reward(cfg);
    const auto vi = value_iteration(model, reward, cfg);
    std::mt19937_64 a(5), b(5);
    const auto r1 = rollout(model, vi.value, model, reward, cfg, {0.0, 0.0}, 40, 0.3, a);
    const auto r2 = rollout(model, vi.value, model, reward, cfg, {0.0, 0.0}, 40, 0.3, b);
    CHECK(r1 == r2);
    REQUIRE(r1.trajectory.size() == 40);
    double g = 0.0, w = 1.0;
    for (const auto& tr : r1.trajectory) {
        CHECK(std::abs(tr.u[0]) <= 2.0);
        g += w * tr.r;
        w *= cfg.gamma;
    }
    CHECK(r1.discounted_return == doctest::Approx(g).epsilon(1e-12));
    CHECK(discounted_return(r1.trajectory, cfg.gamma) == doctest::Approx(g).epsilon(1e-12));
    CHECK(rollout_episode(r1).size() == 41);
    CHECK(rollout_episode(r1).back().state == r1.final_state);

    std::mt19937_64 c(6), d(7);
    CHECK(rollout(model, vi.value, model, reward, cfg, {0.0, 0.0}, 40, 0.0, c).trajectory ==
          rollout(model, vi.value, model, reward, cfg, {0.0, 0.0}, 40, 0.0, d).trajectory);

    const auto csv = trajectory_to_csv(r1, 0.05, std::vector<std::string>{"alpha", "alpha_dot"},
                                       std::vector<std::string>{"u"});
    CHECK(csv.rfind("time,alpha,alpha_dot,u,r\n", 0) == 0);
}

TEST_CASE("swing-up band") {
    CHECK(in_swing_up_band(std::vector<double>{pi, 0.0}));
    CHECK(in_swing_up_band(std::vector<double>{-pi + 0.1, 1.9}));
    CHECK_FALSE(in_swing_up_band(std::vector<double>{pi - 0.3, 0.0}));
    CHECK_FALSE(in_swing_up_band(std::vector<double>{pi, 2.5}));
}

TEST_CASE("value function CSV round-trip") {
    std::mt19937_64 rng(8);
    const auto v = random_value(coarse_config().grid, rng);
    const auto text = value_function_to_csv(v);
    CHECK(value_function_from_csv(text) == v);
    CHECK(value_function_to_csv(value_function_from_csv(text)) == text);
    CHECK_THROWS(value_function_from_csv("# symrl value function\nvalue\n1\n"));
}

TEST_CASE("model step from feature models") {
    FeatureModel a, b;
    a.features = {Expression::variable(0), Expression::variable(1)};
    a.coefficients = {1.0, 0.05};
    b.features = {Expression::variable(2)};
    b.coefficients = {2.0};
    const auto step = model_step({a, b});
    CHECK(step(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0}) == State{1.1, 6.0});
}

TEST_CASE("refinement smoke run") {
    EvolveConfig ec;
    ec.population_size = 40;
    ec.generations = 150;
    ec.function_set = FunctionSet::parse("add,sub,mul,sin,cos,sign");
    ec.n_f = 4;
    auto rl = coarse_config();
    RefinementConfig rc;
    rc.n_models = 1;
    rc.collection_stds = {0.0};
    rc.eval_rollouts = 2;
    rc.eval_steps = 20;
    const auto report = refinement_experiment(euler_pendulum(), ec, rl, rc, 3);
    REQUIRE_MESSAGE(report.complete(), report.stage << ": " << report.error);
    CHECK(report.initial_rows == 100);
    CHECK(report.refined_rows == 100 + 50);
    CHECK(report.initial_returns.size() == 2);
    CHECK(report.refined_returns.size() == 2);
    REQUIRE(report.initial.test_rmse.size() == 2);
    for (double e : report.refined.test_rmse)
        CHECK(std::isfinite(e));
    CHECK(report.returns_csv().find("initial") != std::string::npos);
    CHECK_FALSE(report.summary().empty());
}
