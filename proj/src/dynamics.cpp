#include "symrl/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace symrl {

void PendulumParams::validate() const {
    if (!(J > 0.0) || !(m > 0.0) || !(R > 0.0) || b < 0.0 || c < 0.0)
        throw std::invalid_argument("pendulum parameters require J, m, R > 0 and b, c >= 0");
}

State pendulum_derivative(std::span<const double> x, std::span<const double> u, const PendulumParams& p) {
    const double alpha = x[0];
    const double alpha_dot = x[1];
    const double torque = p.K / p.R * u[0] - p.m * p.g * p.l * std::sin(alpha) - p.b * alpha_dot -
                          p.K * p.K / p.R * alpha_dot - p.c * apply_op(Op::Sign, alpha_dot);
    return {alpha_dot, torque / p.J};
}

State mobile_robot_derivative(std::span<const double> x, std::span<const double> u) {
    const double phi = x[2];
    return {u[0] * std::cos(phi), u[0] * std::sin(phi), u[1]};
}

State euler_step(const Derivative& f, std::span<const double> x, std::span<const double> u, double ts) {
    State next(x.begin(), x.end());
    const State dx = f(x, u);
    for (std::size_t i = 0; i < next.size(); ++i)
        next[i] += ts * dx[i];
    return next;
}

State rk4_step(const Derivative& f, std::span<const double> x, std::span<const double> u, double ts) {
    const std::size_t n = x.size();
    auto offset = [&](const State& k, double h) {
        State y(n);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = x[i] + h * k[i];
        return y;
    };
    const State k1 = f(x, u);
    const State k2 = f(offset(k1, ts / 2), u);
    const State k3 = f(offset(k2, ts / 2), u);
    const State k4 = f(offset(k3, ts), u);
    State next(n);
    for (std::size_t i = 0; i < n; ++i)
        next[i] = x[i] + ts / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return next;
}

StepFn make_step(Derivative f, Integrator integrator, double ts) {
    if (!(ts >= 0.0))
        throw std::invalid_argument("sampling period must be non-negative");
    if (integrator == Integrator::Euler)
        return [f = std::move(f), ts](std::span<const double> x, std::span<const double> u) {
            return euler_step(f, x, u, ts);
        };
    return [f = std::move(f), ts](std::span<const double> x, std::span<const double> u) {
        return rk4_step(f, x, u, ts);
    };
}

SystemSpec pendulum_system(const PendulumParams& p) {
    p.validate();
    constexpr double pi = std::numbers::pi;
    return {"pendulum",
            {"alpha", "alpha_dot"},
            {"u"},
            {{-pi, pi}, {-40.0, 40.0}},
            {{-5.0, 5.0}},
            [p](std::span<const double> x, std::span<const double> u) { return pendulum_derivative(x, u, p); }};
}

SystemSpec mobile_robot_system() {
    constexpr double pi = std::numbers::pi;
    return {"robot",
            {"x_pos", "y_pos", "phi"},
            {"v_f", "v_a"},
            {{-1.0, 1.0}, {-1.0, 1.0}, {-pi, pi}},
            {{-1.0, 1.0}, {-pi / 2, pi / 2}},
            mobile_robot_derivative};
}

std::vector<double> gbn_signal(std::size_t n_steps, double amplitude, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("switching probability must lie in [0, 1]");
    std::vector<double> out;
    out.reserve(n_steps);
    if (n_steps == 0)
        return out;
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(p);
    double level = coin(rng) ? amplitude : -amplitude;
    out.push_back(level);
    for (std::size_t k = 1; k < n_steps; ++k) {
        if (flip(rng))
            level = -level;
        out.push_back(level);
    }
    return out;
}

Episode simulate(const StepFn& step, const State& x0, std::span<const std::vector<double>> inputs) {
    Episode ep;
    ep.reserve(inputs.size() + 1);
    State x = x0;
    for (const auto& u : inputs) {
        State next = step(x, u);
        ep.push_back({std::move(x), u});
        x = std::move(next);
    }
    const std::size_t m = inputs.empty() ? 0 : inputs.front().size();
    ep.push_back({std::move(x), std::vector<double>(m, 0.0)});
    return ep;
}

Episode random_trajectory(const StepFn& step, const State& x0, std::span<const Range> input_ranges,
                          std::size_t n_steps, std::mt19937_64& rng) {
    std::vector<std::vector<double>> inputs(n_steps, std::vector<double>(input_ranges.size()));
    for (auto& u : inputs)
        for (std::size_t j = 0; j < input_ranges.size(); ++j)
            u[j] = std::uniform_real_distribution<double>(input_ranges[j].lo, input_ranges[j].hi)(rng);
    Episode ep = simulate(step, x0, inputs);
    if (n_steps == 0)
        ep.back().input.assign(input_ranges.size(), 0.0);
    return ep;
}

Dataset grid_dataset(std::span<const Range> state_ranges, std::span<const Range> input_ranges,
                     std::span<const std::size_t> points_per_dim, const StepFn& step, const RegressorSpec& spec) {
    const std::size_t n = state_ranges.size();
    const std::size_t dims = n + input_ranges.size();
    if (points_per_dim.size() != dims)
        throw std::invalid_argument("one point count per state and input dimension is required");
    if (spec.regressor_length() != dims)
        throw std::invalid_argument("regressor spec does not match the grid dimensions");
    std::vector<Range> ranges(state_ranges.begin(), state_ranges.end());
    ranges.insert(ranges.end(), input_ranges.begin(), input_ranges.end());
    std::size_t rows = 1;
    for (std::size_t p : points_per_dim) {
        if (p < 2)
            throw std::invalid_argument("grid needs at least two points per dimension");
        rows *= p;
    }

    Eigen::MatrixXd r(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dims));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    std::vector<std::size_t> idx(dims, 0);
    std::vector<double> point(dims);
    for (std::size_t row = 0; row < rows; ++row) {
        for (std::size_t d = 0; d < dims; ++d) {
            const double frac = static_cast<double>(idx[d]) / static_cast<double>(points_per_dim[d] - 1);
            point[d] = idx[d] + 1 == points_per_dim[d] ? ranges[d].hi : ranges[d].lo + frac * (ranges[d].hi - ranges[d].lo);
            r(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d)) = point[d];
        }
        const State next = step(std::span<const double>(point).first(n), std::span<const double>(point).subspan(n));
        for (std::size_t j = 0; j < n; ++j)
            t(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = next[j];
        // Odometer increment, last dimension fastest.
        for (std::size_t d = dims; d-- > 0;) {
            if (++idx[d] < points_per_dim[d])
                break;
            idx[d] = 0;
        }
    }
    return Dataset(std::move(r), std::move(t), spec.regressor_names(), spec.target_names());
}

State add_noise(std::span<const double> x, const NoiseConfig& cfg, std::mt19937_64& rng) {
    if (!(cfg.lambda >= 0.0))
        throw std::invalid_argument("noise lambda must be non-negative");
    if (cfg.scales.size() != x.size())
        throw std::invalid_argument("noise scales must match the state dimension");
    State out(x.begin(), x.end());
    if (cfg.lambda == 0.0)
        return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += cfg.scales[i] * cfg.lambda * normal(rng);
    return out;
}

Dataset add_noise(const Dataset& data, const NoiseConfig& cfg, std::mt19937_64& rng) {
    const std::size_t n = cfg.scales.size();
    if (data.n_targets() != n || data.regressor_length() < n)
        throw std::invalid_argument("noise scales must match the state columns of the dataset");
    Eigen::MatrixXd regressors = data.regressors();
    Eigen::MatrixXd targets = data.targets();
    std::vector<double> x(n);
    for (Eigen::Index i = 0; i < regressors.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j)
            x[j] = regressors(i, static_cast<Eigen::Index>(j));
        x = add_noise(x, cfg, rng);
        for (std::size_t j = 0; j < n; ++j)
            regressors(i, static_cast<Eigen::Index>(j)) = x[j];
        for (std::size_t j = 0; j < n; ++j)
            x[j] = targets(i, static_cast<Eigen::Index>(j));
        x = add_noise(x, cfg, rng);
        for (std::size_t j = 0; j < n; ++j)
            targets(i, static_cast<Eigen::Index>(j)) = x[j];
    }
    return Dataset(std::move(regressors), std::move(targets), data.regressor_names(), data.target_names(),
                   data.provenance());
}

void ExcitationConfig::validate() const {
    if (ranges.empty())
        throw std::invalid_argument("excitation needs at least one input range");
    for (const auto& r : ranges)
        if (!(r.hi > r.lo))
            throw std::invalid_argument("excitation amplitude range is degenerate");
    if (!(switching_probability >= 0.0 && switching_probability <= 1.0))
        throw std::invalid_argument("switching probability must lie in [0, 1]");
}

std::vector<std::vector<double>> excitation_inputs(const ExcitationConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    std::vector<std::vector<double>> inputs(cfg.steps, std::vector<double>(cfg.ranges.size()));
    if (cfg.kind == ExcitationConfig::Kind::UniformRandom) {
        for (auto& u : inputs)
            for (std::size_t j = 0; j < cfg.ranges.size(); ++j)
                u[j] = std::uniform_real_distribution<double>(cfg.ranges[j].lo, cfg.ranges[j].hi)(rng);
        return inputs;
    }
    for (std::size_t j = 0; j < cfg.ranges.size(); ++j) {
        const double mid = 0.5 * (cfg.ranges[j].lo + cfg.ranges[j].hi);
        const double amp = 0.5 * (cfg.ranges[j].hi - cfg.ranges[j].lo);
        const auto seq = gbn_signal(cfg.steps, amp, cfg.switching_probability, rng);
        for (std::size_t k = 0; k < cfg.steps; ++k)
            inputs[k][j] = mid + seq[k];
    }
    return inputs;
}

Dataset robot_training_dataset(std::size_t n_s, double ts, std::mt19937_64& rng, std::size_t steps_per_episode) {
    if (n_s == 0 || steps_per_episode == 0)
        throw std::invalid_argument("robot training set needs n_s >= 1 and steps_per_episode >= 1");
    const SystemSpec sys = mobile_robot_system();
    const StepFn step = make_step(sys.derivative, Integrator::Euler, ts);
    std::vector<Episode> episodes;
    std::size_t rows = 0;
    while (rows < n_s) {
        const std::size_t len = std::min(steps_per_episode, n_s - rows);
        State x0(sys.state_ranges.size());
        for (std::size_t i = 0; i < x0.size(); ++i)
            x0[i] = std::uniform_real_distribution<double>(sys.state_ranges[i].lo, sys.state_ranges[i].hi)(rng);
        std::vector<double> u(sys.input_ranges.size());
        for (std::size_t j = 0; j < u.size(); ++j)
            u[j] = std::uniform_real_distribution<double>(sys.input_ranges[j].lo, sys.input_ranges[j].hi)(rng);
        const std::vector<std::vector<double>> inputs(len, u);
        episodes.push_back(simulate(step, x0, inputs));
        rows += len;
    }
    return build_state_space_dataset(episodes, sys.regressor_spec());
}

Dataset pendulum_training_dataset(const PendulumDataConfig& cfg, std::mt19937_64& rng) {
    if (cfg.n_s == 0)
        throw std::invalid_argument("pendulum training set needs n_s >= 1");
    const SystemSpec sys = pendulum_system();
    const StepFn step = make_step(sys.derivative, cfg.integrator, cfg.ts);
    ExcitationConfig ex;
    ex.kind = cfg.excitation;
    ex.ranges = {{-cfg.input_limit, cfg.input_limit}};
    ex.switching_probability = cfg.switching_probability;
    ex.steps = cfg.n_s;
    const auto inputs = excitation_inputs(ex, rng);
    const Episode episodes[] = {simulate(step, {0.0, 0.0}, inputs)};
    const Dataset clean = build_state_space_dataset(episodes, sys.regressor_spec());
    if (cfg.lambda == 0.0)
        return clean;
    return add_noise(clean, NoiseConfig{cfg.lambda, {std::numbers::pi, 40.0}}, rng);
}

Dataset system_grid_dataset(const SystemSpec& sys, std::size_t points_per_dim, const StepFn& step) {
    const std::vector<std::size_t> points(sys.state_ranges.size() + sys.input_ranges.size(), points_per_dim);
    return grid_dataset(sys.state_ranges, sys.input_ranges, points, step, sys.regressor_spec());
}

} // namespace symrl
