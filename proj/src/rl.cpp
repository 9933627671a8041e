#include "symrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace symrl {

void Axis::validate() const {
    if (nodes.size() < 2)
        throw std::invalid_argument("grid axis needs at least two nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!std::isfinite(nodes[i]))
            throw std::invalid_argument("grid axis nodes must be finite");
        if (i > 0 && !(nodes[i] > nodes[i - 1]))
            throw std::invalid_argument("grid axis nodes must be strictly increasing");
    }
}

Axis uniform_axis(double lo, double hi, std::size_t points, bool wrap) {
    if (points < 2 || !(hi > lo))
        throw std::invalid_argument("uniform axis needs hi > lo and at least two points");
    Axis axis;
    axis.wrap = wrap;
    axis.nodes.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        axis.nodes[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    axis.nodes.back() = hi;
    return axis;
}

std::size_t StateGrid::size() const {
    std::size_t n = 1;
    for (const auto& a : axes)
        n *= a.nodes.size();
    return n;
}

State StateGrid::node(std::size_t flat) const {
    State x(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
        const std::size_t n = axes[d].nodes.size();
        x[d] = axes[d].nodes[flat % n];
        flat /= n;
    }
    return x;
}

void StateGrid::validate() const {
    if (axes.empty())
        throw std::invalid_argument("state grid has no axes");
    for (const auto& a : axes)
        a.validate();
}

ValueFunction::ValueFunction(StateGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size())
        throw std::invalid_argument("value array has " + std::to_string(values_.size()) + " entries, grid has " +
                                    std::to_string(grid_.size()) + " nodes");
}

Stencil interpolation_stencil(const StateGrid& grid, std::span<const double> x) {
    if (x.size() != grid.dims())
        throw std::invalid_argument("query dimension does not match the grid");
    const std::size_t dims = grid.dims();
    std::vector<std::size_t> lower(dims);
    std::vector<double> frac(dims);
    Stencil st;
    for (std::size_t d = 0; d < dims; ++d) {
        const Axis& a = grid.axes[d];
        double v = x[d];
        if (a.wrap) {
            const double period = a.hi() - a.lo();
            v = a.lo() + std::fmod(v - a.lo(), period);
            if (v < a.lo())
                v += period;
            if (v >= a.hi())
                v = a.lo();
        } else if (v < a.lo() || v > a.hi()) {
            v = std::clamp(v, a.lo(), a.hi());
            st.clamped = true;
        }
        auto it = std::upper_bound(a.nodes.begin(), a.nodes.end(), v);
        std::size_t i = it == a.nodes.begin() ? 0 : static_cast<std::size_t>(it - a.nodes.begin()) - 1;
        i = std::min(i, a.nodes.size() - 2);
        lower[d] = i;
        frac[d] = std::clamp((v - a.nodes[i]) / (a.nodes[i + 1] - a.nodes[i]), 0.0, 1.0);
    }

    const std::size_t n_corners = std::size_t{1} << dims;
    st.corners.reserve(n_corners);
    st.weights.reserve(n_corners);
    for (std::size_t c = 0; c < n_corners; ++c) {
        double w = 1.0;
        std::size_t flat = 0;
        for (std::size_t d = 0; d < dims; ++d) {
            const bool upper = (c >> (dims - 1 - d)) & 1U;
            w *= upper ? frac[d] : 1.0 - frac[d];
            flat = flat * grid.axes[d].nodes.size() + lower[d] + (upper ? 1 : 0);
        }
        if (w == 0.0)
            continue;
        st.corners.push_back(flat);
        st.weights.push_back(w);
    }
    return st;
}

double ValueFunction::interpolate(std::span<const double> x, bool* clamped) const {
    const Stencil st = interpolation_stencil(grid_, x);
    if (clamped)
        *clamped = st.clamped;
    double v = 0.0;
    for (std::size_t i = 0; i < st.corners.size(); ++i)
        v += st.weights[i] * values_[st.corners[i]];
    return v;
}

std::vector<Action> uniform_actions(double lo, double hi, std::size_t levels) {
    if (levels < 1 || hi < lo)
        throw std::invalid_argument("action range needs hi >= lo and at least one level");
    if (levels == 1)
        return {{0.5 * (lo + hi)}};
    std::vector<Action> actions;
    for (std::size_t i = 0; i < levels; ++i)
        actions.push_back({lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(levels - 1)});
    actions.back()[0] = hi;
    return actions;
}

void RLConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    if (actions.empty())
        throw std::invalid_argument("action set is empty");
    for (const auto& a : actions)
        if (a.size() != actions.front().size() || a.empty())
            throw std::invalid_argument("actions must share one non-zero dimension");
    grid.validate();
    if (!(tolerance > 0.0))
        throw std::invalid_argument("tolerance must be positive");
    if (max_sweeps < 1)
        throw std::invalid_argument("max_sweeps must be at least 1");
}

RLConfig RLConfig::swing_up() {
    RLConfig cfg;
    cfg.actions = uniform_actions(-2.0, 2.0, 15);
    return cfg;
}

double angular_distance(double a, double b) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double d = std::fmod(std::abs(a - b), two_pi);
    return std::min(d, two_pi - d);
}

double reward_pendulum(std::span<const double> x, std::span<const double> u, std::span<const double> reference,
                       bool wrapped) {
    const double angle = wrapped ? angular_distance(reference[0], x[0]) : std::abs(reference[0] - x[0]);
    double effort = 0.0;
    for (double v : u)
        effort += std::abs(v);
    return -0.5 * angle - 0.01 * std::abs(reference[1] - x[1]) - 0.05 * effort;
}

Reward pendulum_reward(const RLConfig& config) {
    return [ref = config.reference, wrapped = config.wrapped_reward](std::span<const double> x,
                                                                     std::span<const double> u,
                                                                     std::span<const double>) {
        return reward_pendulum(x, u, ref, wrapped);
    };
}

namespace {

std::string describe_node(const State& x) {
    std::ostringstream out;
    out.precision(17);
    out << '(';
    for (std::size_t i = 0; i < x.size(); ++i)
        out << (i ? ", " : "") << x[i];
    out << ')';
    return out.str();
}

double norm_sq(std::span<const double> u) {
    double s = 0.0;
    for (double v : u)
        s += v * v;
    return s;
}

/// Nodes on the upper end of a wrapped axis alias the lower end.
std::vector<std::size_t> wrap_aliases(const StateGrid& grid) {
    std::vector<std::size_t> alias(grid.size());
    const std::size_t dims = grid.dims();
    for (std::size_t flat = 0; flat < alias.size(); ++flat) {
        std::size_t rest = flat;
        std::vector<std::size_t> idx(dims);
        for (std::size_t d = dims; d-- > 0;) {
            idx[d] = rest % grid.axes[d].nodes.size();
            rest /= grid.axes[d].nodes.size();
        }
        std::size_t target = 0;
        for (std::size_t d = 0; d < dims; ++d) {
            const std::size_t n = grid.axes[d].nodes.size();
            const std::size_t i = grid.axes[d].wrap && idx[d] == n - 1 ? 0 : idx[d];
            target = target * n + i;
        }
        alias[flat] = target;
    }
    return alias;
}

} // namespace

ValueIterationResult value_iteration(const StepFn& model, const Reward& reward, const RLConfig& config,
                                     std::size_t threads) {
    config.validate();
    const StateGrid& grid = config.grid;
    const std::size_t n_nodes = grid.size();
    const std::size_t n_actions = config.actions.size();

    std::vector<double> rewards(n_nodes * n_actions);
    std::vector<Stencil> stencils(n_nodes * n_actions);
    parallel_for(n_nodes, threads, [&](std::size_t n) {
        const State x = grid.node(n);
        for (std::size_t a = 0; a < n_actions; ++a) {
            const State next = model(x, config.actions[a]);
            bool finite = next.size() == x.size();
            for (double v : next)
                finite = finite && std::isfinite(v);
            if (!finite)
                throw ModelOutputError("model output is not finite at grid node " + describe_node(x) +
                                       " with action " + describe_node(config.actions[a]));
            const double r = reward(x, config.actions[a], next);
            if (!std::isfinite(r))
                throw ModelOutputError("reward is not finite at grid node " + describe_node(x));
            rewards[n * n_actions + a] = r;
            stencils[n * n_actions + a] = interpolation_stencil(grid, next);
        }
    });

    const auto alias = wrap_aliases(grid);
    std::vector<double> v(n_nodes, 0.0), next(n_nodes, 0.0);
    ValueIterationResult result{ValueFunction(grid, v), 0, false, {}};
    while (result.sweeps < config.max_sweeps) {
        parallel_for(n_nodes, threads, [&](std::size_t n) {
            if (alias[n] != n)
                return;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < n_actions; ++a) {
                const Stencil& st = stencils[n * n_actions + a];
                double q = 0.0;
                for (std::size_t c = 0; c < st.corners.size(); ++c)
                    q += st.weights[c] * v[st.corners[c]];
                best = std::max(best, rewards[n * n_actions + a] + config.gamma * q);
            }
            next[n] = best;
        });
        double change = 0.0;
        for (std::size_t n = 0; n < n_nodes; ++n) {
            next[n] = next[alias[n]];
            change = std::max(change, std::abs(next[n] - v[n]));
        }
        v.swap(next);
        ++result.sweeps;
        result.residuals.push_back(change);
        if (change < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.value = ValueFunction(grid, std::move(v));
    return result;
}

std::size_t greedy_action_index(const ValueFunction& value, const StepFn& model, const Reward& reward,
                                std::span<const double> x, std::span<const Action> actions, double gamma) {
    if (actions.empty())
        throw std::invalid_argument("action set is empty");
    std::size_t best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < actions.size(); ++a) {
        const State next = model(x, actions[a]);
        double q = reward(x, actions[a], next) + gamma * value.interpolate(next);
        if (std::isnan(q))
            q = -std::numeric_limits<double>::infinity();
        if (q > best_q || (q == best_q && norm_sq(actions[a]) < norm_sq(actions[best]))) {
            best = a;
            best_q = q;
        }
    }
    return best;
}

Action greedy_action(const ValueFunction& value, const StepFn& model, const Reward& reward, std::span<const double> x,
                     std::span<const Action> actions, double gamma) {
    return actions[greedy_action_index(value, model, reward, x, actions, gamma)];
}

bool in_swing_up_band(std::span<const double> x) {
    return angular_distance(x[0], std::numbers::pi) <= 0.2 && std::abs(x[1]) <= 2.0;
}

double discounted_return(std::span<const Transition> trajectory, double gamma) {
    double ret = 0.0, discount = 1.0;
    for (const auto& t : trajectory) {
        ret += discount * t.r;
        discount *= gamma;
    }
    return ret;
}

RolloutResult rollout(const StepFn& plant, const ValueFunction& value, const StepFn& model, const Reward& reward,
                      const RLConfig& config, const State& x0, std::size_t n_steps, double exploration_std,
                      std::mt19937_64& rng, const std::function<bool(std::span<const double>)>& band) {
    if (n_steps < 1)
        throw std::invalid_argument("rollout needs at least one step");
    const std::size_t u_dim = config.actions.front().size();
    Action lo = config.actions.front(), hi = config.actions.front();
    for (const auto& a : config.actions)
        for (std::size_t i = 0; i < u_dim; ++i) {
            lo[i] = std::min(lo[i], a[i]);
            hi[i] = std::max(hi[i], a[i]);
        }

    RolloutResult result;
    std::normal_distribution<double> noise(0.0, 1.0);
    State x = x0;
    std::vector<bool> inside{band(x)};
    for (std::size_t k = 0; k < n_steps; ++k) {
        Action u = greedy_action(value, model, reward, x, config.actions, config.gamma);
        if (exploration_std > 0.0)
            for (std::size_t i = 0; i < u_dim; ++i)
                u[i] = std::clamp(u[i] + exploration_std * noise(rng), lo[i], hi[i]);
        State next = plant(x, u);
        if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); })) {
            result.aborted = true;
            break;
        }
        const double r = reward(x, u, next);
        result.trajectory.push_back({x, u, r});
        x = std::move(next);
        inside.push_back(band(x));
    }
    result.final_state = x;
    result.discounted_return = discounted_return(result.trajectory, config.gamma);
    if (!result.aborted) {
        std::size_t first = inside.size();
        while (first > 0 && inside[first - 1])
            --first;
        if (first < inside.size()) {
            result.steps_to_success = first;
            result.success = true;
        }
    }
    return result;
}

Episode rollout_episode(const RolloutResult& result) {
    Episode ep;
    for (const auto& t : result.trajectory)
        ep.push_back({t.x, t.u});
    if (!result.trajectory.empty())
        ep.push_back({result.final_state, Action(result.trajectory.back().u.size(), 0.0)});
    return ep;
}

StepFn model_step(std::vector<FeatureModel> models) {
    if (models.empty())
        throw std::invalid_argument("model step needs at least one model");
    return [models = std::move(models)](std::span<const double> x, std::span<const double> u) {
        std::vector<double> regressor(x.begin(), x.end());
        regressor.insert(regressor.end(), u.begin(), u.end());
        State next(models.size());
        for (std::size_t i = 0; i < models.size(); ++i)
            next[i] = predict(models[i], regressor);
        return next;
    };
}

} // namespace symrl
