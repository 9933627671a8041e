#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "symrl/dynamics.hpp"
#include "symrl/evolve.hpp"

namespace symrl {

/// Strictly increasing node positions along one state dimension. A wrapped axis
/// treats its first and last node as the same point (period hi - lo).
struct Axis {
    std::vector<double> nodes;
    bool wrap = false;

    double lo() const { return nodes.front(); }
    double hi() const { return nodes.back(); }
    void validate() const;
    bool operator==(const Axis&) const = default;
};

Axis uniform_axis(double lo, double hi, std::size_t points, bool wrap = false);

/// Rectangular grid; flat index is lexicographic with the last axis fastest.
struct StateGrid {
    std::vector<Axis> axes;

    std::size_t size() const;
    std::size_t dims() const { return axes.size(); }
    State node(std::size_t flat) const;
    void validate() const;
    bool operator==(const StateGrid&) const = default;
};

class ValueFunction {
public:
    ValueFunction(StateGrid grid, std::vector<double> values);

    const StateGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }

    /// Multilinear interpolation; queries outside a non-wrapped axis are clamped and
    /// `clamped` (if given) is set.
    double interpolate(std::span<const double> x, bool* clamped = nullptr) const;

    bool operator==(const ValueFunction&) const = default;

private:
    StateGrid grid_;
    std::vector<double> values_;
};

/// Corner indices and weights of the multilinear stencil at `x`.
struct Stencil {
    std::vector<std::size_t> corners;
    std::vector<double> weights;
    bool clamped = false;
};
Stencil interpolation_stencil(const StateGrid& grid, std::span<const double> x);

using Action = std::vector<double>;

/// Evenly spaced scalar actions over [lo, hi].
std::vector<Action> uniform_actions(double lo, double hi, std::size_t levels);

/// rho(x_k, u_k, x_{k+1})
using Reward =
    std::function<double(std::span<const double> x, std::span<const double> u, std::span<const double> x_next)>;

struct RLConfig {
    double gamma = 0.98;
    std::vector<Action> actions = uniform_actions(-5.0, 5.0, 11);
    StateGrid grid{{uniform_axis(-std::numbers::pi, std::numbers::pi, 41, true), uniform_axis(-40.0, 40.0, 41)}};
    double tolerance = 1e-6;
    std::size_t max_sweeps = 5000;
    State reference{std::numbers::pi, 0.0};
    bool wrapped_reward = true;

    void validate() const;
    /// |u| <= 2 V with 15 levels.
    static RLConfig swing_up();
};

/// min(|a - b| mod 2pi, 2pi - (|a - b| mod 2pi))
double angular_distance(double a, double b);

double reward_pendulum(std::span<const double> x, std::span<const double> u, std::span<const double> reference,
                       bool wrapped = true);
Reward pendulum_reward(const RLConfig& config);

/// Raised when the model maps a grid node to a non-finite state.
class ModelOutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ValueIterationResult {
    ValueFunction value;
    std::size_t sweeps = 0;
    bool converged = false;
    /// Sup-norm change of each sweep.
    std::vector<double> residuals;
};

/// Jacobi sweeps from V = 0 until the sup-norm change drops below the tolerance.
ValueIterationResult value_iteration(const StepFn& model, const Reward& reward, const RLConfig& config,
                                     std::size_t threads = 1);

/// argmax_u rho(x, u, f(x, u)) + gamma V(f(x, u)); ties go to the smallest |u|, then the
/// lowest index.
std::size_t greedy_action_index(const ValueFunction& value, const StepFn& model, const Reward& reward,
                                std::span<const double> x, std::span<const Action> actions, double gamma);
Action greedy_action(const ValueFunction& value, const StepFn& model, const Reward& reward, std::span<const double> x,
                     std::span<const Action> actions, double gamma);

struct Transition {
    State x;
    Action u;
    double r = 0.0;
    bool operator==(const Transition&) const = default;
};

/// Pendulum band around the upright position: wrapped |alpha - pi| <= 0.2, |alpha_dot| <= 2.
bool in_swing_up_band(std::span<const double> x);

struct RolloutResult {
    std::vector<Transition> trajectory;
    State final_state;
    double discounted_return = 0.0;
    bool success = false;
    /// First step from which every later state stays in the band.
    std::optional<std::size_t> steps_to_success;
    bool aborted = false;

    bool operator==(const RolloutResult&) const = default;
};

double discounted_return(std::span<const Transition> trajectory, double gamma);

/// Runs the greedy policy on `plant` with Gaussian exploration added to the action and
/// clipped to the action box.
RolloutResult rollout(const StepFn& plant, const ValueFunction& value, const StepFn& model, const Reward& reward,
                      const RLConfig& config, const State& x0, std::size_t n_steps, double exploration_std,
                      std::mt19937_64& rng, const std::function<bool(std::span<const double>)>& band = in_swing_up_band);

/// Recorded states of a rollout (x_0 .. x_N) as an episode for dataset construction.
Episode rollout_episode(const RolloutResult& result);

std::string value_function_to_csv(const ValueFunction& value);
ValueFunction value_function_from_csv(std::string_view text);
void save_value_function(const ValueFunction& value, const std::filesystem::path& path);
ValueFunction load_value_function(const std::filesystem::path& path);

/// time,alpha,alpha_dot,u,r
std::string trajectory_to_csv(const RolloutResult& result, double ts, std::span<const std::string> state_names,
                              std::span<const std::string> input_names);

struct RefinementConfig {
    std::size_t initial_samples = 100;
    double input_limit = 5.0;
    std::size_t n_models = 30;
    std::size_t collection_steps = 50;
    std::vector<double> collection_stds{0.0, 0.0, 0.0, 0.0, 0.2, 0.3, 0.4, 0.5};
    std::size_t eval_rollouts = 50;
    std::size_t eval_steps = 100;
    /// Std of the initial-state perturbation for evaluation rollouts, per state.
    std::vector<double> eval_start_std{0.05, 0.5};
    std::size_t threads = 1;

    void validate() const;
};

struct RefinedModel {
    std::vector<FeatureModel> models;
    /// Test RMSE per target on the final test split.
    std::vector<double> test_rmse;
};

struct RefinementReport {
    std::string stage = "complete";
    std::string error;
    RefinedModel initial;
    RefinedModel refined;
    std::vector<double> initial_returns;
    std::vector<double> refined_returns;
    std::size_t initial_rows = 0;
    std::size_t refined_rows = 0;

    bool complete() const { return stage == "complete"; }
    /// stage,policy,rollout,return rows followed by model,target,test_rmse rows.
    std::string returns_csv() const;
    std::string rmse_csv() const;
    std::string summary() const;
};

/// Initial model from random-input data, VI, policy-driven data collection, refinement,
/// and evaluation of both policies on the plant. Failures leave a partial report whose
/// `stage` names the step that failed.
RefinementReport refinement_experiment(const StepFn& plant, const EvolveConfig& evolve_config,
                                       const RLConfig& rl_config, const RefinementConfig& config,
                                       std::uint64_t seed);

/// State transition built from per-state models over [x, u] regressors.
StepFn model_step(std::vector<FeatureModel> models);

} // namespace symrl
