#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "symrl/model.hpp"

namespace symrl {

using State = std::vector<double>;

/// Continuous-time vector field dx/dt = f(x, u).
using Derivative = std::function<State(std::span<const double> x, std::span<const double> u)>;
/// Discrete-time transition x_{k+1} = f(x_k, u_k).
using StepFn = std::function<State(std::span<const double> x, std::span<const double> u)>;

/// Physical constants of the rotational pendulum, SI units.
struct PendulumParams {
    double J = 1.7937e-4;  ///< inertia, kg m^2
    double m = 0.055;      ///< mass, kg
    double g = 9.81;       ///< gravity, m s^-2
    double l = 0.042;      ///< center of mass distance, m
    double b = 1.94e-5;    ///< viscous friction, N m s rad^-1
    double K = 0.0536;     ///< torque constant, N m A^-1
    double R = 9.5;        ///< rotor resistance, ohm
    double c = 8.5e-4;     ///< Coulomb friction, kg m^2 s^-2

    void validate() const;
};

struct SimClock {
    double ts = 0.05;
};

/// (alpha, alpha_dot), volts -> (alpha_dot, alpha_ddot)
State pendulum_derivative(std::span<const double> x, std::span<const double> u, const PendulumParams& p = {});
/// (x_pos, y_pos, phi), (v_f, v_a) -> (x_pos', y_pos', phi')
State mobile_robot_derivative(std::span<const double> x, std::span<const double> u);

State euler_step(const Derivative& f, std::span<const double> x, std::span<const double> u, double ts);
/// Classical RK4 with u held constant over the step.
State rk4_step(const Derivative& f, std::span<const double> x, std::span<const double> u, double ts);

enum class Integrator { Euler, Rk4 };
StepFn make_step(Derivative f, Integrator integrator, double ts);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Reference system with its nominal operating domain.
struct SystemSpec {
    std::string name;
    std::vector<std::string> state_names;
    std::vector<std::string> input_names;
    std::vector<Range> state_ranges;
    std::vector<Range> input_ranges;
    Derivative derivative;

    RegressorSpec regressor_spec() const { return RegressorSpec::state_space(state_names, input_names); }
};

SystemSpec pendulum_system(const PendulumParams& p = {});
SystemSpec mobile_robot_system();

/// Two-level sequence in {-amplitude, +amplitude} whose sign flips with probability p at each step.
std::vector<double> gbn_signal(std::size_t n_steps, double amplitude, double p, std::mt19937_64& rng);

/// Runs `step` from x0 applying inputs[k] at step k. The last recorded step carries a
/// zero input that is never applied.
Episode simulate(const StepFn& step, const State& x0, std::span<const std::vector<double>> inputs);

/// Inputs drawn uniformly from `input_ranges` independently at every step.
Episode random_trajectory(const StepFn& step, const State& x0, std::span<const Range> input_ranges,
                          std::size_t n_steps, std::mt19937_64& rng);

/// Cartesian grid over state x input ranges; targets are step(x, u). Row order is
/// lexicographic with the first dimension varying slowest.
Dataset grid_dataset(std::span<const Range> state_ranges, std::span<const Range> input_ranges,
                     std::span<const std::size_t> points_per_dim, const StepFn& step, const RegressorSpec& spec);

struct NoiseConfig {
    double lambda = 0.0;
    /// Per-state scale; the pendulum uses (pi, 40).
    std::vector<double> scales{std::numbers::pi, 40.0};
};

/// x_i + scales_i * lambda * N(0, 1) for each component.
State add_noise(std::span<const double> x, const NoiseConfig& cfg, std::mt19937_64& rng);
/// Copy of `data` whose state regressor columns (the leading ones) and target columns are
/// corrupted independently row by row; inputs untouched.
Dataset add_noise(const Dataset& data, const NoiseConfig& cfg, std::mt19937_64& rng);

struct ExcitationConfig {
    enum class Kind { UniformRandom, Gbn };
    Kind kind = Kind::UniformRandom;
    std::vector<Range> ranges;
    double switching_probability = 0.1;
    std::size_t steps = 100;

    void validate() const;
};

/// Input sequence for `cfg.steps` steps; GBN levels are the range end points.
std::vector<std::vector<double>> excitation_inputs(const ExcitationConfig& cfg, std::mt19937_64& rng);

/// Independent one-step (or short) episodes with initial state and constant input drawn
/// uniformly from the robot's ranges; returns n_s rows.
Dataset robot_training_dataset(std::size_t n_s, double ts, std::mt19937_64& rng, std::size_t steps_per_episode = 1);

struct PendulumDataConfig {
    std::size_t n_s = 20;
    Integrator integrator = Integrator::Euler;
    double ts = 0.05;
    double lambda = 0.0;
    ExcitationConfig::Kind excitation = ExcitationConfig::Kind::UniformRandom;
    double input_limit = 5.0;
    double switching_probability = 0.1;
};

/// Single episode from rest with n_s transitions; noise, if any, corrupts the recorded rows only.
Dataset pendulum_training_dataset(const PendulumDataConfig& cfg, std::mt19937_64& rng);

/// Regular test grid over the system's nominal state and input ranges.
Dataset system_grid_dataset(const SystemSpec& sys, std::size_t points_per_dim, const StepFn& step);

/// CSV parse failure with location.
class CsvError : public DataError {
public:
    CsvError(std::size_t row, std::string column, const std::string& what);
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text);

} // namespace symrl
