#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "symrl/baseline.hpp"
#include "symrl/dynamics.hpp"
#include "symrl/evolve.hpp"
#include "symrl/rl.hpp"

namespace symrl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when value iteration stops at max_sweeps without meeting the tolerance.
class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNonConvergence = 4 };

/// Every setting of an experiment. The file form is `key = value` lines with `#` comments.
struct ExperimentConfig {
    std::string id = "custom";
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t runs = 11;
    std::size_t threads = 1;
    std::vector<std::size_t> n_s{20};
    std::vector<std::size_t> n_f{2};
    std::size_t test_points = 31;

    std::string system = "pendulum";
    Integrator integrator = Integrator::Euler;
    double ts = 0.05;
    std::vector<double> lambda{0.0};
    ExcitationConfig::Kind excitation = ExcitationConfig::Kind::UniformRandom;
    double input_limit = 5.0;
    double switching_probability = 0.1;

    EvolveConfig evolve;

    double gamma = 0.98;
    double action_min = -5.0;
    double action_max = 5.0;
    std::size_t action_levels = 11;
    std::size_t angle_points = 41;
    std::size_t velocity_points = 41;
    double velocity_limit = 40.0;
    double vi_tolerance = 1e-6;
    std::size_t max_sweeps = 5000;
    bool wrapped_reward = true;
    std::size_t rollout_steps = 100;
    double exploration_std = 0.0;

    RefinementConfig refine;
    Integrator refine_plant = Integrator::Euler;

    std::size_t llr_k = 10;
    std::size_t llr_capacity = 1000;
    bool llr_scale = false;

    /// Defaults for one of robot_c, pend_c1, pend_c2, pend_c3, custom.
    static ExperimentConfig preset(std::string_view id);
    /// Applies `experiment.id` first (if present), then every other key.
    static ExperimentConfig parse(std::string_view text);
    static ExperimentConfig load(const std::filesystem::path& path);
    std::string to_text() const;

    void set(std::string_view key, std::string_view value);
    static const std::vector<std::string>& keys();
    void validate() const;

    SystemSpec system_spec() const;
    RLConfig rl_config() const;
};

/// Runs one CLI invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace symrl
