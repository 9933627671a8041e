#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "symrl/expr.hpp"
#include "symrl/model.hpp"

namespace symrl {

struct EvolveConfig {
    std::size_t population_size = 500;
    std::size_t generations = 30000;
    std::size_t n_f = 2;
    int max_depth = 7;
    FunctionSet function_set = FunctionSet::parse("add,sub,mul,sin,cos");
    std::uint64_t seed = 1;
    std::size_t target_index = 0;
    /// Stop once this many candidate least-squares fits were evaluated.
    std::optional<std::size_t> fitness_eval_budget;

    int init_max_depth = 4;
    std::size_t tournament_size = 3;
    /// Share of offspring produced by subtree crossover instead of mutation.
    double crossover_probability = 0.5;
    /// Generations between full rebuilds of the feature set from the population.
    std::size_t rebuild_interval = 100;

    void validate() const;
};

struct TracePoint {
    std::size_t generation = 0;
    double rmse = 0.0;
    bool operator==(const TracePoint&) const = default;
};

struct EvolveResult {
    FeatureModel best_model;
    double best_training_rmse = 0.0;
    /// Best-so-far training RMSE, appended whenever it improves.
    std::vector<TracePoint> fitness_trace;
    std::size_t evaluations = 0;
    std::size_t generations_run = 0;
    double wall_time_seconds = 0.0;
    /// Set when no candidate feature was ever finite and non-constant on the training rows.
    bool no_usable_features = false;
    std::size_t discarded_candidates = 0;
};

/// Steady-state search for a linear-in-parameters model of one target column.
///
/// Each generation a tournament-selected expression is mutated and replaces a weak
/// member of the population; the best feature set is then offered the mutant in every
/// slot (and as an extra feature while fewer than n_f are used). Coefficients are always
/// fitted by least squares and candidates compete on training MSE, ties going to the
/// smaller model. Every `rebuild_interval` generations a feature set is also rebuilt
/// greedily from the population members most correlated with the current residual.
/// The result depends only on (data, config).
EvolveResult evolve(const Dataset& data, const EvolveConfig& config);

/// One independent run per target column; column c uses derive_seed(config.seed, "target", {c}).
std::vector<EvolveResult> evolve_all_outputs(const Dataset& data, const EvolveConfig& config, std::size_t threads = 1);

/// Produces a fresh training set of n_s rows from a seed.
using DatasetGenerator = std::function<Dataset(std::size_t n_s, std::uint64_t seed)>;

struct MedianCell {
    std::string target;
    std::size_t target_index = 0;
    std::size_t n_f = 0;
    std::size_t n_s = 0;
    double median_rmse = 0.0;
    std::vector<double> run_rmses;
    /// Model of the run with the lowest test RMSE.
    FeatureModel best_model;
    std::vector<std::vector<TracePoint>> traces;
};

struct MedianTable {
    std::vector<MedianCell> cells;

    /// Header `target,n_f,n_s,median_rmse,runs`, rows ordered by (target, n_f, n_s).
    std::string to_csv() const;
    const MedianCell* find(std::string_view target, std::size_t n_f, std::size_t n_s) const;
};

struct MedianExperiment {
    DatasetGenerator generator;
    Dataset test;
    std::vector<std::size_t> n_f_values;
    std::vector<std::size_t> n_s_values;
    std::size_t n_runs = 11;
    EvolveConfig config_template;
    /// Target columns to model; empty means all.
    std::vector<std::size_t> targets;
    std::size_t threads = 1;
};

/// For every (n_s) a training set is generated from derive_seed(seed, "data", {n_s});
/// every (target, n_f, n_s) cell then runs n_runs evolutions and records the median
/// test RMSE.
MedianTable run_median_experiment(const MedianExperiment& experiment);

double median(std::vector<double> values);

/// Runs `jobs` indexed tasks on up to `threads` worker threads.
void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& task);

} // namespace symrl
