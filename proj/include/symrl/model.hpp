#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "symrl/expr.hpp"

namespace symrl {

/// Raised for malformed or inconsistent data: dimension mismatches, parse
/// failures, too few samples.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout of the regressor vector.
///
/// State-space: [x_k, u_k]. NARX: [y_k, ..., y_{k-n_y+1}, u_{k-1}, ..., u_{k-n_u+1}, u_k],
/// i.e. the current input is always the final block.
struct RegressorSpec {
    enum class Mode { StateSpace, Narx };

    Mode mode = Mode::StateSpace;
    std::size_t output_dim = 0; ///< n for state-space models, dim(y) for NARX
    std::size_t input_dim = 0;
    std::size_t n_y = 1;
    std::size_t n_u = 1;
    std::vector<std::string> output_names;
    std::vector<std::string> input_names;

    static RegressorSpec state_space(std::vector<std::string> state_names, std::vector<std::string> input_names);
    static RegressorSpec narx(std::size_t n_y, std::size_t n_u, std::vector<std::string> output_names,
                              std::vector<std::string> input_names);

    std::size_t regressor_length() const;
    std::vector<std::string> regressor_names() const;
    std::vector<std::string> target_names() const;
};

/// Rectangular table of regressor rows and target rows. Always finite and non-empty.
class Dataset {
public:
    Dataset(Eigen::MatrixXd regressors, Eigen::MatrixXd targets, std::vector<std::string> regressor_names,
            std::vector<std::string> target_names, std::string provenance = {});

    const Eigen::MatrixXd& regressors() const { return regressors_; }
    const Eigen::MatrixXd& targets() const { return targets_; }
    const std::vector<std::string>& regressor_names() const { return regressor_names_; }
    const std::vector<std::string>& target_names() const { return target_names_; }
    const std::string& provenance() const { return provenance_; }

    std::size_t rows() const { return static_cast<std::size_t>(regressors_.rows()); }
    std::size_t regressor_length() const { return static_cast<std::size_t>(regressors_.cols()); }
    std::size_t n_targets() const { return static_cast<std::size_t>(targets_.cols()); }

    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset with_provenance(std::string provenance) const;

    bool operator==(const Dataset& other) const;

private:
    Eigen::MatrixXd regressors_;
    Eigen::MatrixXd targets_;
    std::vector<std::string> regressor_names_;
    std::vector<std::string> target_names_;
    std::string provenance_;
};

/// Stacks datasets with identical column layouts.
Dataset concat(std::span<const Dataset> parts);

/// Every third sample (indices 2, 5, 8, ...) goes to the test set.
struct TrainTestSplit {
    Dataset train;
    Dataset test;
};
TrainTestSplit split_every_third(const Dataset& data);

/// One recorded time step of an episode.
struct Step {
    std::vector<double> state;
    std::vector<double> input;
};
using Episode = std::vector<Step>;

/// One row per consecutive pair inside each episode; episodes with fewer than
/// two steps are skipped and counted in `skipped`.
Dataset build_state_space_dataset(std::span<const Episode> episodes, const RegressorSpec& spec,
                                  std::size_t* skipped = nullptr);

/// `outputs` may be one sample longer than `inputs` or of equal length.
Dataset build_narx_dataset(std::span<const std::vector<double>> outputs, std::span<const std::vector<double>> inputs,
                           std::size_t n_y, std::size_t n_u, const RegressorSpec& spec);
Dataset build_narx_dataset(std::span<const double> outputs, std::span<const double> inputs, std::size_t n_y,
                           std::size_t n_u);

/// intercept + sum_i coefficients[i] * features[i](regressor)
struct FeatureModel {
    std::vector<std::string> regressor_names;
    std::string target_name;
    std::vector<Expression> features;
    double intercept = 0.0;
    std::vector<double> coefficients;

    std::size_t total_nodes() const;
    bool operator==(const FeatureModel&) const = default;
};

/// Minimum-norm least-squares solution of design * beta ~= y.
struct LinearSolution {
    Eigen::VectorXd beta;
    Eigen::Index rank = 0;
};
LinearSolution solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Relative pivot threshold used to decide numerical rank.
inline constexpr double kRankTolerance = 1e-10;

struct FitReport {
    std::vector<std::size_t> excluded; ///< indices of features that were non-finite on some row
    Eigen::Index rank = 0;
};

/// Least-squares fit of intercept and coefficients over all rows of `data`.
/// Features that evaluate non-finite on any row are dropped and listed in the report.
FeatureModel fit_least_squares(const std::vector<Expression>& features, const Dataset& data, std::size_t target_index,
                               FitReport* report = nullptr);

double predict(const FeatureModel& model, std::span<const double> regressor);
Eigen::VectorXd predict_rows(const FeatureModel& model, const Eigen::MatrixXd& regressors);

double rmse(const FeatureModel& model, const Dataset& data, std::size_t target_index);

/// "b0 + b1 * f1 - b2 * f2 ..." using canonical expression text.
std::string model_to_text(const FeatureModel& model, int precision = 10);

/// Lossless line-oriented form used for model files.
std::string serialize_models(std::span<const FeatureModel> models);
std::vector<FeatureModel> deserialize_models(std::string_view text);
void save_models(std::span<const FeatureModel> models, const std::filesystem::path& path);
std::vector<FeatureModel> load_models(const std::filesystem::path& path);

} // namespace symrl
