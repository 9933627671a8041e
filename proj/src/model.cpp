#include "symrl/model.hpp"

#include <algorithm>
#include <cmath>

namespace symrl {

RegressorSpec RegressorSpec::state_space(std::vector<std::string> state_names, std::vector<std::string> input_names) {
    RegressorSpec s;
    s.mode = Mode::StateSpace;
    s.output_dim = state_names.size();
    s.input_dim = input_names.size();
    s.output_names = std::move(state_names);
    s.input_names = std::move(input_names);
    return s;
}

RegressorSpec RegressorSpec::narx(std::size_t n_y, std::size_t n_u, std::vector<std::string> output_names,
                                  std::vector<std::string> input_names) {
    if (n_y < 1 || n_u < 1)
        throw std::invalid_argument("NARX lag orders must be at least 1");
    RegressorSpec s;
    s.mode = Mode::Narx;
    s.n_y = n_y;
    s.n_u = n_u;
    s.output_dim = output_names.size();
    s.input_dim = input_names.size();
    s.output_names = std::move(output_names);
    s.input_names = std::move(input_names);
    return s;
}

std::size_t RegressorSpec::regressor_length() const {
    if (mode == Mode::StateSpace)
        return output_dim + input_dim;
    return n_y * output_dim + (n_u - 1) * input_dim + input_dim;
}

std::vector<std::string> RegressorSpec::regressor_names() const {
    std::vector<std::string> names;
    if (mode == Mode::StateSpace) {
        names = output_names;
        names.insert(names.end(), input_names.begin(), input_names.end());
        return names;
    }
    auto lagged = [](const std::string& base, std::size_t lag) {
        return lag == 0 ? base + "_k" : base + "_km" + std::to_string(lag);
    };
    for (std::size_t lag = 0; lag < n_y; ++lag)
        for (const auto& y : output_names)
            names.push_back(lagged(y, lag));
    for (std::size_t lag = 1; lag < n_u; ++lag)
        for (const auto& u : input_names)
            names.push_back(lagged(u, lag));
    for (const auto& u : input_names)
        names.push_back(lagged(u, 0));
    return names;
}

std::vector<std::string> RegressorSpec::target_names() const {
    std::vector<std::string> names;
    for (const auto& y : output_names)
        names.push_back(mode == Mode::StateSpace ? y + "_next" : y + "_kp1");
    return names;
}

Dataset::Dataset(Eigen::MatrixXd regressors, Eigen::MatrixXd targets, std::vector<std::string> regressor_names,
                 std::vector<std::string> target_names, std::string provenance)
    : regressors_(std::move(regressors)), targets_(std::move(targets)), regressor_names_(std::move(regressor_names)),
      target_names_(std::move(target_names)), provenance_(std::move(provenance)) {
    if (regressors_.rows() < 1)
        throw DataError("dataset must contain at least one row");
    if (regressors_.rows() != targets_.rows())
        throw DataError("regressor and target row counts differ");
    if (static_cast<std::size_t>(regressors_.cols()) != regressor_names_.size() ||
        static_cast<std::size_t>(targets_.cols()) != target_names_.size())
        throw DataError("column names do not match column counts");
    if (!regressors_.allFinite() || !targets_.allFinite())
        throw DataError("dataset contains non-finite entries");
    std::vector<std::string> all = regressor_names_;
    all.insert(all.end(), target_names_.begin(), target_names_.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw DataError("duplicate column names");
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd r(static_cast<Eigen::Index>(rows.size()), regressors_.cols());
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), targets_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        r.row(static_cast<Eigen::Index>(i)) = regressors_.row(static_cast<Eigen::Index>(rows[i]));
        t.row(static_cast<Eigen::Index>(i)) = targets_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return Dataset(std::move(r), std::move(t), regressor_names_, target_names_, provenance_);
}

Dataset Dataset::with_provenance(std::string provenance) const {
    Dataset d = *this;
    d.provenance_ = std::move(provenance);
    return d;
}

bool Dataset::operator==(const Dataset& other) const {
    return regressor_names_ == other.regressor_names_ && target_names_ == other.target_names_ &&
           provenance_ == other.provenance_ && regressors_.rows() == other.regressors_.rows() &&
           regressors_.cols() == other.regressors_.cols() && targets_.cols() == other.targets_.cols() &&
           regressors_ == other.regressors_ && targets_ == other.targets_;
}

Dataset concat(std::span<const Dataset> parts) {
    if (parts.empty())
        throw DataError("nothing to concatenate");
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.regressor_names() != parts[0].regressor_names() || p.target_names() != parts[0].target_names())
            throw DataError("cannot concatenate datasets with different columns");
        rows += static_cast<Eigen::Index>(p.rows());
    }
    Eigen::MatrixXd r(rows, parts[0].regressors().cols());
    Eigen::MatrixXd t(rows, parts[0].targets().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        const auto n = static_cast<Eigen::Index>(p.rows());
        r.middleRows(at, n) = p.regressors();
        t.middleRows(at, n) = p.targets();
        at += n;
    }
    return Dataset(std::move(r), std::move(t), parts[0].regressor_names(), parts[0].target_names(),
                   parts[0].provenance());
}

TrainTestSplit split_every_third(const Dataset& data) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.rows(); ++i)
        (i % 3 == 2 ? test : train).push_back(i);
    if (test.empty())
        throw DataError("too few rows for a train/test split");
    return {data.select_rows(train), data.select_rows(test)};
}

Dataset build_state_space_dataset(std::span<const Episode> episodes, const RegressorSpec& spec, std::size_t* skipped) {
    if (spec.mode != RegressorSpec::Mode::StateSpace)
        throw std::invalid_argument("build_state_space_dataset needs a state-space regressor spec");
    const std::size_t n = spec.output_dim;
    const std::size_t m = spec.input_dim;
    std::size_t rows = 0, skip = 0;
    for (const auto& ep : episodes) {
        if (ep.size() < 2) {
            ++skip;
            continue;
        }
        for (const auto& s : ep)
            if (s.state.size() != n || s.input.size() != m)
                throw DataError("episode step dimensions do not match the regressor spec");
        rows += ep.size() - 1;
    }
    if (skipped)
        *skipped = skip;
    if (rows == 0)
        throw DataError("no episode has at least two steps");

    Eigen::MatrixXd r(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n + m));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    Eigen::Index row = 0;
    for (const auto& ep : episodes) {
        if (ep.size() < 2)
            continue;
        for (std::size_t k = 0; k + 1 < ep.size(); ++k, ++row) {
            for (std::size_t j = 0; j < n; ++j) {
                r(row, static_cast<Eigen::Index>(j)) = ep[k].state[j];
                t(row, static_cast<Eigen::Index>(j)) = ep[k + 1].state[j];
            }
            for (std::size_t j = 0; j < m; ++j)
                r(row, static_cast<Eigen::Index>(n + j)) = ep[k].input[j];
        }
    }
    return Dataset(std::move(r), std::move(t), spec.regressor_names(), spec.target_names());
}

Dataset build_narx_dataset(std::span<const std::vector<double>> outputs, std::span<const std::vector<double>> inputs,
                           std::size_t n_y, std::size_t n_u, const RegressorSpec& spec) {
    if (n_y < 1 || n_u < 1)
        throw std::invalid_argument("NARX lag orders must be at least 1");
    if (outputs.size() != inputs.size() && outputs.size() != inputs.size() + 1)
        throw DataError("NARX record needs as many outputs as inputs, or one more");
    const std::size_t dy = spec.output_dim, du = spec.input_dim;
    for (const auto& y : outputs)
        if (y.size() != dy)
            throw DataError("output dimension does not match the regressor spec");
    for (const auto& u : inputs)
        if (u.size() != du)
            throw DataError("input dimension does not match the regressor spec");

    const std::size_t first = std::max(n_y, n_u) - 1;
    if (outputs.size() < 2)
        throw DataError("too few samples to form any NARX row");
    // Need y_{k+1} and u_k.
    const std::size_t last_plus_one = std::min(outputs.size() - 1, inputs.size());
    if (last_plus_one <= first)
        throw DataError("too few samples to form any NARX row");
    const std::size_t rows = last_plus_one - first;

    RegressorSpec s = spec;
    s.mode = RegressorSpec::Mode::Narx;
    s.n_y = n_y;
    s.n_u = n_u;
    Eigen::MatrixXd r(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(s.regressor_length()));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dy));
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t k = first + i;
        const auto row = static_cast<Eigen::Index>(i);
        Eigen::Index col = 0;
        for (std::size_t lag = 0; lag < n_y; ++lag)
            for (double v : outputs[k - lag])
                r(row, col++) = v;
        for (std::size_t lag = 1; lag < n_u; ++lag)
            for (double v : inputs[k - lag])
                r(row, col++) = v;
        for (double v : inputs[k])
            r(row, col++) = v;
        for (std::size_t j = 0; j < dy; ++j)
            t(row, static_cast<Eigen::Index>(j)) = outputs[k + 1][j];
    }
    return Dataset(std::move(r), std::move(t), s.regressor_names(), s.target_names());
}

Dataset build_narx_dataset(std::span<const double> outputs, std::span<const double> inputs, std::size_t n_y,
                           std::size_t n_u) {
    std::vector<std::vector<double>> y, u;
    for (double v : outputs)
        y.push_back({v});
    for (double v : inputs)
        u.push_back({v});
    return build_narx_dataset(y, u, n_y, n_u, RegressorSpec::narx(n_y, n_u, {"y"}, {"u"}));
}

std::size_t FeatureModel::total_nodes() const {
    std::size_t n = 0;
    for (const auto& f : features)
        n += f.size();
    return n;
}

LinearSolution solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(kRankTolerance);
    cod.compute(design);
    return {cod.solve(y), cod.rank()};
}

FeatureModel fit_least_squares(const std::vector<Expression>& features, const Dataset& data, std::size_t target_index,
                               FitReport* report) {
    if (target_index >= data.n_targets())
        throw DataError("target index " + std::to_string(target_index) + " out of range");
    FitReport rep;
    std::vector<Expression> kept;
    std::vector<Eigen::VectorXd> columns;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].max_variable() >= static_cast<long>(data.regressor_length()))
            throw StructuralError("feature references a variable past the regressor length");
        Eigen::VectorXd c = evaluate_rows(features[i], data.regressors());
        if (!c.allFinite()) {
            rep.excluded.push_back(i);
            continue;
        }
        kept.push_back(features[i]);
        columns.push_back(std::move(c));
    }

    const auto rows = static_cast<Eigen::Index>(data.rows());
    Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(kept.size() + 1));
    design.col(0).setOnes();
    for (std::size_t j = 0; j < columns.size(); ++j)
        design.col(static_cast<Eigen::Index>(j + 1)) = columns[j];
    const LinearSolution sol = solve_least_squares(design, data.targets().col(static_cast<Eigen::Index>(target_index)));
    rep.rank = sol.rank;

    FeatureModel model;
    model.regressor_names = data.regressor_names();
    model.target_name = data.target_names()[target_index];
    model.features = std::move(kept);
    model.intercept = sol.beta(0);
    model.coefficients.assign(sol.beta.data() + 1, sol.beta.data() + sol.beta.size());
    if (report)
        *report = std::move(rep);
    return model;
}

double predict(const FeatureModel& model, std::span<const double> regressor) {
    double y = model.intercept;
    for (std::size_t i = 0; i < model.features.size(); ++i)
        y += model.coefficients[i] * evaluate(model.features[i], regressor);
    return y;
}

Eigen::VectorXd predict_rows(const FeatureModel& model, const Eigen::MatrixXd& regressors) {
    Eigen::VectorXd y = Eigen::VectorXd::Constant(regressors.rows(), model.intercept);
    for (std::size_t i = 0; i < model.features.size(); ++i)
        y += model.coefficients[i] * evaluate_rows(model.features[i], regressors);
    return y;
}

double rmse(const FeatureModel& model, const Dataset& data, std::size_t target_index) {
    if (target_index >= data.n_targets())
        throw DataError("target index out of range");
    const Eigen::VectorXd err =
        predict_rows(model, data.regressors()) - data.targets().col(static_cast<Eigen::Index>(target_index));
    return std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
}

std::string model_to_text(const FeatureModel& model, int precision) {
    std::string s = format_fixed(model.intercept, precision);
    for (std::size_t i = 0; i < model.features.size(); ++i) {
        const double c = model.coefficients[i];
        s += std::signbit(c) ? " - " : " + ";
        s += format_fixed(std::abs(c), precision);
        s += " * ";
        s += to_canonical_text(model.features[i], precision);
    }
    return s;
}

} // namespace symrl
