#include "symrl/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "symrl/evolve.hpp"

namespace symrl {

LlrMemory::LlrMemory(std::size_t capacity, Overflow overflow) : capacity_(capacity), overflow_(overflow) {
    if (capacity == 0)
        throw std::invalid_argument("LLR memory capacity must be positive");
}

bool LlrMemory::insert(std::span<const double> regressor, std::span<const double> target) {
    if (!regressors_.empty() &&
        (regressor.size() != regressors_.front().size() || target.size() != targets_.front().size()))
        throw DataError("LLR sample dimensions differ from the stored samples");
    for (double v : regressor)
        if (!std::isfinite(v))
            throw DataError("LLR regressor is not finite");
    for (double v : target)
        if (!std::isfinite(v))
            throw DataError("LLR target is not finite");
    if (regressors_.size() == capacity_) {
        if (overflow_ == Overflow::Reject)
            return false;
        regressors_.pop_front();
        targets_.pop_front();
    }
    regressors_.emplace_back(regressor.begin(), regressor.end());
    targets_.emplace_back(target.begin(), target.end());
    return true;
}

std::size_t LlrMemory::insert_rows(const Dataset& data) {
    std::size_t stored = 0;
    std::vector<double> r(data.regressor_length()), t(data.n_targets());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j)
            r[j] = data.regressors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        for (std::size_t j = 0; j < t.size(); ++j)
            t[j] = data.targets()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (!insert(r, t))
            break;
        ++stored;
    }
    return stored;
}

namespace {

std::vector<double> dimension_scales(const LlrMemory& memory, bool enabled) {
    const std::size_t dim = memory.regressor(0).size();
    std::vector<double> scale(dim, 1.0);
    if (!enabled)
        return scale;
    for (std::size_t d = 0; d < dim; ++d) {
        double lo = memory.regressor(0)[d], hi = lo;
        for (std::size_t i = 1; i < memory.size(); ++i) {
            lo = std::min(lo, memory.regressor(i)[d]);
            hi = std::max(hi, memory.regressor(i)[d]);
        }
        scale[d] = hi > lo ? 1.0 / (hi - lo) : 1.0;
    }
    return scale;
}

std::vector<double> predict_scaled(const LlrMemory& memory, std::span<const double> query, std::size_t k,
                                   const std::vector<double>& scale) {
    const std::size_t dim = scale.size();
    if (query.size() != dim)
        throw DataError("LLR query has " + std::to_string(query.size()) + " dimensions, memory has " +
                        std::to_string(dim));
    const std::size_t n = memory.size();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = (memory.regressor(i)[d] - query[d]) * scale[d];
            s += diff * diff;
        }
        dist[i] = s;
    }
    k = std::min(k, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });

    const std::size_t n_out = memory.target(0).size();
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_out));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n_out; ++j)
            targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = memory.target(order[i])[j];

    if (k >= dim + 2) {
        // Columns: 1, (x - query); the intercept is then the prediction at the query.
        Eigen::MatrixXd design(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim + 1));
        for (std::size_t i = 0; i < k; ++i) {
            design(static_cast<Eigen::Index>(i), 0) = 1.0;
            for (std::size_t d = 0; d < dim; ++d)
                design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d + 1)) =
                    memory.regressor(order[i])[d] - query[d];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() == design.cols()) {
            const Eigen::MatrixXd beta = qr.solve(targets);
            if (beta.allFinite()) {
                const Eigen::VectorXd at_query = beta.row(0).transpose();
                return {at_query.data(), at_query.data() + at_query.size()};
            }
        }
    }
    const Eigen::VectorXd mean = targets.colwise().mean().transpose();
    return {mean.data(), mean.data() + mean.size()};
}

} // namespace

std::vector<double> llr_predict(const LlrMemory& memory, std::span<const double> query, const LlrOptions& options) {
    if (memory.empty())
        throw DataError("LLR memory is empty");
    if (options.k < 1)
        throw std::invalid_argument("k must be at least 1");
    return predict_scaled(memory, query, options.k, dimension_scales(memory, options.scale_dimensions));
}

std::vector<double> llr_rmse(const LlrMemory& memory, const Dataset& test, const LlrOptions& options,
                             std::size_t threads) {
    if (memory.empty())
        throw DataError("LLR memory is empty");
    if (options.k < 1)
        throw std::invalid_argument("k must be at least 1");
    if (memory.target(0).size() != test.n_targets())
        throw DataError("LLR memory and test set have different target counts");
    const auto scale = dimension_scales(memory, options.scale_dimensions);
    const std::size_t rows = test.rows();
    Eigen::MatrixXd sq(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(test.n_targets()));
    parallel_for(rows, threads, [&](std::size_t i) {
        const Eigen::VectorXd q = test.regressors().row(static_cast<Eigen::Index>(i)).transpose();
        const auto pred = predict_scaled(memory, {q.data(), static_cast<std::size_t>(q.size())}, options.k, scale);
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const double e = pred[j] - test.targets()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            sq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e * e;
        }
    });
    std::vector<double> out(test.n_targets());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = std::sqrt(sq.col(static_cast<Eigen::Index>(j)).mean());
    return out;
}

} // namespace symrl
