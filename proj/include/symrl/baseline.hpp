#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "symrl/model.hpp"

namespace symrl {

/// Bounded store of (regressor, target) samples for local linear regression.
class LlrMemory {
public:
    enum class Overflow { Reject, EvictOldest };

    explicit LlrMemory(std::size_t capacity = 1000, Overflow overflow = Overflow::Reject);

    /// Returns false when the sample was rejected because the memory is full.
    bool insert(std::span<const double> regressor, std::span<const double> target);
    /// Inserts rows of `data` in order until the memory is full; returns the number stored.
    std::size_t insert_rows(const Dataset& data);

    std::size_t size() const { return regressors_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return regressors_.empty(); }
    const std::vector<double>& regressor(std::size_t i) const { return regressors_[i]; }
    const std::vector<double>& target(std::size_t i) const { return targets_[i]; }

private:
    std::size_t capacity_;
    Overflow overflow_;
    std::deque<std::vector<double>> regressors_;
    std::deque<std::vector<double>> targets_;
};

struct LlrOptions {
    std::size_t k = 10;
    /// Divide each regressor dimension by its spread in memory before measuring distance.
    bool scale_dimensions = false;
};

/// Affine least-squares fit on the k nearest stored samples, evaluated at the query.
/// Falls back to the neighbors' mean target when k < dim + 2 or the local fit is rank-deficient.
std::vector<double> llr_predict(const LlrMemory& memory, std::span<const double> query, const LlrOptions& options);

/// Per-target RMSE of llr_predict over all rows of `test`.
std::vector<double> llr_rmse(const LlrMemory& memory, const Dataset& test, const LlrOptions& options,
                             std::size_t threads = 1);

} // namespace symrl
