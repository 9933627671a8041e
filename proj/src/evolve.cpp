#include "symrl/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "symrl/seed.hpp"

namespace symrl {

void EvolveConfig::validate() const {
    if (n_f < 1)
        throw std::invalid_argument("n_f must be at least 1");
    if (population_size < n_f)
        throw std::invalid_argument("population_size must be at least n_f");
    if (generations < 1)
        throw std::invalid_argument("generations must be at least 1");
    if (max_depth < 0)
        throw std::invalid_argument("max_depth must be non-negative");
    if (tournament_size < 1)
        throw std::invalid_argument("tournament_size must be at least 1");
    if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0))
        throw std::invalid_argument("crossover_probability must lie in [0, 1]");
    if (rebuild_interval < 1)
        throw std::invalid_argument("rebuild_interval must be at least 1");
}

namespace {

struct Individual {
    Expression expr;
    Eigen::VectorXd centered;
    double sq_norm = 0.0;
    double score = 0.0;
};

struct Candidate {
    std::vector<std::size_t> members;
    double sse = std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
};

class Engine {
public:
    Engine(const Dataset& data, const EvolveConfig& cfg)
        : data_(data), cfg_(cfg), rng_(cfg.seed), n_vars_(static_cast<std::uint32_t>(data.regressor_length())) {
        const Eigen::VectorXd y = data.targets().col(static_cast<Eigen::Index>(cfg.target_index));
        yc_ = y.array() - y.mean();
        yy_ = yc_.squaredNorm();
        rows_ = static_cast<double>(data.rows());
    }

    EvolveResult run() {
        const auto start = std::chrono::steady_clock::now();
        EvolveResult result;

        best_.sse = yy_;
        residual_ = yc_;
        trace_.push_back({0, std::sqrt(yy_ / rows_)});

        if (yy_ > 0.0) {
            initialize_population();
            rebuild(0);
            std::size_t g = 1;
            for (; g <= cfg_.generations && !budget_exhausted() && best_.sse > 0.0; ++g) {
                step(g);
                if (g % cfg_.rebuild_interval == 0) {
                    rebuild(g);
                    refresh_scores();
                }
            }
            result.generations_run = g - 1;
        }

        std::vector<Expression> features;
        for (std::size_t i : best_.members)
            features.push_back(pop_[i].expr);
        result.best_model = fit_least_squares(features, data_, cfg_.target_index);
        result.best_training_rmse = rmse(result.best_model, data_, cfg_.target_index);
        result.fitness_trace = std::move(trace_);
        result.evaluations = evaluations_;
        result.no_usable_features = yy_ > 0.0 && !seen_usable_;
        result.discarded_candidates = discarded_;
        result.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    }

private:
    bool budget_exhausted() const { return cfg_.fitness_eval_budget && evaluations_ >= *cfg_.fitness_eval_budget; }

    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    std::optional<Individual> make_individual(Expression expr) {
        if (depth(expr) > cfg_.max_depth)
            throw std::logic_error("expression exceeds the configured maximum depth");
        const Eigen::VectorXd col = evaluate_rows(expr, data_.regressors());
        if (!col.allFinite()) {
            ++discarded_;
            return std::nullopt;
        }
        Individual ind{std::move(expr), col.array() - col.mean(), 0.0, 0.0};
        ind.sq_norm = ind.centered.squaredNorm();
        // Constant columns duplicate the intercept.
        if (!std::isfinite(ind.sq_norm) || ind.sq_norm <= 1e-20 * col.squaredNorm()) {
            ++discarded_;
            return std::nullopt;
        }
        seen_usable_ = true;
        ind.score = score_of(ind);
        return ind;
    }

    double score_of(const Individual& ind) const {
        const double rr = residual_.squaredNorm();
        if (!(rr > 1e-30 * yy_))
            return 0.0;
        return std::abs(ind.centered.dot(residual_)) / std::sqrt(ind.sq_norm * rr);
    }

    void refresh_scores() {
        for (auto& ind : pop_)
            ind.score = score_of(ind);
    }

    void initialize_population() {
        const int init_depth = std::min(cfg_.init_max_depth, cfg_.max_depth);
        const std::size_t attempts = cfg_.population_size * 20;
        for (std::size_t a = 0; a < attempts && pop_.size() < cfg_.population_size; ++a) {
            const int d = std::uniform_int_distribution<int>(0, std::max(init_depth, 0))(rng_);
            if (auto ind = make_individual(random_expression(cfg_.function_set, n_vars_, d, rng_)))
                pop_.push_back(std::move(*ind));
        }
    }

    bool is_member(std::size_t i) const {
        return std::find(best_.members.begin(), best_.members.end(), i) != best_.members.end();
    }

    bool ranks_higher(std::size_t a, std::size_t b) const {
        if (pop_[a].score != pop_[b].score)
            return pop_[a].score > pop_[b].score;
        return pop_[a].expr.size() < pop_[b].expr.size();
    }

    std::size_t tournament_best() {
        std::size_t best = pick(pop_.size());
        for (std::size_t t = 1; t < cfg_.tournament_size; ++t) {
            const std::size_t c = pick(pop_.size());
            if (ranks_higher(c, best))
                best = c;
        }
        return best;
    }

    std::optional<std::size_t> tournament_worst() {
        if (pop_.size() <= best_.members.size())
            return std::nullopt;
        std::optional<std::size_t> worst;
        for (std::size_t t = 0; t < cfg_.tournament_size; ++t) {
            std::size_t c = pick(pop_.size());
            while (is_member(c))
                c = pick(pop_.size());
            if (!worst || ranks_higher(*worst, c))
                worst = c;
        }
        return worst;
    }

    std::size_t nodes_of(const std::vector<std::size_t>& members) const {
        std::size_t n = 0;
        for (std::size_t i : members)
            n += pop_[i].expr.size();
        return n;
    }

    /// Exact residual sum of squares of the centered fit.
    double exact_sse(const std::vector<std::size_t>& members, Eigen::VectorXd* residual = nullptr) {
        ++evaluations_;
        if (members.empty()) {
            if (residual)
                *residual = yc_;
            return yy_;
        }
        Eigen::MatrixXd design(yc_.size(), static_cast<Eigen::Index>(members.size()));
        for (std::size_t j = 0; j < members.size(); ++j)
            design.col(static_cast<Eigen::Index>(j)) = pop_[members[j]].centered;
        const LinearSolution sol = solve_least_squares(design, yc_);
        Eigen::VectorXd r = yc_ - design * sol.beta;
        const double sse = r.squaredNorm();
        if (residual)
            *residual = std::move(r);
        return sse;
    }

    /// Screening estimate of the SSE from the Gram matrix of centered columns.
    double gram_sse(const Eigen::MatrixXd& gram, const Eigen::VectorXd& b) {
        ++evaluations_;
        const Eigen::VectorXd scale = gram.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd g = scale.asDiagonal() * gram * scale.asDiagonal();
        const Eigen::VectorXd bs = scale.cwiseProduct(b);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
        cod.setThreshold(kRankTolerance);
        cod.compute(g);
        const Eigen::VectorXd beta = cod.solve(bs);
        return std::max(0.0, yy_ - bs.dot(beta));
    }

    void update_gram() {
        const auto k = static_cast<Eigen::Index>(best_.members.size());
        gram_.resize(k, k);
        gram_b_.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto& ci = pop_[best_.members[static_cast<std::size_t>(i)]].centered;
            gram_b_(i) = ci.dot(yc_);
            for (Eigen::Index j = 0; j <= i; ++j)
                gram_(i, j) = gram_(j, i) = ci.dot(pop_[best_.members[static_cast<std::size_t>(j)]].centered);
        }
    }

    /// Accepts `cand` if it improves on the best, with parsimony on negligible differences.
    bool offer(Candidate cand, std::size_t generation) {
        const double tol = 1e-10 * best_.sse + 1e-28 * yy_;
        const bool clearly_better = cand.sse < best_.sse - tol;
        const bool tie_smaller = cand.sse <= best_.sse && cand.nodes < best_.nodes;
        if (!clearly_better && !tie_smaller)
            return false;
        const bool improved = cand.sse < best_.sse;
        best_ = std::move(cand);
        exact_sse(best_.members, &residual_);
        update_gram();
        if (improved) {
            const TracePoint point{generation, std::sqrt(best_.sse / rows_)};
            if (!trace_.empty() && trace_.back().generation == generation)
                trace_.back() = point;
            else
                trace_.push_back(point);
        }
        return true;
    }

    void step(std::size_t generation) {
        std::optional<Individual> child;
        if (pop_.empty())
            child = make_individual(random_expression(cfg_.function_set, n_vars_,
                                                      std::min(cfg_.init_max_depth, cfg_.max_depth), rng_));
        else if (pop_.size() > 1 && std::bernoulli_distribution(cfg_.crossover_probability)(rng_))
            child = make_individual(
                crossover(pop_[tournament_best()].expr, pop_[tournament_best()].expr, cfg_.max_depth, rng_));
        else
            child = make_individual(
                mutate(pop_[tournament_best()].expr, cfg_.function_set, n_vars_, cfg_.max_depth, rng_));
        if (!child)
            return;

        std::size_t slot = pop_.size();
        if (pop_.size() < cfg_.population_size) {
            pop_.push_back(std::move(*child));
        } else {
            const auto victim = tournament_worst();
            if (!victim)
                return;
            slot = *victim;
            pop_[slot] = std::move(*child);
        }
        const Individual& c = pop_[slot];

        const std::size_t k = best_.members.size();
        Eigen::VectorXd cross(static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < k; ++j)
            cross(static_cast<Eigen::Index>(j)) = pop_[best_.members[j]].centered.dot(c.centered);
        const double cy = c.centered.dot(yc_);

        Candidate screened;
        double screened_sse = std::numeric_limits<double>::infinity();
        auto consider = [&](std::vector<std::size_t> members, const Eigen::MatrixXd& g, const Eigen::VectorXd& b) {
            const double sse = gram_sse(g, b);
            const std::size_t nodes = nodes_of(members);
            if (sse < screened_sse || (sse == screened_sse && nodes < screened.nodes)) {
                screened_sse = sse;
                screened = {std::move(members), sse, nodes};
            }
        };

        for (std::size_t j = 0; j < k; ++j) {
            Eigen::MatrixXd g = gram_;
            Eigen::VectorXd b = gram_b_;
            g.row(static_cast<Eigen::Index>(j)) = cross.transpose();
            g.col(static_cast<Eigen::Index>(j)) = cross;
            g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = c.sq_norm;
            b(static_cast<Eigen::Index>(j)) = cy;
            auto members = best_.members;
            members[j] = slot;
            consider(std::move(members), g, b);
        }
        if (k < cfg_.n_f) {
            const auto kk = static_cast<Eigen::Index>(k);
            Eigen::MatrixXd g(kk + 1, kk + 1);
            g.topLeftCorner(kk, kk) = gram_;
            g.block(0, kk, kk, 1) = cross;
            g.block(kk, 0, 1, kk) = cross.transpose();
            g(kk, kk) = c.sq_norm;
            Eigen::VectorXd b(kk + 1);
            b.head(kk) = gram_b_;
            b(kk) = cy;
            auto members = best_.members;
            members.push_back(slot);
            consider(std::move(members), g, b);
        }

        // The Gram estimate loses precision near zero residual, so anything within its
        // resolution of the incumbent is checked exactly.
        if (screened.members.empty() || screened_sse > best_.sse + 1e-12 * yy_)
            return;
        screened.sse = exact_sse(screened.members);
        offer(std::move(screened), generation);
    }

    /// Greedy forward selection of up to n_f members by correlation with the running residual.
    void rebuild(std::size_t generation) {
        if (pop_.empty())
            return;
        Candidate cand;
        Eigen::VectorXd r = yc_;
        double sse = yy_;
        for (std::size_t step = 0; step < cfg_.n_f && step < pop_.size(); ++step) {
            const double rr = r.squaredNorm();
            if (!(rr > 1e-30 * yy_))
                break;
            std::optional<std::size_t> pick_i;
            double pick_score = -1.0;
            for (std::size_t i = 0; i < pop_.size(); ++i) {
                if (std::find(cand.members.begin(), cand.members.end(), i) != cand.members.end())
                    continue;
                const double s = std::abs(pop_[i].centered.dot(r)) / std::sqrt(pop_[i].sq_norm);
                if (s > pick_score || (s == pick_score && pop_[i].expr.size() < pop_[*pick_i].expr.size())) {
                    pick_score = s;
                    pick_i = i;
                }
            }
            if (!pick_i)
                break;
            cand.members.push_back(*pick_i);
            sse = exact_sse(cand.members, &r);
        }
        cand.sse = sse;
        cand.nodes = nodes_of(cand.members);
        offer(std::move(cand), generation);
    }

    const Dataset& data_;
    const EvolveConfig& cfg_;
    std::mt19937_64 rng_;
    std::uint32_t n_vars_;
    Eigen::VectorXd yc_;
    double yy_ = 0.0;
    double rows_ = 1.0;

    std::vector<Individual> pop_;
    Candidate best_;
    Eigen::VectorXd residual_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd gram_b_;
    std::vector<TracePoint> trace_;
    std::size_t evaluations_ = 0;
    std::size_t discarded_ = 0;
    bool seen_usable_ = false;
};

} // namespace

EvolveResult evolve(const Dataset& data, const EvolveConfig& config) {
    config.validate();
    if (config.target_index >= data.n_targets())
        throw DataError("target index " + std::to_string(config.target_index) + " out of range");
    return Engine(data, config).run();
}

void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& task) {
    threads = std::max<std::size_t>(1, std::min(threads, jobs));
    if (threads == 1) {
        for (std::size_t i = 0; i < jobs; ++i)
            task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < jobs; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& w : workers)
        w.join();
    if (error)
        std::rethrow_exception(error);
}

std::vector<EvolveResult> evolve_all_outputs(const Dataset& data, const EvolveConfig& config, std::size_t threads) {
    if (data.n_targets() < 1)
        throw DataError("dataset has no target columns");
    std::vector<EvolveResult> results(data.n_targets());
    parallel_for(data.n_targets(), threads, [&](std::size_t c) {
        EvolveConfig cfg = config;
        cfg.target_index = c;
        cfg.seed = derive_seed(config.seed, "target", {c});
        results[c] = evolve(data, cfg);
    });
    return results;
}

double median(std::vector<double> values) {
    if (values.empty())
        throw std::invalid_argument("median of an empty sequence");
    std::sort(values.begin(), values.end(), [](double a, double b) {
        // NaN sorts last.
        if (std::isnan(a))
            return false;
        if (std::isnan(b))
            return true;
        return a < b;
    });
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string MedianTable::to_csv() const {
    std::vector<const MedianCell*> sorted;
    for (const auto& c : cells)
        sorted.push_back(&c);
    std::stable_sort(sorted.begin(), sorted.end(), [](const MedianCell* a, const MedianCell* b) {
        return std::tie(a->target, a->n_f, a->n_s) < std::tie(b->target, b->n_f, b->n_s);
    });
    std::ostringstream out;
    out << "target,n_f,n_s,median_rmse,runs\n";
    out.precision(17);
    for (const auto* c : sorted)
        out << c->target << ',' << c->n_f << ',' << c->n_s << ',' << c->median_rmse << ',' << c->run_rmses.size()
            << '\n';
    return out.str();
}

const MedianCell* MedianTable::find(std::string_view target, std::size_t n_f, std::size_t n_s) const {
    for (const auto& c : cells)
        if (c.target == target && c.n_f == n_f && c.n_s == n_s)
            return &c;
    return nullptr;
}

MedianTable run_median_experiment(const MedianExperiment& ex) {
    if (ex.n_runs < 1)
        throw std::invalid_argument("n_runs must be at least 1");
    const std::uint64_t seed = ex.config_template.seed;

    std::vector<Dataset> train;
    for (std::size_t n_s : ex.n_s_values)
        train.push_back(ex.generator(n_s, derive_seed(seed, "data", {n_s})));

    std::vector<std::size_t> targets = ex.targets;
    if (targets.empty()) {
        targets.resize(ex.test.n_targets());
        std::iota(targets.begin(), targets.end(), 0);
    }

    struct Job {
        std::size_t cell, run;
    };
    MedianTable table;
    std::vector<Job> jobs;
    std::vector<std::size_t> cell_data;
    for (std::size_t t : targets)
        for (std::size_t n_f : ex.n_f_values)
            for (std::size_t s = 0; s < ex.n_s_values.size(); ++s) {
                MedianCell cell;
                cell.target = ex.test.target_names().at(t);
                cell.target_index = t;
                cell.n_f = n_f;
                cell.n_s = ex.n_s_values[s];
                cell.run_rmses.assign(ex.n_runs, 0.0);
                cell.traces.resize(ex.n_runs);
                cell_data.push_back(s);
                for (std::size_t r = 0; r < ex.n_runs; ++r)
                    jobs.push_back({table.cells.size(), r});
                table.cells.push_back(std::move(cell));
            }

    std::vector<FeatureModel> models(jobs.size());
    parallel_for(jobs.size(), ex.threads, [&](std::size_t j) {
        const Job job = jobs[j];
        MedianCell& cell = table.cells[job.cell];
        EvolveConfig cfg = ex.config_template;
        cfg.n_f = cell.n_f;
        cfg.target_index = cell.target_index;
        cfg.seed = derive_seed(seed, "run", {cell.target_index, cell.n_f, cell.n_s, job.run});
        EvolveResult res = evolve(train[cell_data[job.cell]], cfg);
        cell.run_rmses[job.run] = rmse(res.best_model, ex.test, cell.target_index);
        cell.traces[job.run] = std::move(res.fitness_trace);
        models[j] = std::move(res.best_model);
    });

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        MedianCell& cell = table.cells[jobs[j].cell];
        const std::size_t best = static_cast<std::size_t>(
            std::min_element(cell.run_rmses.begin(), cell.run_rmses.end()) - cell.run_rmses.begin());
        if (jobs[j].run == best)
            cell.best_model = models[j];
    }
    for (auto& cell : table.cells)
        cell.median_rmse = median(cell.run_rmses);
    return table;
}

} // namespace symrl
