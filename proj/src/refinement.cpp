#include "symrl/rl.hpp"

#include <sstream>

#include "symrl/seed.hpp"

namespace symrl {

void RefinementConfig::validate() const {
    if (initial_samples < 3)
        throw std::invalid_argument("refinement needs at least three initial samples");
    if (n_models < 1)
        throw std::invalid_argument("n_models must be at least 1");
    if (eval_rollouts < 1 || eval_steps < 1 || collection_steps < 1)
        throw std::invalid_argument("rollout counts and lengths must be at least 1");
    if (!(input_limit > 0.0))
        throw std::invalid_argument("input_limit must be positive");
}

namespace {

/// Best of `n_models` runs per target by RMSE on `test`.
RefinedModel select_models(const Dataset& train, const Dataset& test, const EvolveConfig& base, std::size_t n_models,
                           std::uint64_t seed, std::size_t threads) {
    const std::size_t n_targets = train.n_targets();
    std::vector<FeatureModel> models(n_targets * n_models);
    std::vector<double> scores(n_targets * n_models);
    parallel_for(models.size(), threads, [&](std::size_t j) {
        EvolveConfig cfg = base;
        cfg.target_index = j / n_models;
        cfg.seed = derive_seed(seed, {cfg.target_index, j % n_models});
        models[j] = evolve(train, cfg).best_model;
        scores[j] = rmse(models[j], test, cfg.target_index);
    });
    RefinedModel out;
    for (std::size_t t = 0; t < n_targets; ++t) {
        std::size_t best = t * n_models;
        for (std::size_t j = best + 1; j < (t + 1) * n_models; ++j)
            if (scores[j] < scores[best])
                best = j;
        out.models.push_back(models[best]);
    }
    return out;
}

std::vector<double> evaluate_policy(const StepFn& plant, const std::vector<FeatureModel>& models,
                                    const ValueFunction& value, const RLConfig& rl, const RefinementConfig& cfg,
                                    std::span<const State> starts) {
    const StepFn model = model_step(models);
    const Reward reward = pendulum_reward(rl);
    std::vector<double> returns(starts.size());
    parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
        std::mt19937_64 unused(0);
        returns[i] = rollout(plant, value, model, reward, rl, starts[i], cfg.eval_steps, 0.0, unused).discounted_return;
    });
    return returns;
}

} // namespace

RefinementReport refinement_experiment(const StepFn& plant, const EvolveConfig& evolve_config,
                                       const RLConfig& rl_config, const RefinementConfig& config,
                                       std::uint64_t seed) {
    config.validate();
    rl_config.validate();
    RefinementReport report;
    const SystemSpec sys = pendulum_system();
    const RegressorSpec spec = sys.regressor_spec();
    const Reward reward = pendulum_reward(rl_config);
    try {
        report.stage = "initial-data";
        std::mt19937_64 data_rng(derive_seed(seed, "initial-data", {}));
        ExcitationConfig ex;
        ex.ranges = {{-config.input_limit, config.input_limit}};
        ex.steps = config.initial_samples;
        const Episode initial_episode = simulate(plant, {0.0, 0.0}, excitation_inputs(ex, data_rng));
        const Episode initial_eps[] = {initial_episode};
        const Dataset initial_data = build_state_space_dataset(initial_eps, spec);
        const TrainTestSplit initial_split = split_every_third(initial_data);
        report.initial_rows = initial_data.rows();

        report.stage = "initial-model";
        report.initial = select_models(initial_split.train, initial_split.test, evolve_config, config.n_models,
                                       derive_seed(seed, "initial-model", {}), config.threads);

        report.stage = "value-iteration";
        const auto initial_vi =
            value_iteration(model_step(report.initial.models), reward, rl_config, config.threads);

        report.stage = "collection";
        std::vector<Episode> episodes{initial_episode};
        const StepFn initial_model = model_step(report.initial.models);
        for (std::size_t i = 0; i < config.collection_stds.size(); ++i) {
            std::mt19937_64 rng(derive_seed(seed, "collection", {i}));
            const auto r = rollout(plant, initial_vi.value, initial_model, reward, rl_config, {0.0, 0.0},
                                   config.collection_steps, config.collection_stds[i], rng);
            episodes.push_back(rollout_episode(r));
        }
        const Dataset merged = build_state_space_dataset(episodes, spec);
        const TrainTestSplit merged_split = split_every_third(merged);
        report.refined_rows = merged.rows();

        report.stage = "refined-model";
        report.refined = select_models(merged_split.train, merged_split.test, evolve_config, config.n_models,
                                       derive_seed(seed, "refined-model", {}), config.threads);
        for (auto* m : {&report.initial, &report.refined}) {
            m->test_rmse.clear();
            for (std::size_t t = 0; t < m->models.size(); ++t)
                m->test_rmse.push_back(rmse(m->models[t], merged_split.test, t));
        }

        report.stage = "evaluation";
        const auto refined_vi =
            value_iteration(model_step(report.refined.models), reward, rl_config, config.threads);
        std::mt19937_64 start_rng(derive_seed(seed, "evaluation", {}));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<State> starts;
        for (std::size_t i = 0; i < config.eval_rollouts; ++i) {
            State x0(2, 0.0);
            for (std::size_t d = 0; d < x0.size() && d < config.eval_start_std.size(); ++d)
                x0[d] += config.eval_start_std[d] * normal(start_rng);
            starts.push_back(std::move(x0));
        }
        report.initial_returns =
            evaluate_policy(plant, report.initial.models, initial_vi.value, rl_config, config, starts);
        report.refined_returns =
            evaluate_policy(plant, report.refined.models, refined_vi.value, rl_config, config, starts);
        report.stage = "complete";
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    return report;
}

std::string RefinementReport::returns_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "policy,rollout,return\n";
    for (std::size_t i = 0; i < initial_returns.size(); ++i)
        out << "initial," << i << ',' << initial_returns[i] << '\n';
    for (std::size_t i = 0; i < refined_returns.size(); ++i)
        out << "refined," << i << ',' << refined_returns[i] << '\n';
    return out.str();
}

std::string RefinementReport::rmse_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "model,target,test_rmse\n";
    for (const auto* m : {&initial, &refined})
        for (std::size_t t = 0; t < m->test_rmse.size(); ++t)
            out << (m == &initial ? "initial" : "refined") << ',' << m->models[t].target_name << ','
                << m->test_rmse[t] << '\n';
    return out.str();
}

std::string RefinementReport::summary() const {
    std::ostringstream out;
    out.precision(6);
    out << "stage: " << stage << '\n';
    if (!error.empty())
        out << "error: " << error << '\n';
    out << "initial rows: " << initial_rows << "\nrefined rows: " << refined_rows << '\n';
    for (const auto* m : {&initial, &refined}) {
        const char* name = m == &initial ? "initial" : "refined";
        for (std::size_t t = 0; t < m->models.size(); ++t) {
            out << name << " model " << m->models[t].target_name << " = " << model_to_text(m->models[t]) << '\n';
            if (t < m->test_rmse.size())
                out << name << " test rmse " << m->models[t].target_name << ": " << m->test_rmse[t] << '\n';
        }
    }
    if (!initial_returns.empty())
        out << "initial median return: " << median(initial_returns) << '\n';
    if (!refined_returns.empty())
        out << "refined median return: " << median(refined_returns) << '\n';
    return out.str();
}

} // namespace symrl
