#include "symrl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "symrl/seed.hpp"

namespace symrl {

namespace fs = std::filesystem;

namespace {

std::string number_text(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out)
        throw DataError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path prepare_out(const ExperimentConfig& cfg) {
    const fs::path dir = cfg.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw DataError("cannot create output directory " + dir.string());
    return dir;
}

StepFn truth_step(const ExperimentConfig& cfg, Integrator integrator) {
    return make_step(cfg.system_spec().derivative, integrator, cfg.ts);
}

Dataset test_set(const ExperimentConfig& cfg) {
    return system_grid_dataset(cfg.system_spec(), cfg.test_points, truth_step(cfg, cfg.integrator));
}

Dataset training_set(const ExperimentConfig& cfg, std::size_t n_s, double lambda, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (cfg.system == "robot")
        return robot_training_dataset(n_s, cfg.ts, rng);
    PendulumDataConfig p;
    p.n_s = n_s;
    p.integrator = cfg.integrator;
    p.ts = cfg.ts;
    p.lambda = lambda;
    p.excitation = cfg.excitation;
    p.input_limit = cfg.input_limit;
    p.switching_probability = cfg.switching_probability;
    return pendulum_training_dataset(p, rng);
}

bool lambda_in_names(const ExperimentConfig& cfg) { return cfg.lambda.size() > 1 || cfg.lambda.front() != 0.0; }

std::string experiment_name(const ExperimentConfig& cfg, double lambda) {
    return lambda_in_names(cfg) ? cfg.id + "_lambda" + number_text(lambda) : cfg.id;
}

std::vector<FeatureModel> load_models_checked(const fs::path& path, const SystemSpec& sys) {
    auto models = load_models(path);
    const auto targets = sys.regressor_spec().target_names();
    if (models.size() != targets.size())
        throw DataError(path.string() + ": expected " + std::to_string(targets.size()) + " models, found " +
                        std::to_string(models.size()));
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i].target_name != targets[i])
            throw DataError(path.string() + ": model " + std::to_string(i) + " predicts '" + models[i].target_name +
                            "', expected '" + targets[i] + "'");
    return models;
}

EvolveConfig evolve_template(const ExperimentConfig& cfg) {
    EvolveConfig e = cfg.evolve;
    e.seed = cfg.seed;
    return e;
}

struct Context {
    ExperimentConfig config;
    std::ostream& out;
};

int cmd_sim_gen(const Context& ctx) {
    const auto& cfg = ctx.config;
    const fs::path dir = prepare_out(cfg);
    for (double lambda : cfg.lambda)
        for (std::size_t n_s : cfg.n_s) {
            const Dataset train = training_set(cfg, n_s, lambda, derive_seed(cfg.seed, "data", {n_s}));
            std::string name = "train_ns" + std::to_string(n_s);
            if (lambda_in_names(cfg))
                name += "_lambda" + number_text(lambda);
            const fs::path path = dir / (name + ".csv");
            save_dataset(train.with_provenance(cfg.id + " n_s=" + std::to_string(n_s) + " lambda=" +
                                               number_text(lambda) + " seed=" + std::to_string(cfg.seed)),
                         path);
            ctx.out << path.string() << ' ' << train.rows() << '\n';
        }
    const Dataset test = test_set(cfg);
    const fs::path path = dir / "test.csv";
    save_dataset(test.with_provenance(cfg.id + " grid points=" + std::to_string(cfg.test_points)), path);
    ctx.out << path.string() << ' ' << test.rows() << '\n';
    return kExitOk;
}

void write_evolve_outputs(const fs::path& dir, const std::string& name, const MedianTable& table,
                          const ExperimentConfig& cfg, std::ostream& out) {
    write_file(dir / ("median_table." + name + ".csv"), table.to_csv());

    std::ostringstream traces;
    traces.precision(17);
    traces << "target,n_f,n_s,run,generation,rmse\n";
    for (const auto& cell : table.cells)
        for (std::size_t r = 0; r < cell.traces.size(); ++r)
            for (const auto& p : cell.traces[r])
                traces << cell.target << ',' << cell.n_f << ',' << cell.n_s << ',' << r << ',' << p.generation << ','
                       << p.rmse << '\n';
    write_file(dir / ("traces." + name + ".csv"), traces.str());

    for (std::size_t n_f : cfg.n_f) {
        std::map<std::size_t, std::vector<FeatureModel>> by_ns;
        for (const auto& cell : table.cells)
            if (cell.n_f == n_f)
                by_ns[cell.n_s].push_back(cell.best_model);
        for (const auto& [n_s, models] : by_ns)
            save_models(models, dir / ("models." + name + ".nf" + std::to_string(n_f) + ".ns" + std::to_string(n_s) +
                                       ".txt"));
    }
    out << table.to_csv();
}

int cmd_evolve(const Context& ctx, const std::string& data_path, const std::string& test_path) {
    const auto& cfg = ctx.config;
    const fs::path dir = prepare_out(cfg);
    const Dataset test = test_path.empty() ? test_set(cfg) : load_dataset(test_path);

    MedianExperiment ex{{}, test, cfg.n_f, cfg.n_s, cfg.runs, evolve_template(cfg), {}, cfg.threads};
    if (!data_path.empty()) {
        const Dataset train = load_dataset(data_path);
        if (train.regressor_names() != test.regressor_names() || train.target_names() != test.target_names())
            throw DataError("training and test sets have different columns");
        ex.generator = [train](std::size_t, std::uint64_t) { return train; };
        ex.n_s_values = {train.rows()};
        write_evolve_outputs(dir, cfg.id, run_median_experiment(ex), cfg, ctx.out);
        return kExitOk;
    }
    for (double lambda : cfg.lambda) {
        ex.generator = [&cfg, lambda](std::size_t n_s, std::uint64_t seed) {
            return training_set(cfg, n_s, lambda, seed);
        };
        write_evolve_outputs(dir, experiment_name(cfg, lambda), run_median_experiment(ex), cfg, ctx.out);
    }
    return kExitOk;
}

StepFn policy_model(const ExperimentConfig& cfg, const std::string& models_path) {
    if (models_path.empty())
        return truth_step(cfg, cfg.integrator);
    return model_step(load_models_checked(models_path, cfg.system_spec()));
}

void require_pendulum(const ExperimentConfig& cfg) {
    if (cfg.system != "pendulum")
        throw ConfigError("value iteration and rollouts are defined for sim.system = pendulum");
}

ValueIterationResult run_vi(const Context& ctx, const StepFn& model) {
    const RLConfig rl = ctx.config.rl_config();
    return value_iteration(model, pendulum_reward(rl), rl, ctx.config.threads);
}

int cmd_vi(const Context& ctx, const std::string& models_path) {
    require_pendulum(ctx.config);
    const fs::path dir = prepare_out(ctx.config);
    const auto vi = run_vi(ctx, policy_model(ctx.config, models_path));
    save_value_function(vi.value, dir / "value_function.csv");
    std::ostringstream res;
    res.precision(17);
    res << "sweep,residual\n";
    for (std::size_t i = 0; i < vi.residuals.size(); ++i)
        res << i + 1 << ',' << vi.residuals[i] << '\n';
    write_file(dir / "vi_residuals.csv", res.str());
    ctx.out << "sweeps " << vi.sweeps << "\nconverged " << (vi.converged ? "true" : "false") << "\nfinal_residual "
            << number_text(vi.residuals.empty() ? 0.0 : vi.residuals.back()) << '\n';
    if (!vi.converged)
        throw NonConvergenceError("value iteration did not converge within " + std::to_string(vi.sweeps) + " sweeps");
    return kExitOk;
}

int cmd_rollout(const Context& ctx, const std::string& models_path, const std::string& value_path,
                const std::string& plant_name, std::vector<double> x0) {
    const auto& cfg = ctx.config;
    require_pendulum(cfg);
    const fs::path dir = prepare_out(cfg);
    const RLConfig rl = cfg.rl_config();
    const StepFn model = policy_model(cfg, models_path);
    std::optional<ValueFunction> value;
    if (!value_path.empty()) {
        value = load_value_function(value_path);
    } else {
        auto vi = run_vi(ctx, model);
        if (!vi.converged)
            throw NonConvergenceError("value iteration did not converge within " + std::to_string(vi.sweeps) +
                                      " sweeps");
        value = std::move(vi.value);
    }
    Integrator plant_integrator = cfg.integrator;
    if (!plant_name.empty()) {
        ExperimentConfig tmp = cfg;
        tmp.set("sim.integrator", plant_name);
        plant_integrator = tmp.integrator;
    }
    if (x0.size() != 2)
        throw ConfigError("--x0 needs two values: alpha,alpha_dot");
    std::mt19937_64 rng(derive_seed(cfg.seed, "rollout", {}));
    const auto result = rollout(truth_step(cfg, plant_integrator), *value, model, pendulum_reward(rl), rl, x0,
                                cfg.rollout_steps, cfg.exploration_std, rng);
    const SystemSpec sys = cfg.system_spec();
    write_file(dir / "trajectory.csv", trajectory_to_csv(result, cfg.ts, sys.state_names, sys.input_names));
    ctx.out << "return " << number_text(result.discounted_return) << "\nsuccess " << (result.success ? "true" : "false")
            << "\nsteps_to_success "
            << (result.steps_to_success ? std::to_string(*result.steps_to_success) : std::string("none"))
            << "\naborted " << (result.aborted ? "true" : "false") << '\n';
    return kExitOk;
}

int cmd_refine(const Context& ctx) {
    const auto& cfg = ctx.config;
    require_pendulum(cfg);
    const fs::path dir = prepare_out(cfg);
    EvolveConfig evolve = evolve_template(cfg);
    evolve.n_f = cfg.n_f.front();
    RefinementConfig refine = cfg.refine;
    refine.input_limit = cfg.input_limit;
    refine.threads = cfg.threads;
    const auto report = refinement_experiment(truth_step(cfg, cfg.refine_plant), evolve, cfg.rl_config(), refine,
                                              derive_seed(cfg.seed, "refine", {}));
    write_file(dir / "refine_returns.csv", report.returns_csv());
    write_file(dir / "refine_rmse.csv", report.rmse_csv());
    write_file(dir / "refine_summary.txt", report.summary());
    ctx.out << report.summary();
    if (!report.complete())
        throw DataError("refinement stopped at stage '" + report.stage + "': " + report.error);
    return kExitOk;
}

int cmd_baseline(const Context& ctx, const std::string& train_path, const std::string& test_path,
                 const std::string& models_path) {
    const auto& cfg = ctx.config;
    const fs::path dir = prepare_out(cfg);
    const std::size_t n_s = cfg.n_s.front();
    const Dataset train = train_path.empty()
                              ? training_set(cfg, n_s, cfg.lambda.front(), derive_seed(cfg.seed, "data", {n_s}))
                              : load_dataset(train_path);
    const Dataset test = test_path.empty() ? test_set(cfg) : load_dataset(test_path);
    if (train.regressor_names() != test.regressor_names() || train.target_names() != test.target_names())
        throw DataError("training and test sets have different columns");

    LlrMemory memory(cfg.llr_capacity);
    memory.insert_rows(train);
    const auto llr = llr_rmse(memory, test, {cfg.llr_k, cfg.llr_scale}, cfg.threads);

    std::vector<double> sr(test.n_targets());
    if (!models_path.empty()) {
        const auto models = load_models(models_path);
        for (std::size_t t = 0; t < test.n_targets(); ++t) {
            auto it = std::find_if(models.begin(), models.end(),
                                   [&](const FeatureModel& m) { return m.target_name == test.target_names()[t]; });
            if (it == models.end())
                throw DataError("no model for target '" + test.target_names()[t] + "'");
            sr[t] = rmse(*it, test, t);
        }
    } else {
        MedianExperiment ex{[train](std::size_t, std::uint64_t) { return train; },
                            test,
                            {cfg.n_f.front()},
                            {train.rows()},
                            cfg.runs,
                            evolve_template(cfg),
                            {},
                            cfg.threads};
        const MedianTable table = run_median_experiment(ex);
        for (std::size_t t = 0; t < test.n_targets(); ++t)
            sr[t] = table.find(test.target_names()[t], cfg.n_f.front(), train.rows())->median_rmse;
    }

    std::ostringstream table;
    table.precision(17);
    table << "target,sr_rmse,llr_rmse\n";
    for (std::size_t t = 0; t < test.n_targets(); ++t)
        table << test.target_names()[t] << ',' << sr[t] << ',' << llr[t] << '\n';
    write_file(dir / ("baseline." + cfg.id + ".csv"), table.str());
    ctx.out << table.str();
    return kExitOk;
}

struct ReportRow {
    std::string experiment, target;
    std::size_t n_f = 0, n_s = 0;
    std::string median, runs;
};

int cmd_report(const Context& ctx) {
    const fs::path dir = ctx.config.out;
    std::vector<ReportRow> rows;
    if (fs::is_directory(dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && name.starts_with("median_table.") && name.ends_with(".csv") &&
                name.size() > std::string("median_table..csv").size())
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const std::string name = f.filename().string();
            const std::string experiment = name.substr(13, name.size() - 13 - 4);
            std::istringstream in(read_file(f));
            std::string line;
            std::getline(in, line);
            if (line != "target,n_f,n_s,median_rmse,runs")
                throw DataError(f.string() + ": unexpected header");
            while (std::getline(in, line)) {
                if (line.empty())
                    continue;
                std::vector<std::string> cells;
                std::stringstream ls(line);
                for (std::string c; std::getline(ls, c, ',');)
                    cells.push_back(c);
                if (cells.size() != 5)
                    throw DataError(f.string() + ": malformed row '" + line + "'");
                try {
                    rows.push_back({experiment, cells[0], std::stoul(cells[1]), std::stoul(cells[2]), cells[3],
                                    cells[4]});
                } catch (const std::logic_error&) {
                    throw DataError(f.string() + ": malformed row '" + line + "'");
                }
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.experiment, a.target, a.n_f, a.n_s) < std::tie(b.experiment, b.target, b.n_f, b.n_s);
    });
    std::string report = "experiment,target,n_f,n_s,median_rmse,runs\n";
    for (const auto& r : rows)
        report += r.experiment + ',' + r.target + ',' + std::to_string(r.n_f) + ',' + std::to_string(r.n_s) + ',' +
                  r.median + ',' + r.runs + '\n';
    prepare_out(ctx.config);
    write_file(dir / "report.csv", report);
    ctx.out << report;
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Symbolic regression models for model-based reinforcement learning"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> runs, threads;
    app.add_option("--config", config_path, "Experiment config file");
    app.add_option("--preset", preset, "Named experiment used instead of a config file");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--runs", runs, "Evolution runs per cell");
    app.add_option("--threads", threads, "Worker threads");

    auto* sim_gen = app.add_subcommand("sim-gen", "Write training and grid test datasets");
    std::string data_path, test_path, models_path, value_path, plant;
    std::vector<double> x0{0.0, 0.0};
    auto* evolve_cmd = app.add_subcommand("evolve", "Evolve models and write the median table");
    evolve_cmd->add_option("--data", data_path, "Training dataset CSV (generated when omitted)");
    evolve_cmd->add_option("--test", test_path, "Test dataset CSV (grid generated when omitted)");
    auto* vi_cmd = app.add_subcommand("vi", "Value iteration on a model file or the simulator");
    vi_cmd->add_option("--models", models_path, "Model file (simulator when omitted)");
    auto* rollout_cmd = app.add_subcommand("rollout", "Greedy-policy rollout on the simulator");
    rollout_cmd->add_option("--models", models_path, "Model file (simulator when omitted)");
    rollout_cmd->add_option("--value", value_path, "Value function CSV (computed when omitted)");
    rollout_cmd->add_option("--plant", plant, "Plant integrator: euler or rk4");
    rollout_cmd->add_option("--x0", x0, "Initial state alpha,alpha_dot")->delimiter(',')->expected(2);
    auto* refine_cmd = app.add_subcommand("refine", "Model refinement experiment");
    auto* baseline_cmd = app.add_subcommand("baseline", "Compare evolved models with local linear regression");
    baseline_cmd->add_option("--train", data_path, "Training dataset CSV");
    baseline_cmd->add_option("--test", test_path, "Test dataset CSV");
    baseline_cmd->add_option("--models", models_path, "Model file (evolved when omitted)");
    auto* report_cmd = app.add_subcommand("report", "Merge median tables in the output directory");

    std::vector<const char*> argv{"symrl"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (!config_path.empty() && !preset.empty())
            throw ConfigError("--config and --preset are mutually exclusive");
        ExperimentConfig cfg = !config_path.empty() ? ExperimentConfig::load(config_path)
                               : preset.empty()     ? ExperimentConfig::preset("custom")
                                                    : ExperimentConfig::preset(preset);
        if (seed)
            cfg.seed = *seed;
        if (out_dir)
            cfg.set("experiment.out", *out_dir);
        if (runs)
            cfg.runs = *runs;
        if (threads)
            cfg.threads = *threads;
        cfg.validate();
        Context ctx{cfg, out};

        if (sim_gen->parsed())
            return cmd_sim_gen(ctx);
        if (evolve_cmd->parsed())
            return cmd_evolve(ctx, data_path, test_path);
        if (vi_cmd->parsed())
            return cmd_vi(ctx, models_path);
        if (rollout_cmd->parsed())
            return cmd_rollout(ctx, models_path, value_path, plant, x0);
        if (refine_cmd->parsed())
            return cmd_refine(ctx);
        if (baseline_cmd->parsed())
            return cmd_baseline(ctx, data_path, test_path, models_path);
        if (report_cmd->parsed())
            return cmd_report(ctx);
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NonConvergenceError& e) {
        err << "not converged: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const StructuralError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ModelOutputError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace symrl
