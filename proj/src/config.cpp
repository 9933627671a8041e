#include "symrl/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace symrl {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto end = s.find(',', start);
        out.push_back(trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
        if (end == std::string_view::npos)
            return out;
        start = end + 1;
    }
}

template <class T>
T parse_int(std::string_view key, std::string_view v) {
    T out{};
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("'" + std::string(key) + "': expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

double parse_real(std::string_view key, std::string_view v) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("'" + std::string(key) + "': expected a finite number, got '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true")
        return true;
    if (v == "false")
        return false;
    throw ConfigError("'" + std::string(key) + "': expected true or false, got '" + std::string(v) + "'");
}

std::string real_text(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

template <class T, class F>
std::string join(const std::vector<T>& values, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out += (i ? "," : "") + fmt(values[i]);
    return out;
}

std::string integrator_text(Integrator i) { return i == Integrator::Euler ? "euler" : "rk4"; }

Integrator parse_integrator(std::string_view key, std::string_view v) {
    if (v == "euler")
        return Integrator::Euler;
    if (v == "rk4")
        return Integrator::Rk4;
    throw ConfigError("'" + std::string(key) + "': expected euler or rk4, got '" + std::string(v) + "'");
}

struct Field {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)> set;
};

#define SIZE_FIELD(name, member)                                                                                       \
    Field {                                                                                                            \
        name, [](const ExperimentConfig& c) { return std::to_string(c.member); },                                     \
            [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = parse_int<std::size_t>(k, v); } \
    }
#define REAL_FIELD(name, member)                                                                                       \
    Field {                                                                                                            \
        name, [](const ExperimentConfig& c) { return real_text(c.member); },                                          \
            [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = parse_real(k, v); }          \
    }
#define BOOL_FIELD(name, member)                                                                                       \
    Field {                                                                                                            \
        name, [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); },                     \
            [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = parse_bool(k, v); }          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"experiment.id", [](const ExperimentConfig& c) { return c.id; },
         [](ExperimentConfig& c, std::string_view, std::string_view v) {
             // Only validated here; presets are applied by parse().
             ExperimentConfig::preset(v);
             c.id = std::string(v);
         }},
        {"experiment.seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.seed = parse_int<std::uint64_t>(k, v); }},
        {"experiment.out", [](const ExperimentConfig& c) { return c.out; },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             if (v.empty())
                 throw ConfigError("'" + std::string(k) + "' must not be empty");
             c.out = std::string(v);
         }},
        SIZE_FIELD("experiment.runs", runs),
        SIZE_FIELD("experiment.threads", threads),
        {"experiment.n_s", [](const ExperimentConfig& c) { return join(c.n_s, [](auto v) { return std::to_string(v); }); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             c.n_s.clear();
             for (auto item : split_list(v))
                 c.n_s.push_back(parse_int<std::size_t>(k, item));
         }},
        {"experiment.n_f", [](const ExperimentConfig& c) { return join(c.n_f, [](auto v) { return std::to_string(v); }); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             c.n_f.clear();
             for (auto item : split_list(v))
                 c.n_f.push_back(parse_int<std::size_t>(k, item));
         }},
        SIZE_FIELD("experiment.test_points", test_points),

        {"sim.system", [](const ExperimentConfig& c) { return c.system; },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             if (v != "pendulum" && v != "robot")
                 throw ConfigError("'" + std::string(k) + "': expected pendulum or robot, got '" + std::string(v) + "'");
             c.system = std::string(v);
         }},
        {"sim.integrator", [](const ExperimentConfig& c) { return integrator_text(c.integrator); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.integrator = parse_integrator(k, v); }},
        REAL_FIELD("sim.ts", ts),
        {"sim.lambda", [](const ExperimentConfig& c) { return join(c.lambda, real_text); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             c.lambda.clear();
             for (auto item : split_list(v))
                 c.lambda.push_back(parse_real(k, item));
         }},
        {"sim.excitation",
         [](const ExperimentConfig& c) {
             return std::string(c.excitation == ExcitationConfig::Kind::Gbn ? "gbn" : "uniform");
         },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             if (v == "gbn")
                 c.excitation = ExcitationConfig::Kind::Gbn;
             else if (v == "uniform")
                 c.excitation = ExcitationConfig::Kind::UniformRandom;
             else
                 throw ConfigError("'" + std::string(k) + "': expected uniform or gbn, got '" + std::string(v) + "'");
         }},
        REAL_FIELD("sim.input_limit", input_limit),
        REAL_FIELD("sim.switching_probability", switching_probability),

        SIZE_FIELD("evolve.population_size", evolve.population_size),
        SIZE_FIELD("evolve.generations", evolve.generations),
        {"evolve.max_depth", [](const ExperimentConfig& c) { return std::to_string(c.evolve.max_depth); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.evolve.max_depth = parse_int<int>(k, v); }},
        {"evolve.init_max_depth", [](const ExperimentConfig& c) { return std::to_string(c.evolve.init_max_depth); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             c.evolve.init_max_depth = parse_int<int>(k, v);
         }},
        {"evolve.function_set", [](const ExperimentConfig& c) { return c.evolve.function_set.to_string(); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             try {
                 c.evolve.function_set = FunctionSet::parse(v);
             } catch (const std::exception& e) {
                 throw ConfigError("'" + std::string(k) + "': " + e.what());
             }
         }},
        SIZE_FIELD("evolve.tournament_size", evolve.tournament_size),
        REAL_FIELD("evolve.crossover_probability", evolve.crossover_probability),
        SIZE_FIELD("evolve.rebuild_interval", evolve.rebuild_interval),
        {"evolve.fitness_eval_budget",
         [](const ExperimentConfig& c) {
             return c.evolve.fitness_eval_budget ? std::to_string(*c.evolve.fitness_eval_budget) : std::string("none");
         },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             if (v == "none")
                 c.evolve.fitness_eval_budget.reset();
             else
                 c.evolve.fitness_eval_budget = parse_int<std::size_t>(k, v);
         }},

        REAL_FIELD("rl.gamma", gamma),
        REAL_FIELD("rl.action_min", action_min),
        REAL_FIELD("rl.action_max", action_max),
        SIZE_FIELD("rl.action_levels", action_levels),
        SIZE_FIELD("rl.angle_points", angle_points),
        SIZE_FIELD("rl.velocity_points", velocity_points),
        REAL_FIELD("rl.velocity_limit", velocity_limit),
        REAL_FIELD("rl.tolerance", vi_tolerance),
        SIZE_FIELD("rl.max_sweeps", max_sweeps),
        BOOL_FIELD("rl.wrapped_reward", wrapped_reward),
        SIZE_FIELD("rl.rollout_steps", rollout_steps),
        REAL_FIELD("rl.exploration_std", exploration_std),

        SIZE_FIELD("refine.initial_samples", refine.initial_samples),
        SIZE_FIELD("refine.n_models", refine.n_models),
        SIZE_FIELD("refine.collection_steps", refine.collection_steps),
        {"refine.collection_stds", [](const ExperimentConfig& c) { return join(c.refine.collection_stds, real_text); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) {
             c.refine.collection_stds.clear();
             if (v.empty())
                 return;
             for (auto item : split_list(v))
                 c.refine.collection_stds.push_back(parse_real(k, item));
         }},
        SIZE_FIELD("refine.eval_rollouts", refine.eval_rollouts),
        SIZE_FIELD("refine.eval_steps", refine.eval_steps),
        {"refine.plant", [](const ExperimentConfig& c) { return integrator_text(c.refine_plant); },
         [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.refine_plant = parse_integrator(k, v); }},

        SIZE_FIELD("baseline.k", llr_k),
        SIZE_FIELD("baseline.capacity", llr_capacity),
        BOOL_FIELD("baseline.scale", llr_scale),
    };
    return table;
}

#undef SIZE_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD

const Field& field(std::string_view key) {
    for (const auto& f : fields())
        if (f.key == key)
            return f;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

} // namespace

ExperimentConfig ExperimentConfig::preset(std::string_view id) {
    ExperimentConfig c;
    c.evolve.function_set = FunctionSet::parse("add,sub,mul,sin,cos,sign");
    if (id == "custom") {
    } else if (id == "robot_c") {
        c.system = "robot";
        c.n_s = {100};
        c.n_f = {2};
        c.test_points = 11;
        c.evolve.function_set = FunctionSet::parse("add,sub,mul,sin,cos");
    } else if (id == "pend_c1") {
        c.n_s = {20};
        c.n_f = {2, 4};
    } else if (id == "pend_c2") {
        c.integrator = Integrator::Rk4;
        c.n_s = {1000};
        c.n_f = {10};
        c.lambda = {0.0, 0.01, 0.05, 0.1};
    } else if (id == "pend_c3") {
        c.n_f = {10};
        c.n_s = {100};
        c.action_min = -2.0;
        c.action_max = 2.0;
        c.action_levels = 15;
        c.refine_plant = Integrator::Rk4;
    } else {
        throw ConfigError("unknown experiment id '" + std::string(id) +
                          "' (expected robot_c, pend_c1, pend_c2, pend_c3 or custom)");
    }
    c.id = std::string(id);
    return c;
}

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> k;
        for (const auto& f : fields())
            k.push_back(f.key);
        return k;
    }();
    return names;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, key, trim(value)); }

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::map<std::string, std::size_t> seen;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key(trim(line.substr(0, eq)));
        field(key);
        if (seen.contains(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        seen[key] = line_no;
        entries.emplace_back(std::move(key), std::string(trim(line.substr(eq + 1))));
    }
    ExperimentConfig c = preset("custom");
    for (const auto& [k, v] : entries)
        if (k == "experiment.id")
            c = preset(v);
    for (const auto& [k, v] : entries)
        c.set(k, v);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        const std::string prefix = f.key.substr(0, f.key.find('.'));
        if (prefix != section) {
            if (!section.empty())
                out += '\n';
            out += "# " + prefix + "\n";
            section = prefix;
        }
        out += f.key + " = " + f.get(*this) + "\n";
    }
    return out;
}

void ExperimentConfig::validate() const {
    try {
        evolve.validate();
        refine.validate();
        rl_config().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (runs < 1)
        throw ConfigError("experiment.runs must be at least 1");
    if (threads < 1)
        throw ConfigError("experiment.threads must be at least 1");
    if (n_s.empty() || std::find(n_s.begin(), n_s.end(), 0) != n_s.end())
        throw ConfigError("experiment.n_s needs positive values");
    if (n_f.empty() || std::find(n_f.begin(), n_f.end(), 0) != n_f.end())
        throw ConfigError("experiment.n_f needs positive values");
    for (std::size_t f : n_f)
        if (f > evolve.population_size)
            throw ConfigError("experiment.n_f exceeds evolve.population_size");
    if (test_points < 2)
        throw ConfigError("experiment.test_points must be at least 2");
    if (!(ts > 0.0))
        throw ConfigError("sim.ts must be positive");
    if (lambda.empty())
        throw ConfigError("sim.lambda needs at least one value");
    for (double l : lambda)
        if (l < 0.0)
            throw ConfigError("sim.lambda values must be non-negative");
    if (!(input_limit > 0.0))
        throw ConfigError("sim.input_limit must be positive");
    if (!(switching_probability >= 0.0 && switching_probability <= 1.0))
        throw ConfigError("sim.switching_probability must lie in [0, 1]");
    if (!(velocity_limit > 0.0))
        throw ConfigError("rl.velocity_limit must be positive");
    if (rollout_steps < 1)
        throw ConfigError("rl.rollout_steps must be at least 1");
    if (exploration_std < 0.0)
        throw ConfigError("rl.exploration_std must be non-negative");
    if (llr_k < 1 || llr_capacity < 1)
        throw ConfigError("baseline.k and baseline.capacity must be positive");
}

SystemSpec ExperimentConfig::system_spec() const { return system == "robot" ? mobile_robot_system() : pendulum_system(); }

RLConfig ExperimentConfig::rl_config() const {
    RLConfig rl;
    rl.gamma = gamma;
    if (action_levels < 1 || action_max < action_min)
        throw std::invalid_argument("rl action range needs action_max >= action_min and at least one level");
    if (angle_points < 2 || velocity_points < 2)
        throw std::invalid_argument("rl grid needs at least two points per axis");
    rl.actions = uniform_actions(action_min, action_max, action_levels);
    rl.grid = StateGrid{{uniform_axis(-std::numbers::pi, std::numbers::pi, angle_points, true),
                         uniform_axis(-velocity_limit, velocity_limit, velocity_points)}};
    rl.tolerance = vi_tolerance;
    rl.max_sweeps = max_sweeps;
    rl.wrapped_reward = wrapped_reward;
    return rl;
}

} // namespace symrl
