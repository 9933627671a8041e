#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symrl/cli.hpp"

using namespace symrl;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("symrl_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    bool header = false;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#')
            continue;
        if (!header) {
            header = true;
            continue;
        }
        ++n;
    }
    return n;
}

} // namespace

TEST_CASE("presets") {
    const auto c1 = ExperimentConfig::preset("pend_c1");
    CHECK(c1.n_s == std::vector<std::size_t>{20});
    CHECK(c1.evolve.function_set.contains(Op::Sign));
    const auto c2 = ExperimentConfig::preset("pend_c2");
    CHECK(c2.integrator == Integrator::Rk4);
    CHECK(c2.lambda.size() == 4);
    const auto robot = ExperimentConfig::preset("robot_c");
    CHECK(robot.system == "robot");
    CHECK(robot.test_points == 11);
    CHECK_FALSE(robot.evolve.function_set.contains(Op::Sign));
    const auto c3 = ExperimentConfig::preset("pend_c3");
    CHECK(c3.rl_config().actions.size() == 15);
    CHECK_THROWS_AS(ExperimentConfig::preset("nope"), ConfigError);
}

TEST_CASE("config text round-trips") {
    for (const char* id : {"robot_c", "pend_c1", "pend_c2", "pend_c3", "custom"}) {
        auto c = ExperimentConfig::preset(id);
        c.seed = 77;
        c.refine.collection_stds = {0.0, 0.25};
        const auto text = c.to_text();
        CHECK(ExperimentConfig::parse(text).to_text() == text);
    }
    const auto c = ExperimentConfig::parse("experiment.id = pend_c1\n# comment\nexperiment.n_f = 2, 4\n");
    CHECK(c.n_f == std::vector<std::size_t>{2, 4});
    CHECK(c.id == "pend_c1");
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(ExperimentConfig::parse("experiment.bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("experiment.seed = 1\nexperiment.seed = 2\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("rl.gamma = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("experiment.runs = many\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("evolve.function_set = add,tan\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("no equals sign\n"), ConfigError);
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    write(dir / "bad.cfg", "experiment.unknown_key = 3\n");
    CHECK(cli({"sim-gen", "--config", (dir / "bad.cfg").string()}).code == kExitConfig);
    CHECK(cli({"sim-gen", "--config", (dir / "missing.cfg").string()}).code == kExitConfig);
    CHECK(cli({"frobnicate"}).code == kExitConfig);

    write(dir / "c1.cfg", "experiment.id = pend_c1\nexperiment.runs = 1\nevolve.generations = 10\n");
    const auto missing = cli({"evolve", "--config", (dir / "c1.cfg").string(), "--out", (dir / "o").string(),
                              "--data", (dir / "nope.csv").string()});
    CHECK(missing.code == kExitData);
    CHECK_FALSE(missing.err.empty());

    write(dir / "vi.cfg", "experiment.id = pend_c3\nrl.max_sweeps = 2\nrl.angle_points = 11\nrl.velocity_points = 11\n");
    const auto vi = cli({"vi", "--config", (dir / "vi.cfg").string(), "--out", (dir / "vi").string()});
    CHECK(vi.code == kExitNonConvergence);
    CHECK(vi.out.find("converged false") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("sim-gen writes deterministic datasets") {
    const auto dir = scratch("simgen");
    const auto a = cli({"sim-gen", "--preset", "pend_c1", "--out", (dir / "a").string()});
    REQUIRE_MESSAGE(a.code == 0, a.err);
    CHECK(data_rows(dir / "a" / "train_ns20.csv") == 20);
    CHECK(data_rows(dir / "a" / "test.csv") == 29791);
    REQUIRE(cli({"sim-gen", "--preset", "pend_c1", "--out", (dir / "b").string()}).code == 0);
    CHECK(slurp(dir / "a" / "train_ns20.csv") == slurp(dir / "b" / "train_ns20.csv"));
    CHECK(slurp(dir / "a" / "test.csv") == slurp(dir / "b" / "test.csv"));
    REQUIRE(cli({"sim-gen", "--preset", "pend_c1", "--seed", "2", "--out", (dir / "c").string()}).code == 0);
    CHECK(slurp(dir / "a" / "train_ns20.csv") != slurp(dir / "c" / "train_ns20.csv"));

    REQUIRE(cli({"sim-gen", "--preset", "robot_c", "--out", (dir / "r").string()}).code == 0);
    CHECK(data_rows(dir / "r" / "train_ns100.csv") == 100);
    CHECK(data_rows(dir / "r" / "test.csv") == 161051);
    fs::remove_all(dir);
}

TEST_CASE("evolve, vi, rollout and report") {
    const auto dir = scratch("pipeline");
    write(dir / "c.cfg", "experiment.id = pend_c1\n"
                         "experiment.runs = 2\n"
                         "experiment.n_f = 4\n"
                         "experiment.test_points = 5\n"
                         "evolve.population_size = 80\n"
                         "evolve.generations = 300\n"
                         "rl.action_min = -2\n"
                         "rl.action_max = 2\n"
                         "rl.action_levels = 5\n"
                         "rl.angle_points = 15\n"
                         "rl.velocity_points = 15\n"
                         "rl.rollout_steps = 30\n");
    const auto cfg = (dir / "c.cfg").string();
    const auto out = (dir / "o").string();
    const auto ev = cli({"evolve", "--config", cfg, "--out", out});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    CHECK(fs::exists(dir / "o" / "median_table.pend_c1.csv"));
    CHECK(fs::exists(dir / "o" / "traces.pend_c1.csv"));
    const auto models = dir / "o" / "models.pend_c1.nf4.ns20.txt";
    REQUIRE(fs::exists(models));

    const auto vi = cli({"vi", "--config", cfg, "--out", out, "--models", models.string()});
    REQUIRE_MESSAGE(vi.code == 0, vi.err);
    CHECK(vi.out.find("converged true") != std::string::npos);
    const auto value = dir / "o" / "value_function.csv";
    REQUIRE(fs::exists(value));

    const auto ro = cli({"rollout", "--config", cfg, "--out", out, "--models", models.string(), "--value",
                         value.string(), "--x0", "0,0"});
    REQUIRE_MESSAGE(ro.code == 0, ro.err);
    CHECK(ro.out.rfind("return ", 0) == 0);
    CHECK(data_rows(dir / "o" / "trajectory.csv") == 30);

    const auto second = (dir / "o" / "median_table.another.csv");
    write(second, "target,n_f,n_s,median_rmse,runs\nalpha,1,20,0.5,2\n");
    const auto rep = cli({"report", "--out", out});
    REQUIRE_MESSAGE(rep.code == 0, rep.err);
    const auto report = slurp(dir / "o" / "report.csv");
    CHECK(report.rfind("experiment,target,n_f,n_s,median_rmse,runs\nanother,alpha,1,20,0.5,2\npend_c1,alpha_dot_next,4,20,", 0) ==
          0);
    fs::remove_all(dir);
}

TEST_CASE("report on an empty directory") {
    const auto dir = scratch("empty");
    const auto rep = cli({"report", "--out", dir.string()});
    CHECK(rep.code == 0);
    CHECK(slurp(dir / "report.csv") == "experiment,target,n_f,n_s,median_rmse,runs\n");
    fs::remove_all(dir);
}

#ifdef SYMRL_CLI_PATH
TEST_CASE("installed binary maps errors to exit codes") {
    const std::string bin = SYMRL_CLI_PATH;
    const auto dir = scratch("binary");
    write(dir / "bad.cfg", "rl.gamma = 2\n");
    const int code = std::system((bin + " sim-gen --config " + (dir / "bad.cfg").string() + " >/dev/null 2>&1").c_str());
    REQUIRE(WIFEXITED(code));
    CHECK(WEXITSTATUS(code) == kExitConfig);
    fs::remove_all(dir);
}
#endif
