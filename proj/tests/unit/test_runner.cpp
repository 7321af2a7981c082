#include "config.hpp"
#include "runner.hpp"

#include "burgers/errors.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace burgers;
using namespace burgers::lab;
namespace fs = std::filesystem;

namespace {

const std::string kData = BURGERS_TEST_DATA;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string config_error_field(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("burgers_runner_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.toml";
    std::ofstream(p) << text;
    return p;
}

const char* kZeroNoise = R"(
[problem]
m = 2
T = 0.02
x0 = [0.0, 0.0]
[noise.covariance]
kind = "zero"
[mc]
n_paths = 4
keep_trajectories = 2
checkpoints = [0.01, 0.02]
)";

} // namespace

TEST(Config, DefaultsParse) {
    const auto c = parse_config("[problem]\nm = 2\n");
    EXPECT_EQ(c.problem.m, 2u);
    EXPECT_EQ(c.x0().modes(), 2u);
    EXPECT_EQ(c.integrator().modes, 2u);
}

TEST(Config, ErrorsCarryDottedPaths) {
    EXPECT_EQ(config_error_field("[problem]\nm = 0\n"), "problem.m");
    EXPECT_EQ(config_error_field("[problem]\nbogus = 1\n"), "problem.bogus");
    EXPECT_EQ(config_error_field("[problem]\ndt = -1.0\n"), "problem.dt");
    EXPECT_EQ(config_error_field("[noise.covariance]\nalpha = 0.5\n"), "noise.covariance.alpha");
    EXPECT_EQ(config_error_field("[noise.covariance]\nkind = \"weird\"\n"), "noise.covariance.kind");
    EXPECT_EQ(config_error_field("[control]\nrho = -1.0\n"), "control.rho");
    EXPECT_EQ(config_error_field("[hjb]\nsolver = \"magic\"\n"), "hjb.solver");
    EXPECT_EQ(config_error_field("[verify]\nchecks = [\"nope\"]\n"), "verify.checks");
    EXPECT_EQ(config_error_field("[verify]\ndpp_times = [[0.3, 0.1]]\n"), "verify.dpp_times[0]");
    EXPECT_EQ(config_error_field("[problem]\nm = \"two\"\n"), "problem.m");
    EXPECT_EQ(config_error_field("seed = [1]\n"), "seed");
    EXPECT_NE(config_error_field("[problem\n"), "<none>");
}

TEST(Config, ResolvedTomlRoundTripsAndHashes) {
    const auto a = load_config(kData + "/tiny_m1.toml");
    const std::string text = resolved_toml(a);
    const auto b = parse_config(text);
    EXPECT_EQ(resolved_toml(b), text);
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    auto c = a;
    c.seed += 1;
    EXPECT_NE(config_hash(c), config_hash(a));
}

TEST(Runner, OutputRootPrecedence) {
    ExperimentConfig cfg;
    cfg.output_dir = "from_config";
    RunOptions opts;
    ::unsetenv("BURGERS_LAB_OUT");
    EXPECT_EQ(output_root(opts, cfg), fs::path("from_config"));
    ::setenv("BURGERS_LAB_OUT", "from_env", 1);
    EXPECT_EQ(output_root(opts, cfg), fs::path("from_env"));
    opts.out = "from_flag";
    EXPECT_EQ(output_root(opts, cfg), fs::path("from_flag"));
    ::unsetenv("BURGERS_LAB_OUT");
}

TEST(Runner, DirectoryNamesNeverCollide) {
    const fs::path root = scratch("collide");
    const fs::path a = fresh_run_directory(root, "simulate", "0123456789abcdef", 0);
    const fs::path b = fresh_run_directory(root, "simulate", "0123456789abcdef", 0);
    EXPECT_EQ(a.filename().string(), "simulate-19700101T000000Z-01234567");
    EXPECT_EQ(b.filename().string(), "simulate-19700101T000000Z-01234567-2");
    EXPECT_TRUE(fs::is_directory(a));
    EXPECT_TRUE(fs::is_directory(b));
}

TEST(Runner, ZeroNoiseFromRestStaysAtRest) {
    const fs::path dir = scratch("zero");
    RunOptions opts{"simulate", write_config(dir, kZeroNoise).string(), std::nullopt, 1,
                    (dir / "out").string()};
    std::ostringstream err;
    const auto r = run(opts, err);
    ASSERT_EQ(r.exit_code, kExitPass) << err.str();
    std::ifstream in(r.directory / "trajectories.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("path_id", 0) == 0) continue;
        const double coeff = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_EQ(coeff, 0.0) << line;
        ++rows;
    }
    EXPECT_GT(rows, 0u);
    EXPECT_TRUE(fs::exists(r.directory / "config.resolved.toml"));
    EXPECT_TRUE(fs::exists(r.directory / "report.json"));
}

TEST(Runner, RerunsAreByteIdentical) {
    const auto cfg = load_config(kData + "/tiny_m1.toml");
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    const auto ra = execute("simulate", cfg, 1, a);
    const auto rb = execute("simulate", cfg, 2, b);
    ASSERT_EQ(ra.exit_code, kExitPass);
    ASSERT_EQ(rb.exit_code, kExitPass);
    for (const char* f : {"trajectories.csv", "jumps.csv", "summary.json", "report.json",
                          "config.resolved.toml"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(Runner, SeedOverrideChangesTheHash) {
    const fs::path dir = scratch("seed");
    RunOptions opts{"simulate", write_config(dir, kZeroNoise).string(), 99, 1,
                    (dir / "out").string()};
    std::ostringstream err;
    const auto r = run(opts, err);
    ASSERT_EQ(r.exit_code, kExitPass);
    EXPECT_EQ(r.report["seed"].get<std::uint64_t>(), 99u);
}

TEST(Runner, UnstablePdeStepIsAConfigErrorAndWritesNothing) {
    const fs::path dir = scratch("unstable");
    const std::string noisy = R"(
[problem]
m = 1
T = 0.1
[hjb]
dt_pde = 0.5
n_pts = 201
)";
    RunOptions opts{"hjb", write_config(dir, noisy).string(), std::nullopt, 1,
                    (dir / "out").string()};
    std::ostringstream err;
    const auto r = run(opts, err);
    EXPECT_EQ(r.exit_code, kExitConfigError);
    EXPECT_NE(err.str().find("hjb.dt_pde"), std::string::npos) << err.str();
    EXPECT_TRUE(r.directory.empty());
    EXPECT_FALSE(fs::exists(dir / "out") && !fs::is_empty(dir / "out"));
}

TEST(Runner, HjbAboveTwoModesIsAConfigError) {
    const fs::path dir = scratch("hjb_m3");
    RunOptions opts{"hjb", write_config(dir, "[problem]\nm = 3\n").string(), std::nullopt, 1,
                    (dir / "out").string()};
    std::ostringstream err;
    EXPECT_EQ(run(opts, err).exit_code, kExitConfigError);
}

TEST(Runner, MissingFileIsAConfigError) {
    RunOptions opts{"simulate", "/nonexistent/burgers.toml", std::nullopt, 1, std::nullopt};
    std::ostringstream err;
    EXPECT_EQ(run(opts, err).exit_code, kExitConfigError);
}

TEST(Runner, DivergenceExitsWithThree) {
    const fs::path dir = scratch("diverge");
    const std::string text = R"(
[problem]
m = 1
T = 0.1
blowup_threshold = 0.5
x0 = [2.0]
[mc]
n_paths = 4
)";
    RunOptions opts{"simulate", write_config(dir, text).string(), std::nullopt, 1,
                    (dir / "out").string()};
    std::ostringstream err;
    const auto r = run(opts, err);
    EXPECT_EQ(r.exit_code, kExitDivergence);
    ASSERT_FALSE(r.directory.empty());
    EXPECT_EQ(r.report["error"]["kind"], "divergence");
    EXPECT_TRUE(r.report["error"].contains("path_index"));
}
