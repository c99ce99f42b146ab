#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "exitsim/harness.hpp"

using namespace exitsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("exitsim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Non-comment lines of a CSV, header row first.
std::vector<std::string> body(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

std::vector<std::string> cells(const std::string& row) {
    std::vector<std::string> out;
    std::string c;
    std::istringstream in(row);
    while (std::getline(in, c, ',')) out.push_back(c);
    if (!row.empty() && row.back() == ',') out.emplace_back();
    return out;
}

int run_cli(const std::string& args, const fs::path& err) {
    const std::string cmd = std::string("\"") + EXITSIM_CLI_PATH + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
    const auto cfg = parse(
        "# study\n"
        "preset = cosine1d\n"
        "order = 1, 1.5   # both\n"
        "levels = 3..5\n"
        "h = 2^-4..2^-6, 0.01\n"
        "samples = 500\n"
        "seed = 9\n"
        "param.beta = 0.25\n"
        "wiener_special = false\n");
    EXPECT_EQ(cfg.preset, "cosine1d");
    ASSERT_EQ(cfg.orders.size(), 2u);
    EXPECT_EQ(cfg.orders[1], SchemeOrder::order15);
    EXPECT_EQ(cfg.levels, (std::vector<int>{3, 4, 5}));
    EXPECT_EQ(cfg.h_list, (std::vector<double>{1.0 / 16, 1.0 / 32, 1.0 / 64, 0.01}));
    EXPECT_EQ(cfg.samples, 500u);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.params.at("beta"), 0.25);
    EXPECT_NO_THROW(validate_config(cfg));
}

TEST(Config, ErrorsNameLineAndField) {
    auto expect_error = [](const std::string& text, int line, const std::string& field) {
        try {
            parse(text);
            FAIL() << text;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.line(), line) << e.what();
            EXPECT_EQ(e.field(), field) << e.what();
        }
    };
    expect_error("preset = gbm1d\n\nsamples = lots\n", 3, "samples");
    expect_error("samples = 0\n", 1, "samples");
    expect_error("levels = 5,4\n", 1, "levels");
    expect_error("levels = 3..7\nh = 0.5\n", 2, "h");
    expect_error("order = 2\n", 1, "order");
    expect_error("colour = red\n", 1, "colour");
    expect_error("just text\n", 1, "just text");
    expect_error("seed =\n", 1, "seed");
}

TEST(Config, UnknownPresetAndParameter) {
    ExperimentConfig cfg;
    cfg.preset = "gbm3d";
    try {
        validate_config(cfg);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "preset");
        EXPECT_NE(std::string(e.what()).find("gbm3d"), std::string::npos);
    }
    cfg.preset = "gbm1d";
    cfg.params["nu"] = 1.0;
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg.params.clear();
    cfg.orders = {SchemeOrder::order15};
    cfg.wiener_special = true;
    EXPECT_THROW(validate_config(cfg), ConfigError);
}

TEST(Commands, SimulateWritesTableAndSummary) {
    ExperimentConfig cfg;
    cfg.preset = "gbm1d";
    cfg.orders = {SchemeOrder::order1, SchemeOrder::order15};
    cfg.h_list = {1.0 / 8, 1.0 / 16};
    cfg.samples = 200;
    cfg.seed = 5;
    cfg.workers = 2;
    cfg.out_dir = scratch("simulate").string();
    const auto rep = cmd_simulate(cfg);
    const auto text = slurp(fs::path(cfg.out_dir) / "mean_exit.csv");
    EXPECT_NE(text.find("# preset: gbm1d"), std::string::npos);
    EXPECT_NE(text.find("# seed: 5"), std::string::npos);
    EXPECT_NE(text.find("# samples: 200"), std::string::npos);
    EXPECT_NE(text.find(std::string("# exitsim ") + kVersion), std::string::npos);
    EXPECT_EQ(text.find("workers"), std::string::npos);
    const auto rows = body(fs::path(cfg.out_dir) / "mean_exit.csv");
    ASSERT_EQ(rows.size(), 5u);
    const auto head = cells(rows[0]);
    const auto first = cells(rows[1]);
    ASSERT_EQ(head.size(), first.size());
    EXPECT_EQ(first[0], "1");
    EXPECT_EQ(cells(rows[3])[0], "1.5");
    EXPECT_NEAR(std::stod(first[3]), kGbm1dMeanExit, 1.0);
    EXPECT_FALSE(fs::exists(fs::path(cfg.out_dir) / "trace.csv"));

    std::ifstream js(fs::path(cfg.out_dir) / "summary.json");
    const auto j = nlohmann::json::parse(js);
    EXPECT_EQ(j["command"], "simulate");
    ASSERT_EQ(j["results"].size(), 4u);
    EXPECT_EQ(j["results"][0]["mean_nu"]["estimate"].get<double>(), std::stod(first[3]));
    EXPECT_EQ(j["results"][0]["reference"].get<double>(), kGbm1dMeanExit);
    EXPECT_EQ(rep.files.size(), 2u);
}

TEST(Commands, SimulateSinglePathTrace) {
    ExperimentConfig cfg;
    cfg.preset = "cosine1d";
    cfg.orders = {SchemeOrder::order15};
    cfg.h_list = {1.0 / 8};
    cfg.samples = 1;
    cfg.out_dir = scratch("trace").string();
    cmd_simulate(cfg);
    const auto trace = body(fs::path(cfg.out_dir) / "trace.csv");
    ASSERT_GE(trace.size(), 2u);
    EXPECT_EQ(trace[0], "step,t,dt,class,distance,state");
    const auto row = cells(body(fs::path(cfg.out_dir) / "mean_exit.csv")[1]);
    EXPECT_EQ(row[4], "nan");
    // Step count in the ledger equals the reported cost.
    EXPECT_EQ(static_cast<double>(trace.size() - 1), std::stod(row[7]));
}

TEST(Commands, ConvergenceTablesAndFits) {
    ExperimentConfig cfg;
    cfg.preset = "cosine1d";
    cfg.orders = {SchemeOrder::order1};
    cfg.levels = {3, 4, 5};
    cfg.samples = 400;
    cfg.gnuplot = true;
    cfg.out_dir = scratch("convergence").string();
    const auto rep = cmd_convergence(cfg);
    EXPECT_TRUE(rep.warnings.empty());
    const auto rates = body(fs::path(cfg.out_dir) / "rates.csv");
    ASSERT_EQ(rates.size(), 4u);
    EXPECT_EQ(cells(rates[1])[1], "3");
    EXPECT_EQ(cells(rates[1])[4], "");
    EXPECT_FALSE(cells(rates[2])[4].empty());
    const auto fits = body(fs::path(cfg.out_dir) / "rate_fits.csv");
    ASSERT_EQ(fits.size(), 4u);
    EXPECT_EQ(cells(fits[1])[1], "strong");
    EXPECT_FALSE(cells(fits[1])[2].empty());
    EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "rates.gp"));
}

TEST(Commands, ConvergenceSingleLevel) {
    ExperimentConfig cfg;
    cfg.preset = "gbm1d";
    cfg.levels = {4};
    cfg.samples = 100;
    cfg.out_dir = scratch("single_level").string();
    const auto rep = cmd_convergence(cfg);
    ASSERT_EQ(rep.warnings.size(), 1u);
    EXPECT_NE(rep.warnings[0].find("no rate fit"), std::string::npos);
    EXPECT_EQ(body(fs::path(cfg.out_dir) / "rates.csv").size(), 2u);
    EXPECT_TRUE(rep.summary["orders"][0]["strong_fit"].is_null());
}

TEST(Commands, CostRatiosAndSingleH) {
    ExperimentConfig cfg;
    cfg.preset = "gbm1d";
    cfg.h_list = {1.0 / 16, 1.0 / 32};
    cfg.samples = 100;
    cfg.out_dir = scratch("cost").string();
    cmd_cost(cfg);
    auto rows = body(fs::path(cfg.out_dir) / "cost.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(cells(rows[1])[5], "");
    EXPECT_GT(std::stod(cells(rows[2])[5]), 1.0);

    cfg.h_list = {1.0 / 16};
    const auto rep = cmd_cost(cfg);
    rows = body(fs::path(cfg.out_dir) / "cost.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(cells(rows[1])[5], "");
    EXPECT_EQ(rep.warnings.size(), 1u);
    EXPECT_TRUE(rep.summary["orders"][0]["r_squared"].is_null());
}

TEST(Commands, Reference) {
    ExperimentConfig cfg;
    cfg.preset = "gbm1d";
    cfg.out_dir = scratch("reference").string();
    cfg.pde_profile = true;
    auto rep = cmd_reference(cfg);
    EXPECT_NEAR(rep.summary["value"].get<double>(), kGbm1dMeanExit, 5e-3);
    EXPECT_EQ(rep.summary["method"], "pde");
    EXPECT_EQ(body(fs::path(cfg.out_dir) / "profile.csv").size(), cfg.pde_nx + 1);

    cfg.preset = "cosine2d";
    rep = cmd_reference(cfg);
    EXPECT_EQ(rep.summary["value"].get<double>(), kCosine2dMeanExit);
    EXPECT_EQ(rep.summary["method"], "published");
    const auto row = body(fs::path(cfg.out_dir) / "reference.csv")[1];
    EXPECT_NE(row.find("not recomputed"), std::string::npos);

    cfg.params["mu"] = 0.1;
    cfg.preset = "gbm2d";
    EXPECT_THROW(cmd_reference(cfg), std::invalid_argument);
}

TEST(Cli, DeterministicAcrossWorkers) {
    const auto dir = scratch("cli");
    const auto err = dir / "err.txt";
    const std::string common = " --preset cosine2d --order 1.5 --levels 2..4 --samples 300 --seed 77";
    ASSERT_EQ(run_cli("convergence" + common + " --workers 1 --out " + (dir / "w1").string(), err), 0) << slurp(err);
    ASSERT_EQ(run_cli("convergence" + common + " --workers 3 --out " + (dir / "w3").string(), err), 0) << slurp(err);
    for (const char* f : {"rates.csv", "rate_fits.csv"})
        EXPECT_EQ(slurp(dir / "w1" / f), slurp(dir / "w3" / f)) << f;
}

TEST(Cli, ConfigFileAndOverrides) {
    const auto dir = scratch("cli_config");
    const auto err = dir / "err.txt";
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "preset = wiener1d\nh = 2^-5\nsamples = 50\nseed = 3\n";
    }
    ASSERT_EQ(run_cli("simulate --config " + (dir / "run.cfg").string() + " --seed 4 --wiener-special --out " +
                          (dir / "o").string(),
                      err),
              0)
        << slurp(err);
    const auto text = slurp(dir / "o" / "mean_exit.csv");
    EXPECT_NE(text.find("# seed: 4"), std::string::npos);
    EXPECT_NE(text.find("# wiener_special: true"), std::string::npos);
}

TEST(Cli, ErrorsExitNonzero) {
    const auto dir = scratch("cli_errors");
    const auto err = dir / "err.txt";
    EXPECT_NE(run_cli("simulate --preset nope --out " + dir.string(), err), 0);
    EXPECT_NE(slurp(err).find("preset"), std::string::npos);
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "preset = gbm1d\nsamples = -3\n";
    }
    EXPECT_NE(run_cli("simulate --config " + (dir / "bad.cfg").string(), err), 0);
    EXPECT_NE(slurp(err).find("line 2"), std::string::npos);
    EXPECT_NE(run_cli("convergence --preset gbm1d --out " + dir.string(), err), 0);
    EXPECT_NE(run_cli("simulate --preset gbm1d --order 2", err), 0);
    EXPECT_NE(run_cli("", err), 0);
}
