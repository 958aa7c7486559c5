#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "config_io.hpp"
#include "hoif/simulate.hpp"
#include "hoif/table_io.hpp"

using namespace hoif;

namespace {

std::string cli_path() {
    const char* p = std::getenv("HOIF_CLI_PATH");
    return p ? p : "";
}

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string out_file = "cli_out.tmp";
    const std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(out_file);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    std::remove(out_file.c_str());
    return r;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    os << body;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* kFixtureModel = R"({
  "kind": "missing_data",
  "support": [0.25, 0.75],
  "f": [0.5, 0.5],
  "a": [2.0, 4.0],
  "b": [0.3, 0.7]
})";

const char* kFixtureFit = R"({
  "a_hat": [2.5, 3.5],
  "b_hat": [0.4, 0.6]
})";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing: strict fields and good errors") {
    write_file("bad_config.json", R"({"model": {"kind": "missing_data", "support": [0.5],
        "f": [1.0], "a": [2.0], "b": [0.5]}, "n_grid": [10], "estimators": ["first"],
        "replciations": 3})");
    CHECK_THROWS_WITH_AS(cli::parse_experiment_config_file("bad_config.json"),
                         doctest::Contains("replciations"), ConfigError);
    std::remove("bad_config.json");

    write_file("bad_model.json", R"({"kind": "missing_data", "support": [0.5], "f": [1.0],
        "a": [0.5], "b": [0.5]})");
    CHECK_THROWS_AS(cli::parse_model_file("bad_model.json"), ConfigError);
    std::remove("bad_model.json");

    write_file("bad_est.json", R"({"model": {"kind": "missing_data", "support": [0.5],
        "f": [1.0], "a": [2.0], "b": [0.5]}, "n_grid": [10], "estimators": ["zeroth"]})");
    CHECK_THROWS_WITH_AS(cli::parse_experiment_config_file("bad_est.json"),
                         doctest::Contains("zeroth"), ConfigError);
    std::remove("bad_est.json");
}

TEST_CASE("config parsing: continuous model and defaults") {
    write_file("cont_config.json", R"({
      "model": {"kind": "missing_data",
                "continuous": {"d": 1, "alpha": 1.0, "beta": 1.0, "seed": 7}},
      "n_grid": [100, 200, 400],
      "estimators": ["plugin", "first"],
      "replications": 2,
      "seed": 9
    })");
    const ExperimentConfig cfg = cli::parse_experiment_config_file("cont_config.json");
    CHECK(cfg.n_grid.size() == 3);
    CHECK(cfg.replications == 2);
    CHECK(cfg.folds == 2);
    CHECK(std::holds_alternative<ContinuousTruth>(cfg.truth));
    // default truncation schedule caps at n/4
    CHECK(cfg.k_schedule.at(0, 100) <= 25);
    std::remove("cont_config.json");
}

TEST_CASE("oracle subcommand prints the fixture bias") {
    REQUIRE_FALSE(cli_path().empty());
    write_file("model.json", kFixtureModel);
    write_file("fit.json", kFixtureFit);
    const RunResult r = run_cli("oracle --model model.json --fit fit.json --k 1");
    CHECK(r.exit_code == 0);
    auto value_after = [&](const std::string& label) {
        const auto pos = r.output.find(label);
        REQUIRE(pos != std::string::npos);
        return std::stod(r.output.substr(pos + label.size()));
    };
    CHECK(value_after("first_order_bias_enumerated") == doctest::Approx(-0.01875).epsilon(1e-12));
    CHECK(value_after("first_order_bias_formula") == doctest::Approx(-0.01875).epsilon(1e-12));
    CHECK(value_after("second_order_bias_enumerated") ==
          doctest::Approx(-1.0 / 60.0).epsilon(1e-12));
    std::remove("model.json");
    std::remove("fit.json");
}

TEST_CASE("simulate is byte-identical across runs and thread counts") {
    REQUIRE_FALSE(cli_path().empty());
    write_file("sim_config.json", R"({
      "model": {"kind": "missing_data", "support": [0.25, 0.75], "f": [0.5, 0.5],
                "a": [2.0, 4.0], "b": [0.3, 0.7]},
      "n_grid": [40, 80],
      "k": {"fixed": [1, 2]},
      "replications": 4,
      "seed": 777,
      "estimators": ["plugin", "first", "second"],
      "fit": {"mode": "fixed", "a_hat": [2.5, 3.5], "b_hat": [0.4, 0.6]}
    })");
    const RunResult r1 = run_cli("simulate --config sim_config.json --out sim1.csv --threads 1");
    const RunResult r2 = run_cli("simulate --config sim_config.json --out sim2.csv --threads 3");
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp("sim1.csv") == slurp("sim2.csv"));
    CHECK(!slurp("sim1.csv").empty());
    std::remove("sim_config.json");
    std::remove("sim1.csv");
    std::remove("sim2.csv");
}

TEST_CASE("estimate subcommand runs end to end on a written dataset") {
    REQUIRE_FALSE(cli_path().empty());
    write_file("model.json", kFixtureModel);
    DiscreteModel m;
    m.kind = ModelKind::missing_data();
    Eigen::VectorXd z1(1), z2(1);
    z1 << 0.25;
    z2 << 0.75;
    m.support = {z1, z2};
    m.f = Eigen::Vector2d(0.5, 0.5);
    m.a = Eigen::Vector2d(2.0, 4.0);
    m.b = Eigen::Vector2d(0.3, 0.7);
    Dataset data;
    data.d = 1;
    data.observations = generate_dataset(m, 600, 12);
    write_dataset_file("data.csv", data);

    const RunResult r = run_cli("estimate --data data.csv --model model.json --k 2 --seed 5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("chi_plugin") != std::string::npos);
    CHECK(r.output.find("chi_first") != std::string::npos);
    CHECK(r.output.find("chi_second") != std::string::npos);
    CHECK(r.output.find("var_first") != std::string::npos);
    std::remove("model.json");
    std::remove("data.csv");
}

TEST_CASE("bad inputs exit with code 1 and name the field") {
    REQUIRE_FALSE(cli_path().empty());
    const RunResult unknown = run_cli("frobnicate");
    CHECK(unknown.exit_code == 1);

    write_file("typo_config.json", R"({"model": {"kind": "missing_data", "support": [0.5],
      "f": [1.0], "a": [2.0], "b": [0.5]}, "n_grid": [10], "estimators": ["first"],
      "outptu": "x.csv"})");
    const RunResult typo = run_cli("simulate --config typo_config.json");
    CHECK(typo.exit_code == 1);
    CHECK(typo.output.find("outptu") != std::string::npos);
    std::remove("typo_config.json");

    const RunResult missing = run_cli("simulate --config does_not_exist.json");
    CHECK(missing.exit_code == 1);
}

TEST_CASE("selftest subcommand passes") {
    REQUIRE_FALSE(cli_path().empty());
    const RunResult r = run_cli("selftest");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("all selftest checks passed") != std::string::npos);
}

TEST_CASE("HOIF_OUT_DIR controls relative outputs, flag overrides") {
    CHECK(cli::resolve_output_path("/abs/x.csv", "dir") == "/abs/x.csv");
    CHECK(cli::resolve_output_path("x.csv", "dir") == "dir/x.csv");
    setenv("HOIF_OUT_DIR", "envdir", 1);
    CHECK(cli::resolve_output_path("x.csv", "") == "envdir/x.csv");
    CHECK(cli::resolve_output_path("x.csv", "flagdir") == "flagdir/x.csv");
    unsetenv("HOIF_OUT_DIR");
    CHECK(cli::resolve_output_path("x.csv", "") == "x.csv");
}

} // TEST_SUITE
