#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hoif/simulate.hpp"
#include "hoif/table_io.hpp"
#include "test_support.hpp"

using namespace hoif;
using hoif::testing::random_model;

namespace {

Eigen::VectorXd point1(double x) {
    Eigen::VectorXd z(1);
    z[0] = x;
    return z;
}

DiscreteModel fixture_model() {
    DiscreteModel m;
    m.kind = ModelKind::missing_data();
    m.support = {point1(0.25), point1(0.75)};
    m.f = Eigen::Vector2d(0.5, 0.5);
    m.a = Eigen::Vector2d(2.0, 4.0);
    m.b = Eigen::Vector2d(0.3, 0.7);
    return m;
}

} // namespace

TEST_SUITE("simulate") {

TEST_CASE("generate_dataset: edge cases") {
    const DiscreteModel m = fixture_model();
    CHECK(generate_dataset(m, 0, 1).empty());

    DiscreteModel certain = m;
    certain.a = Eigen::Vector2d(1.0, 1.0); // observation probability 1
    const auto data = generate_dataset(certain, 200, 5);
    for (const auto& obs : data) CHECK(obs.a == 1.0);
}

TEST_CASE("generate_dataset: atom frequencies match exact probabilities") {
    Rng rng(14);
    for (ModelTag tag : {ModelTag::MissingData, ModelTag::Covariance, ModelTag::Ate}) {
        const DiscreteModel m = random_model(tag, rng, 3);
        const int n = 100000;
        const auto data = generate_dataset(m, n, 271828);
        const auto atoms = enumerate_observations(m);

        auto key = [](const Observation& o) {
            return std::tuple(o.z.atom, o.a, o.y1, o.y2);
        };
        for (const auto& wo : atoms) {
            std::size_t count = 0;
            for (const auto& obs : data)
                if (key(obs) == key(wo.obs)) ++count;
            const double phat = static_cast<double>(count) / n;
            const double band = 4.0 * std::sqrt(wo.prob * (1.0 - wo.prob) / n);
            CHECK(std::abs(phat - wo.prob) <= band + 1e-12);
        }
    }
}

TEST_CASE("generate_dataset: deterministic given the seed") {
    const DiscreteModel m = fixture_model();
    const auto d1 = generate_dataset(m, 100, 909);
    const auto d2 = generate_dataset(m, 100, 909);
    REQUIRE(d1.size() == d2.size());
    for (std::size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1[i].y1 == d2[i].y1);
        CHECK(d1[i].a == d2[i].a);
        CHECK(d1[i].z.atom == d2[i].z.atom);
    }
}

TEST_CASE("lacunary series: range, exact integrals") {
    const LacunarySeries g = LacunarySeries::make(1, 1.0, 0.5, 0.3, 12, 99);
    const EvalDomain grid = EvalDomain::dyadic_grid(1, 10);
    double quad = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        const double v = g(grid.points[static_cast<std::size_t>(i)]);
        CHECK(v >= 0.2 - 1e-12);
        CHECK(v <= 0.8 + 1e-12);
        quad += v * grid.masses[i];
    }
    // every cosine term has integer frequency, so the mean is the base value;
    // midpoint quadrature at level 10 resolves frequencies up to 2^12 poorly,
    // hence the loose band
    CHECK(std::abs(quad - 0.5) <= 0.01);

    const LacunarySeries h = LacunarySeries::make(1, 1.0, 0.4, 0.2, 12, 100);
    const double prod = product_integral(g, h);
    double quad2 = 0.0;
    const EvalDomain fine = EvalDomain::dyadic_grid(1, 14);
    for (int i = 0; i < fine.size(); ++i)
        quad2 += g(fine.points[static_cast<std::size_t>(i)]) *
                 h(fine.points[static_cast<std::size_t>(i)]) * fine.masses[i];
    CHECK(std::abs(prod - quad2) <= 2e-3);
}

TEST_CASE("continuous truth: chi is exact for the missing-data kind") {
    const ContinuousTruth t = make_continuous_truth(ModelKind::missing_data(), {1.0, 1.0, 1.0, 1},
                                                    2.0, 0.6, 0.5, 0.35, 12, 7);
    CHECK(t.chi == doctest::Approx(0.5).epsilon(1e-15));
    const auto data = generate_dataset(t, 500, 3);
    CHECK(data.size() == 500);
    for (const auto& obs : data) {
        CHECK(obs.z.point[0] >= 0.0);
        CHECK(obs.z.point[0] <= 1.0);
        if (obs.a == 0.0) CHECK(obs.y1 == 0.0);
    }
}

TEST_CASE("continuous covariance truth: chi matches quadrature") {
    const ContinuousTruth t = make_continuous_truth(ModelKind::covariance(), {1.0, 1.0, 1.0, 1},
                                                    0.5, 0.25, 0.5, 0.3, 10, 21);
    const EvalDomain fine = EvalDomain::dyadic_grid(1, 14);
    double quad = 0.0;
    for (int i = 0; i < fine.size(); ++i)
        quad += t.a(fine.points[static_cast<std::size_t>(i)]) *
                t.b(fine.points[static_cast<std::size_t>(i)]) * fine.masses[i];
    CHECK(std::abs(t.chi - quad) <= 2e-3);
    const auto data = generate_dataset(t, 300, 9);
    for (const auto& obs : data) {
        CHECK((obs.a == 0.0 || obs.a == 1.0));
        CHECK((obs.y1 == 0.0 || obs.y1 == 1.0));
    }
}

TEST_CASE("cross_fit_estimate: continuous data with the second-order correction") {
    const ContinuousTruth t = make_continuous_truth(ModelKind::missing_data(), {1.0, 1.0, 1.0, 1},
                                                    2.0, 0.6, 0.5, 0.35, 12, 7);
    const auto data = generate_dataset(t, 800, 77);
    CrossFitConfig cfg;
    cfg.folds = 2;
    cfg.seed = 3;
    cfg.partition = Partition::dyadic(1, 3);
    cfg.k_truncation = 8;
    const EstimateReport rep = cross_fit_estimate(t.kind, data, cfg);
    CHECK(rep.k_used == 8);
    CHECK(std::isfinite(rep.chi_second));
    CHECK(std::abs(rep.chi_first - t.chi) <= 0.2);
    CHECK(rep.gram_condition >= 1.0);
}

TEST_CASE("run_experiment: determinism across runs and thread counts") {
    ExperimentConfig cfg;
    cfg.truth = fixture_model();
    cfg.n_grid = {50, 100};
    cfg.k_schedule.fixed = {1, 1};
    cfg.replications = 6;
    cfg.seed = 4242;
    cfg.estimators = {EstimatorId::Plugin, EstimatorId::FirstOrder, EstimatorId::SecondOrder};
    cfg.fit_mode = FitMode::Fixed;
    cfg.fixed_fit.a_hat = Eigen::Vector2d(2.5, 3.5);
    cfg.fixed_fit.b_hat = Eigen::Vector2d(0.4, 0.6);

    cfg.threads = 1;
    const ResultTable t1 = run_experiment(cfg);
    cfg.threads = 4;
    const ResultTable t2 = run_experiment(cfg);

    std::ostringstream s1, s2;
    write_result_table(s1, t1);
    write_result_table(s2, t2);
    CHECK(s1.str() == s2.str());
    CHECK(t1.rows.size() == 6); // 3 estimators x 2 n values
}

TEST_CASE("run_experiment: oracle mode is unbiased for the plug-in") {
    ExperimentConfig cfg;
    cfg.truth = fixture_model();
    cfg.n_grid = {40};
    cfg.k_schedule.fixed = {1};
    cfg.replications = 5;
    cfg.seed = 11;
    cfg.estimators = {EstimatorId::Plugin};
    cfg.fit_mode = FitMode::Oracle;
    const ResultTable t = run_experiment(cfg);
    REQUIRE(t.rows.size() == 1);
    CHECK(std::abs(t.rows[0].bias) <= 1e-12);
}

TEST_CASE("run_experiment: rows satisfy rmse^2 = bias^2 + variance") {
    ExperimentConfig cfg;
    cfg.truth = fixture_model();
    cfg.n_grid = {60};
    cfg.k_schedule.fixed = {2};
    cfg.folds = 2;
    cfg.replications = 10;
    cfg.seed = 77;
    cfg.estimators = {EstimatorId::Plugin, EstimatorId::FirstOrder, EstimatorId::SecondOrder};
    cfg.fit_mode = FitMode::Split;
    const ResultTable t = run_experiment(cfg);
    for (const auto& row : t.rows) {
        CHECK(std::abs(row.rmse * row.rmse - (row.bias * row.bias + row.variance)) <= 1e-10);
        CHECK(row.replications == 10);
    }
}

TEST_CASE("run_experiment: MC mean matches the exact first-order bias (small R)") {
    const DiscreteModel m = fixture_model();
    FixedFit fit;
    fit.a_hat = m.a + Eigen::Vector2d(0.5, -0.5);
    fit.b_hat = m.b + Eigen::Vector2d(0.1, -0.1);

    ExperimentConfig cfg;
    cfg.truth = m;
    cfg.n_grid = {200};
    cfg.k_schedule.fixed = {1};
    cfg.replications = 400;
    cfg.seed = 31337;
    cfg.estimators = {EstimatorId::FirstOrder};
    cfg.fit_mode = FitMode::Fixed;
    cfg.fixed_fit = fit;
    const ResultTable t = run_experiment(cfg);
    REQUIRE(t.rows.size() == 1);
    const double se = std::sqrt(t.rows[0].variance / t.rows[0].replications);
    CHECK(std::abs(t.rows[0].bias - (-0.01875)) <= 4.0 * se);
}

TEST_CASE("rate_slope: exact synthetic tables") {
    ResultTable t;
    for (int n : {100, 400, 1600, 6400}) {
        ResultRow r;
        r.estimator = "first";
        r.n = n;
        r.rmse = std::pow(n, -0.5);
        t.rows.push_back(r);
        r.estimator = "plugin";
        r.rmse = 3.0 * std::pow(n, -1.0 / 3.0);
        t.rows.push_back(r);
    }
    CHECK(rate_slope(t, EstimatorId::FirstOrder) == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(rate_slope(t, EstimatorId::Plugin) == doctest::Approx(-1.0 / 3.0).epsilon(1e-10));

    ResultTable two;
    two.rows = {t.rows[0], t.rows[2]};
    CHECK_THROWS_AS(rate_slope(two, EstimatorId::FirstOrder), std::invalid_argument);
}

TEST_CASE("result table round trip") {
    ResultTable t;
    ResultRow r;
    r.estimator = "first";
    r.n = 100;
    r.k = 4;
    r.mean = 0.123456789012345678;
    r.bias = -1e-9;
    r.variance = 2.5e-4;
    r.rmse = 0.0158;
    r.replications = 7;
    r.seed = 99;
    t.rows.push_back(r);

    const std::string path = "roundtrip_table.csv";
    write_result_table_file(path, t);
    const ResultTable back = read_result_table_file(path);
    REQUIRE(back.rows.size() == 1);
    CHECK(back.rows[0].mean == r.mean);
    CHECK(back.rows[0].bias == r.bias);
    CHECK(back.rows[0].estimator == "first");
    std::remove(path.c_str());
}

TEST_CASE("dataset file round trip, blank y2 for single-outcome models") {
    const DiscreteModel m = fixture_model();
    Dataset data;
    data.d = 1;
    data.has_y2 = false;
    data.observations = generate_dataset(m, 25, 8);

    const std::string path = "roundtrip_data.csv";
    write_dataset_file(path, data);
    const Dataset back = read_dataset_file(path);
    REQUIRE(back.observations.size() == 25);
    CHECK(back.has_y2 == false);
    CHECK(back.d == 1);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(back.observations[i].y1 == data.observations[i].y1);
        CHECK(back.observations[i].a == data.observations[i].a);
        CHECK(back.observations[i].z.point[0] ==
              doctest::Approx(data.observations[i].z.point[0]).epsilon(1e-16));
    }
    std::remove(path.c_str());
}

} // TEST_SUITE
