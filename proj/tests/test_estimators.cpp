#include <doctest.h>

#include <cmath>

#include "hoif/estimators.hpp"
#include "hoif/simulate.hpp"
#include "test_support.hpp"

using namespace hoif;
using hoif::testing::random_fixed_fit;
using hoif::testing::random_model;
using hoif::testing::random_tag;
using hoif::testing::random_vector;

namespace {

Eigen::VectorXd point1(double x) {
    Eigen::VectorXd z(1);
    z[0] = x;
    return z;
}

// J=2 missing-data fixture: f=(1/2,1/2), a=(2,4), b=(0.3,0.7).
// With a_hat-a=(0.5,-0.5) and b_hat-b=(0.1,-0.1) the first-order bias is
//   sum (a_hat-a)(b_hat-b) (-f/a) = -0.0125 - 0.00625 = -0.01875.
DiscreteModel fixture_model() {
    DiscreteModel m;
    m.kind = ModelKind::missing_data();
    m.support = {point1(0.25), point1(0.75)};
    m.f = Eigen::Vector2d(0.5, 0.5);
    m.a = Eigen::Vector2d(2.0, 4.0);
    m.b = Eigen::Vector2d(0.3, 0.7);
    return m;
}

FixedFit fixture_fit(const DiscreteModel& m) {
    FixedFit fit;
    fit.a_hat = m.a + Eigen::Vector2d(0.5, -0.5);
    fit.b_hat = m.b + Eigen::Vector2d(0.1, -0.1);
    return fit;
}

WeightMeasure true_weight(const DiscreteModel& m) {
    return WeightMeasure::of(m.atom_fn(m.weight_atoms()));
}

ProjectionKernel truncation_kernel(const DiscreteModel& m, const BasisSystem& basis) {
    return ProjectionKernel(basis, true_weight(m), EvalDomain::atoms(m.support));
}

} // namespace

TEST_SUITE("estimators") {

TEST_CASE("residual functions have the advertised conditional means") {
    Rng rng(2718);
    for (int trial = 0; trial < 60; ++trial) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        const FixedFit fit = random_fixed_fit(m, rng);
        const NuisanceFit view = fixed_fit_view(m, fit);
        const ResidualFns res = residual_fns(m.kind, view.a_hat, view.b_hat);

        const auto atoms = enumerate_observations(m);
        Eigen::VectorXd mean_a = Eigen::VectorXd::Zero(m.size());
        Eigen::VectorXd mean_b = Eigen::VectorXd::Zero(m.size());
        for (const auto& wo : atoms) {
            mean_a[wo.obs.z.atom] += wo.prob * res.eps_a(wo.obs);
            mean_b[wo.obs.z.atom] += wo.prob * res.eps_b(wo.obs);
        }
        const Eigen::VectorXd s1 = m.stilde1_atoms();
        for (int j = 0; j < m.size(); ++j) {
            if (m.f[j] == 0.0) continue;
            CHECK(std::abs(mean_a[j] / m.f[j] - s1[j] * (fit.a_hat[j] - m.a[j])) <= 1e-12);
            CHECK(std::abs(mean_b[j] / m.f[j] - s1[j] * (fit.b_hat[j] - m.b[j])) <= 1e-12);
        }
    }
}

TEST_CASE("first-order exact bias: the -0.01875 fixture") {
    const DiscreteModel m = fixture_model();
    const BiasPair bias = exact_bias_first_order(m, fixture_fit(m));
    CHECK(bias.enumerated == doctest::Approx(-0.01875).epsilon(1e-12));
    CHECK(bias.formula == doctest::Approx(-0.01875).epsilon(1e-12));
    CHECK(std::abs(bias.enumerated - bias.formula) <= 1e-12);
}

TEST_CASE("first-order exact bias: identity over random models and fits") {
    Rng rng(161803);
    for (int trial = 0; trial < 120; ++trial) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        FixedFit fit = random_fixed_fit(m, rng);
        if (rng.bernoulli(0.3)) fit.f_hat = random_vector(rng, m.size(), 0.05, 1.0);
        const BiasPair bias = exact_bias_first_order(m, fit);
        CHECK(std::abs(bias.enumerated - bias.formula) <= 1e-10);
    }
}

TEST_CASE("double robustness: either nuisance correct kills the bias") {
    Rng rng(31415);
    for (int trial = 0; trial < 60; ++trial) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        FixedFit fit = random_fixed_fit(m, rng);
        fit.a_hat = m.a; // a correct
        BiasPair bias = exact_bias_first_order(m, fit);
        CHECK(std::abs(bias.enumerated) <= 1e-12);
        CHECK(std::abs(bias.formula) <= 1e-12);

        fit = random_fixed_fit(m, rng);
        fit.b_hat = m.b; // b correct
        bias = exact_bias_first_order(m, fit);
        CHECK(std::abs(bias.enumerated) <= 1e-12);
        CHECK(std::abs(bias.formula) <= 1e-12);
    }
}

TEST_CASE("bias is bilinear in the nuisance errors") {
    Rng rng(5381);
    const DiscreteModel m = random_model(ModelTag::Covariance, rng);
    const FixedFit fit = random_fixed_fit(m, rng);
    const double b1 = exact_bias_first_order(m, fit).enumerated;

    FixedFit scaled = fit;
    scaled.a_hat = m.a + 2.0 * (fit.a_hat - m.a);
    const double b2 = exact_bias_first_order(m, scaled).enumerated;
    CHECK(b2 == doctest::Approx(2.0 * b1).epsilon(1e-12));
}

TEST_CASE("estimate_first_order: exact expectation at the truth is chi") {
    Rng rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        const NuisanceFit fit = truth_fit_view(m);
        const double chi = functional_chi(m);
        // chi_plugin is deterministic, the correction is a sample mean, so
        // E[chi_first] = chi_plugin + E[if1]
        const double chi_plugin = functional_chi(
            m.kind, fit.a_hat, fit.b_hat, fit.f_hat, fit.chi_domain.points, fit.chi_domain.masses);
        CHECK(chi_plugin == doctest::Approx(chi).epsilon(1e-13));
        const double mean_if1 = exact_expectation(m, [&](const Observation& o) {
            return first_order_if(m.kind, fit.a_hat, fit.b_hat, chi_plugin, o);
        });
        CHECK(std::abs(mean_if1) <= 1e-12);
    }
}

TEST_CASE("estimate_first_order: sample behavior on a fixed dataset") {
    const DiscreteModel m = fixture_model();
    const auto data = generate_dataset(m, 400, 99);
    const NuisanceFit fit = fixed_fit_view(m, fixture_fit(m));
    const FirstOrderEstimate est = estimate_first_order(data, fit, m.kind);
    CHECK(std::isfinite(est.chi_first));
    CHECK(est.var_first >= 0.0);
    // the plug-in under f_hat = f: sum of b_hat f
    CHECK(est.chi_plugin == doctest::Approx(0.5 * 0.4 + 0.5 * 0.6).epsilon(1e-14));
}

TEST_CASE("second-order kernel: degenerate at the truth") {
    Rng rng(5462);
    for (int trial = 0; trial < 40; ++trial) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        const int k = std::min(2, m.size());
        const ProjectionKernel pk =
            truncation_kernel(m, BasisSystem::tensor_haar_capped(1, k));
        const NuisanceFit fit = truth_fit_view(m);
        const Kernel2<Observation> kernel =
            build_second_order_kernel(m.kind, fit.a_hat, fit.b_hat, pk);
        CHECK(degeneracy_check(m, kernel) <= 1e-10);
    }
}

TEST_CASE("second-order exact bias: k=1 constant-basis fixture equals -1/60") {
    const DiscreteModel m = fixture_model();
    const ProjectionKernel pk = truncation_kernel(m, BasisSystem::constant(1));
    const BiasPair bias = exact_bias_second_order(m, fixture_fit(m), pk);
    CHECK(std::abs(bias.enumerated - bias.formula) <= 1e-10);
    CHECK(bias.enumerated == doctest::Approx(-1.0 / 60.0).epsilon(1e-12));
}

TEST_CASE("second-order exact bias: rank-0 kernel reduces to first order") {
    const DiscreteModel m = fixture_model();
    const ProjectionKernel pk(BasisSystem(), true_weight(m), EvalDomain::atoms(m.support));
    const BiasPair bias2 = exact_bias_second_order(m, fixture_fit(m), pk);
    const BiasPair bias1 = exact_bias_first_order(m, fixture_fit(m));
    CHECK(bias2.enumerated == doctest::Approx(bias1.enumerated).epsilon(1e-14));
    CHECK(bias2.formula == doctest::Approx(bias1.formula).epsilon(1e-14));
}

TEST_CASE("second-order exact bias: identity, in-span, orthogonal, full-rank") {
    Rng rng(24601);
    int done = 0;
    while (done < 60) {
        const DiscreteModel m = random_model(random_tag(rng), rng);
        if (m.size() < 3) continue;
        ++done;
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m.size() - 1)));
        const ProjectionKernel pk =
            truncation_kernel(m, BasisSystem::atom_indicators(m.support, k));

        // generic identity: enumeration equals the residual inner product
        const FixedFit fit = random_fixed_fit(m, rng);
        const BiasPair bias = exact_bias_second_order(m, fit, pk);
        CHECK(std::abs(bias.enumerated - bias.formula) <= 1e-10);

        // in-span errors: representation bias vanishes
        const Eigen::VectorXd u0 = random_vector(rng, m.size(), -1.0, 1.0);
        const Eigen::VectorXd v0 = random_vector(rng, m.size(), -1.0, 1.0);
        const auto pu = pk.project_values(u0);
        const auto pv = pk.project_values(v0);
        Eigen::VectorXd pu_vals(m.size());
        Eigen::VectorXd pv_vals(m.size());
        for (int j = 0; j < m.size(); ++j) {
            pu_vals[j] = pu.fn(m.support[static_cast<std::size_t>(j)]);
            pv_vals[j] = pv.fn(m.support[static_cast<std::size_t>(j)]);
        }
        FixedFit inspan;
        inspan.a_hat = m.a + pu_vals;
        inspan.b_hat = m.b + pv_vals;
        const BiasPair bias_inspan = exact_bias_second_order(m, inspan, pk);
        CHECK(std::abs(bias_inspan.enumerated) <= 1e-10);
        CHECK(std::abs(bias_inspan.formula) <= 1e-10);

        // a_hat error orthogonal to the span: U-term has mean zero, so the
        // second-order bias equals the first-order bias
        FixedFit orth;
        orth.a_hat = m.a + (u0 - pu_vals);
        orth.b_hat = m.b + v0;
        const BiasPair bias_orth = exact_bias_second_order(m, orth, pk);
        const BiasPair bias_first = exact_bias_first_order(m, orth);
        CHECK(std::abs(bias_orth.enumerated - bias_first.enumerated) <= 1e-10);

        // full-rank basis: projection is the identity, the bias vanishes
        const ProjectionKernel pk_full =
            truncation_kernel(m, BasisSystem::atom_indicators(m.support, m.size()));
        const BiasPair bias_full = exact_bias_second_order(m, fit, pk_full);
        CHECK(std::abs(bias_full.enumerated) <= 1e-10);
        CHECK(std::abs(bias_full.formula) <= 1e-10);
    }
}

TEST_CASE("monotone bias reduction over nested bases") {
    Rng rng(8086);
    DiscreteModel m;
    m.kind = ModelKind::missing_data();
    const int J = 8;
    for (int j = 0; j < J; ++j) m.support.push_back(point1((j + 0.5) / J));
    m.f = Eigen::VectorXd::Constant(J, 1.0 / J);
    m.a = random_vector(rng, J, 1.2, 4.0);
    m.b = random_vector(rng, J, 0.1, 0.9);

    FixedFit fit;
    const Eigen::VectorXd err = random_vector(rng, J, -0.4, 0.4);
    fit.a_hat = m.a + err;
    fit.b_hat = m.b + err; // same error on both: the bias has one sign

    double prev = std::numeric_limits<double>::infinity();
    for (int level = 0; level <= 3; ++level) {
        const ProjectionKernel pk = truncation_kernel(m, BasisSystem::tensor_haar(1, level));
        const BiasPair bias = exact_bias_second_order(m, fit, pk);
        CHECK(std::abs(bias.enumerated) <= prev + 1e-12);
        prev = std::abs(bias.enumerated);
    }
    CHECK(prev <= 1e-10); // level 3 is full rank on 8 atoms
}

TEST_CASE("estimation bias is first order in the weight error") {
    Rng rng(4004);
    DiscreteModel m = random_model(ModelTag::MissingData, rng, 6);
    while (m.size() < 3) m = random_model(ModelTag::MissingData, rng, 6);

    const int k = 2;
    const BasisSystem basis = BasisSystem::atom_indicators(m.support, k);
    const Eigen::VectorXd w = m.weight_atoms();

    // in-span errors (span membership does not depend on the weight)
    FixedFit fit;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m.size());
    for (int j = 0; j < k; ++j) {
        u[j] = rng.uniform(0.2, 0.8);
        v[j] = rng.uniform(0.2, 0.8);
    }
    fit.a_hat = m.a + u;
    fit.b_hat = m.b + v;

    Eigen::VectorXd h(m.size());
    for (int j = 0; j < m.size(); ++j) h[j] = rng.uniform(0.3, 1.0) * std::abs(w[j]);

    double prev = 0.0;
    bool first = true;
    for (const double delta : {0.2, 0.1, 0.05, 0.025}) {
        const Eigen::VectorXd w_hat = w + delta * h;
        const ProjectionKernel pk(basis, WeightMeasure::of(m.atom_fn(w_hat)),
                                  EvalDomain::atoms(m.support));
        const double bias = exact_bias_second_order(m, fit, pk).enumerated;
        if (!first) {
            const double ratio = prev / bias;
            CHECK(ratio >= 2.0 / 1.2);
            CHECK(ratio <= 2.0 * 1.2);
        }
        first = false;
        prev = bias;
    }
    CHECK(std::abs(prev) <= 0.05); // delta -> 0 sends the bias to zero
}

TEST_CASE("estimate_second_order agrees with the generic U-statistic path") {
    const DiscreteModel m = fixture_model();
    const auto data = generate_dataset(m, 120, 4321);
    const NuisanceFit fit = fixed_fit_view(m, fixture_fit(m));
    const ProjectionKernel pk = truncation_kernel(m, BasisSystem::constant(1));

    const SecondOrderEstimate est = estimate_second_order(data, fit, m.kind, pk);
    const FirstOrderEstimate first = estimate_first_order(data, fit, m.kind);
    const Kernel2<Observation> kernel =
        build_second_order_kernel(m.kind, fit.a_hat, fit.b_hat, pk);
    const double u2 = ustat_order2(std::span<const Observation>(data), kernel.f);
    CHECK(est.chi_second == doctest::Approx(first.chi_first + u2).epsilon(1e-13));
    CHECK(est.u2 == doctest::Approx(u2).epsilon(1e-13));
}

TEST_CASE("rank-0 truncation: chi_second equals chi_first") {
    const DiscreteModel m = fixture_model();
    const auto data = generate_dataset(m, 50, 7);
    const NuisanceFit fit = fixed_fit_view(m, fixture_fit(m));
    const ProjectionKernel pk(BasisSystem(), true_weight(m), EvalDomain::atoms(m.support));
    const SecondOrderEstimate est = estimate_second_order(data, fit, m.kind, pk);
    const FirstOrderEstimate first = estimate_first_order(data, fit, m.kind);
    CHECK(est.chi_second == doctest::Approx(first.chi_first).epsilon(1e-15));
    CHECK(est.u2 == 0.0);
}

TEST_CASE("cross_fit_estimate: runs and is deterministic given the seed") {
    const DiscreteModel m = fixture_model();
    const auto data = generate_dataset(m, 300, 5);
    CrossFitConfig cfg;
    cfg.folds = 2;
    cfg.seed = 17;
    cfg.partition = Partition::atoms(m.support);
    cfg.k_truncation = 2;
    const EstimateReport r1 = cross_fit_estimate(m.kind, data, cfg);
    const EstimateReport r2 = cross_fit_estimate(m.kind, data, cfg);
    CHECK(r1.chi_first == r2.chi_first);
    CHECK(r1.chi_second == r2.chi_second);
    CHECK(r1.k_used == 2);
    CHECK(std::isfinite(r1.var_first));
    CHECK(r1.var_first >= 0.0);
}

} // TEST_SUITE
