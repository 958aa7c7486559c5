#include <benchmark/benchmark.h>

#include "hoif/estimators.hpp"
#include "hoif/simulate.hpp"

namespace {

using namespace hoif;

DiscreteModel bench_model(int atoms) {
    DiscreteModel m;
    m.kind = ModelKind::missing_data();
    m.f.resize(atoms);
    m.a.resize(atoms);
    m.b.resize(atoms);
    for (int j = 0; j < atoms; ++j) {
        Eigen::VectorXd z(1);
        z[0] = (j + 0.5) / atoms;
        m.support.push_back(z);
        m.f[j] = 1.0 / atoms;
        m.a[j] = 1.5 + 2.0 * j / atoms;
        m.b[j] = 0.2 + 0.6 * j / atoms;
    }
    return m;
}

void BM_ustat_order2_dense(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    const DiscreteModel m = bench_model(8);
    const auto data = generate_dataset(m, n, 42);
    const auto kernel = [](const Observation& x1, const Observation& x2) {
        return (x1.y1 - 0.4) * (x2.y1 - 0.4) + 0.25 * x1.a * x2.a;
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(ustat_order2(std::span<const Observation>(data), kernel));
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_ustat_order2_dense)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_second_order_estimate(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    const DiscreteModel m = bench_model(8);
    const auto data = generate_dataset(m, n, 7);
    FixedFit fit;
    fit.a_hat = m.a.array() + 0.3;
    fit.b_hat = m.b.array() - 0.1;
    const NuisanceFit view = fixed_fit_view(m, fit);
    const ProjectionKernel pk(BasisSystem::tensor_haar(1, 2),
                              WeightMeasure::of(m.atom_fn(m.weight_atoms())),
                              EvalDomain::atoms(m.support));
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_second_order(data, view, m.kind, pk).chi_second);
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_second_order_estimate)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_exact_bias_second_order(benchmark::State& state) {
    const auto atoms = static_cast<int>(state.range(0));
    const DiscreteModel m = bench_model(atoms);
    FixedFit fit;
    fit.a_hat = m.a.array() + 0.3;
    fit.b_hat = m.b.array() - 0.1;
    const ProjectionKernel pk(BasisSystem::tensor_haar(1, 1),
                              WeightMeasure::of(m.atom_fn(m.weight_atoms())),
                              EvalDomain::atoms(m.support));
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_bias_second_order(m, fit, pk).enumerated);
    }
}
BENCHMARK(BM_exact_bias_second_order)->Arg(4)->Arg(8)->Arg(16);

void BM_cross_fit_estimate(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    const ContinuousTruth truth = make_continuous_truth(
        ModelKind::missing_data(), {1.0, 1.0, 1.0, 1}, 2.0, 0.6, 0.5, 0.35, 12, 3);
    const auto data = generate_dataset(truth, n, 11);
    CrossFitConfig cfg;
    cfg.folds = 2;
    cfg.partition = Partition::dyadic(1, 3);
    cfg.k_truncation = 8;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            cross_fit_estimate(truth.kind, data, cfg).chi_second);
    }
}
BENCHMARK(BM_cross_fit_estimate)->Arg(500)->Arg(2000);

} // namespace

BENCHMARK_MAIN();
