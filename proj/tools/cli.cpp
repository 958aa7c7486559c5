#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config_io.hpp"
#include "hoif/errors.hpp"
#include "hoif/rng.hpp"
#include "hoif/table_io.hpp"

namespace hoif::cli {

namespace {

int run_simulate(const std::string& config_path, const std::string& out_flag,
                 const std::string& out_dir, int threads_flag) {
    ExperimentConfig cfg = parse_experiment_config_file(config_path);
    if (threads_flag > 0) cfg.threads = threads_flag;
    std::string out = out_flag.empty() ? cfg.output : out_flag;
    if (out.empty()) out = "results.csv";
    out = resolve_output_path(out, out_dir);

    const ResultTable table = run_experiment(cfg);
    write_result_table_file(out, table);
    std::cout << "wrote " << table.rows.size() << " rows to " << out << "\n";
    return 0;
}

Partition partition_for(const TruthSpec& truth, int n, int cells_flag) {
    if (std::holds_alternative<DiscreteModel>(truth))
        return Partition::atoms(std::get<DiscreteModel>(truth).support);
    const int d = std::get<ContinuousTruth>(truth).d;
    int cells = cells_flag;
    if (cells <= 0)
        cells = std::max(1, static_cast<int>(std::ceil(std::pow(n, 1.0 / (2.0 + d)))));
    int level = 0;
    while (std::pow(2.0, static_cast<double>(level + 1) * d) <= static_cast<double>(cells))
        ++level;
    return Partition::dyadic(d, level);
}

int run_estimate(const std::string& data_path, const std::string& model_path, int folds, int k,
                 int cells, std::uint64_t seed, double eps_clip, const std::string& out_flag,
                 const std::string& out_dir) {
    const TruthSpec truth = parse_model_file(model_path);
    const ModelKind kind = std::holds_alternative<DiscreteModel>(truth)
                               ? std::get<DiscreteModel>(truth).kind
                               : std::get<ContinuousTruth>(truth).kind;

    Dataset data = read_dataset_file(data_path);
    if (kind.has_second_outcome() && !data.has_y2)
        throw ConfigError("dataset: the ate model needs the y2 column filled");
    const int n = static_cast<int>(data.observations.size());
    if (n < 2) throw ConfigError("dataset: need at least two observations");

    CrossFitConfig cf;
    cf.folds = folds;
    cf.seed = seed;
    cf.fit_options.eps_clip = eps_clip;
    cf.partition = partition_for(truth, n, cells);
    const int d = cf.partition.dim();
    cf.k_truncation =
        (k > 0) ? k
                : std::min(std::max(1, n / 4),
                           static_cast<int>(std::ceil(std::pow(n, 2.0 * d / (2.0 + d)))));

    const EstimateReport report = cross_fit_estimate(kind, data.observations, cf);

    std::ostringstream body;
    body << "n            " << n << "\n"
         << "folds        " << folds << "\n"
         << "k_used       " << report.k_used << "\n"
         << "chi_plugin   " << format_g17(report.chi_plugin) << "\n"
         << "chi_first    " << format_g17(report.chi_first) << "\n"
         << "chi_second   " << format_g17(report.chi_second) << "\n"
         << "var_first    " << format_g17(report.var_first) << "\n"
         << "degeneracy   " << format_g17(report.degeneracy) << "\n"
         << "gram_cond    " << format_g17(report.gram_condition) << "\n"
         << "clip_events  " << report.clip_events << "\n";
    if (out_flag.empty()) {
        std::cout << body.str();
    } else {
        const std::string out = resolve_output_path(out_flag, out_dir);
        std::ofstream os(out, std::ios::binary);
        if (!os) throw ConfigError("cannot open output file: " + out);
        os << body.str();
        std::cout << "wrote report to " << out << "\n";
    }
    return 0;
}

int run_oracle(const std::string& model_path, const std::string& fit_path, int k) {
    const TruthSpec truth = parse_model_file(model_path);
    if (!std::holds_alternative<DiscreteModel>(truth))
        throw ConfigError("oracle: exact biases need a discrete model");
    const DiscreteModel& model = std::get<DiscreteModel>(truth);
    const FixedFit fit = parse_fixed_fit_file(fit_path);
    if (fit.a_hat.size() != model.size() || fit.b_hat.size() != model.size())
        throw ConfigError("fit: a_hat and b_hat must match the model support size");

    const BiasPair first = exact_bias_first_order(model, fit);
    std::cout << "first_order_bias_enumerated  " << format_g17(first.enumerated) << "\n"
              << "first_order_bias_formula     " << format_g17(first.formula) << "\n";

    if (k > 0) {
        const BasisSystem basis = BasisSystem::tensor_haar_capped(model.dim(), k);
        const ProjectionKernel pk(basis, WeightMeasure::of(model.atom_fn(model.weight_atoms())),
                                  EvalDomain::atoms(model.support));
        const BiasPair second = exact_bias_second_order(model, fit, pk);
        std::cout << "second_order_k               " << basis.size() << "\n"
                  << "second_order_bias_enumerated " << format_g17(second.enumerated) << "\n"
                  << "second_order_bias_formula    " << format_g17(second.formula) << "\n";
    }
    return 0;
}

// --- selftest ---------------------------------------------------------------

DiscreteModel selftest_model(ModelTag tag, Rng& rng) {
    const int J = 2 + static_cast<int>(rng.below(6));
    DiscreteModel m;
    switch (tag) {
        case ModelTag::MissingData: m.kind = ModelKind::missing_data(); break;
        case ModelTag::Covariance: m.kind = ModelKind::covariance(); break;
        case ModelTag::Ate: {
            const double pi = rng.uniform(0.2, 0.8);
            m.kind = ModelKind::ate([pi](const Eigen::VectorXd&) { return pi; });
            break;
        }
    }
    m.f.resize(J);
    m.a.resize(J);
    m.b.resize(J);
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd z(1);
        z[0] = (j + 0.5) / J;
        m.support.push_back(z);
        m.f[j] = rng.uniform(0.2, 1.0);
        total += m.f[j];
        switch (tag) {
            case ModelTag::MissingData:
                m.a[j] = rng.uniform(1.1, 4.0);
                m.b[j] = rng.uniform(0.1, 0.9);
                break;
            case ModelTag::Covariance:
                m.a[j] = rng.uniform(0.1, 0.9);
                m.b[j] = rng.uniform(0.1, 0.9);
                break;
            case ModelTag::Ate:
                m.a[j] = rng.uniform(-0.8, 0.8);
                m.b[j] = rng.uniform(-0.8, 0.8);
                break;
        }
    }
    m.f /= total;
    return m;
}

ModelTag cycle_tag(int i) {
    switch (i % 3) {
        case 0: return ModelTag::MissingData;
        case 1: return ModelTag::Covariance;
        default: return ModelTag::Ate;
    }
}

int run_selftest(std::uint64_t seed) {
    int failures = 0;
    auto report = [&](const char* name, bool ok, double value) {
        std::cout << (ok ? "ok      " : "FAILED  ") << name << "  (" << format_g17(value)
                  << ")\n";
        if (!ok) ++failures;
    };

    Rng rng(seed);

    double worst = 0.0;
    for (int i = 0; i < 24; ++i) {
        const DiscreteModel m = selftest_model(cycle_tag(i), rng);
        const double chi = functional_chi(m);
        const ScalarFn a = m.atom_fn(m.a);
        const ScalarFn b = m.atom_fn(m.b);
        worst = std::max(worst, std::abs(exact_expectation(m, [&](const Observation& o) {
                             return first_order_if(m.kind, a, b, chi, o);
                         })));
    }
    report("influence function mean zero at truth", worst <= 1e-12, worst);

    worst = 0.0;
    for (int i = 0; i < 24; ++i) {
        const DiscreteModel m = selftest_model(cycle_tag(i), rng);
        FixedFit fit;
        fit.a_hat = m.a;
        fit.b_hat = m.b;
        for (int j = 0; j < m.size(); ++j) {
            fit.a_hat[j] += rng.uniform(-0.5, 0.5);
            fit.b_hat[j] += rng.uniform(-0.5, 0.5);
        }
        const BiasPair bias = exact_bias_first_order(m, fit);
        worst = std::max(worst, std::abs(bias.enumerated - bias.formula));
    }
    report("first-order bias identity", worst <= 1e-10, worst);

    {
        DiscreteModel m;
        m.kind = ModelKind::missing_data();
        Eigen::VectorXd z1(1), z2(1);
        z1 << 0.25;
        z2 << 0.75;
        m.support = {z1, z2};
        m.f = Eigen::Vector2d(0.5, 0.5);
        m.a = Eigen::Vector2d(2.0, 4.0);
        m.b = Eigen::Vector2d(0.3, 0.7);
        FixedFit fit;
        fit.a_hat = m.a + Eigen::Vector2d(0.5, -0.5);
        fit.b_hat = m.b + Eigen::Vector2d(0.1, -0.1);
        const BiasPair bias = exact_bias_first_order(m, fit);
        report("fixture bias equals -0.01875", std::abs(bias.enumerated - (-0.01875)) <= 1e-12,
               bias.enumerated);
    }

    worst = 0.0;
    double worst_deg = 0.0;
    for (int i = 0; i < 12; ++i) {
        const DiscreteModel m = selftest_model(cycle_tag(i), rng);
        const BasisSystem basis = BasisSystem::tensor_haar_capped(1, std::min(2, m.size()));
        const ProjectionKernel pk(basis, WeightMeasure::of(m.atom_fn(m.weight_atoms())),
                                  EvalDomain::atoms(m.support));
        FixedFit fit;
        fit.a_hat = m.a;
        fit.b_hat = m.b;
        for (int j = 0; j < m.size(); ++j) {
            fit.a_hat[j] += rng.uniform(-0.4, 0.4);
            fit.b_hat[j] += rng.uniform(-0.4, 0.4);
        }
        const BiasPair bias = exact_bias_second_order(m, fit, pk);
        worst = std::max(worst, std::abs(bias.enumerated - bias.formula));

        const NuisanceFit at_truth = truth_fit_view(m);
        const Kernel2<Observation> kernel =
            build_second_order_kernel(m.kind, at_truth.a_hat, at_truth.b_hat, pk);
        worst_deg = std::max(worst_deg, degeneracy_check(m, kernel));
    }
    report("second-order bias identity", worst <= 1e-10, worst);
    report("second-order kernel degenerate at truth", worst_deg <= 1e-10, worst_deg);

    {
        const std::vector<double> data{1.0, 2.0, 3.0};
        const double u = ustat_order2(std::span<const double>(data),
                                      [](double x, double y) { return x * y; });
        report("order-2 U-statistic fixture 11/3", std::abs(u - 11.0 / 3.0) <= 1e-15, u);
    }

    if (failures > 0) {
        std::cerr << failures << " selftest check(s) failed\n";
        return 2;
    }
    std::cout << "all selftest checks passed\n";
    return 0;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"estimators for structured semiparametric functionals: plug-in, "
                 "first-order corrected, and second-order U-statistic corrected, with exact "
                 "discrete-model oracles and a Monte Carlo harness"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir, data_path, model_path, fit_path;
    int threads = 0, folds = 2, k = 0, cells = 0;
    std::uint64_t seed = 0;
    double eps_clip = 0.05;

    CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment from a config file");
    sim->add_option("--config", config_path, "experiment config (JSON)")->required();
    sim->add_option("--out", out_path, "output path (overrides the config)");
    sim->add_option("--out-dir", out_dir, "directory for relative outputs (overrides HOIF_OUT_DIR)");
    sim->add_option("--threads", threads, "worker threads (0 = hardware)");

    CLI::App* est = app.add_subcommand("estimate", "estimate the functional from a dataset file");
    est->add_option("--data", data_path, "dataset (CSV)")->required();
    est->add_option("--model", model_path, "model description (JSON)")->required();
    est->add_option("--folds", folds, "cross-fitting folds (1 = no split)");
    est->add_option("--k", k, "truncation size for the second-order correction");
    est->add_option("--cells", cells, "nuisance partition cells (continuous models)");
    est->add_option("--seed", seed, "split seed");
    est->add_option("--eps-clip", eps_clip, "propensity clip for the missing-data model");
    est->add_option("--out", out_path, "write the report here instead of stdout");
    est->add_option("--out-dir", out_dir, "directory for relative outputs");

    CLI::App* orc = app.add_subcommand("oracle", "exact biases of fixed fits on a discrete model");
    orc->add_option("--model", model_path, "discrete model (JSON)")->required();
    orc->add_option("--fit", fit_path, "fixed fit (JSON)")->required();
    orc->add_option("--k", k, "also report the second-order bias at this truncation size");

    CLI::App* self = app.add_subcommand("selftest", "run the built-in invariant suite");
    self->add_option("--seed", seed, "seed for the randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return run_simulate(config_path, out_path, out_dir, threads);
        if (est->parsed())
            return run_estimate(data_path, model_path, folds, k, cells, seed, eps_clip, out_path,
                                out_dir);
        if (orc->parsed()) return run_oracle(model_path, fit_path, k);
        if (self->parsed()) return run_selftest(seed == 0 ? 20240808 : seed);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace hoif::cli
