#include "hoif/estimators.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace hoif {

ResidualFns residual_fns(const ModelKind& kind, const ScalarFn& a_hat, const ScalarFn& b_hat) {
    return {
        [kind, a_hat](const Observation& x) {
            const SVector s = statistic_S(kind, x);
            return s.s1 * a_hat(x.z.point) + s.s3;
        },
        [kind, b_hat](const Observation& x) {
            const SVector s = statistic_S(kind, x);
            return s.s1 * b_hat(x.z.point) + s.s2;
        },
    };
}

NuisanceFit fixed_fit_view(const DiscreteModel& model, const FixedFit& fit) {
    if (fit.a_hat.size() != model.size() || fit.b_hat.size() != model.size())
        throw std::invalid_argument("fixed_fit_view: value vectors must match the support");
    NuisanceFit out;
    out.a_hat = model.atom_fn(fit.a_hat);
    out.b_hat = model.atom_fn(fit.b_hat);
    out.f_hat = model.atom_fn(fit.f_hat.value_or(model.f));
    out.w_hat = model.atom_fn(model.weight_atoms());
    out.chi_domain = EvalDomain::atoms(model.support);
    out.meta.basis_size = model.size();
    return out;
}

NuisanceFit truth_fit_view(const DiscreteModel& model) {
    return fixed_fit_view(model, FixedFit{model.a, model.b, std::nullopt});
}

FirstOrderEstimate estimate_first_order(std::span<const Observation> data_fold,
                                        const NuisanceFit& fit, const ModelKind& kind) {
    if (data_fold.empty()) throw std::invalid_argument("estimate_first_order: empty fold");
    FirstOrderEstimate out;
    out.chi_plugin = functional_chi(kind, fit.a_hat, fit.b_hat, fit.f_hat,
                                    fit.chi_domain.points, fit.chi_domain.masses);

    const auto n = static_cast<double>(data_fold.size());
    detail::CompensatedSum sum;
    detail::CompensatedSum sumsq;
    for (const Observation& obs : data_fold) {
        const double v = first_order_if(kind, fit.a_hat, fit.b_hat, out.chi_plugin, obs);
        sum.add(v);
        sumsq.add(v * v);
    }
    const double mean = sum.value() / n;
    out.chi_first = out.chi_plugin + mean;
    if (data_fold.size() >= 2) {
        const double ss = std::max(0.0, sumsq.value() - n * mean * mean);
        out.var_first = ss / (n - 1.0) / n;
    }
    return out;
}

BiasPair exact_bias_first_order(const DiscreteModel& model, const FixedFit& fit) {
    model.validate();
    const NuisanceFit view = fixed_fit_view(model, fit);
    const double chi_true = functional_chi(model);
    const double chi_hat = functional_chi(model.kind, view.a_hat, view.b_hat, view.f_hat,
                                          view.chi_domain.points, view.chi_domain.masses);
    const double mean_if1 = exact_expectation(model, [&](const Observation& obs) {
        return first_order_if(model.kind, view.a_hat, view.b_hat, chi_hat, obs);
    });

    BiasPair out;
    out.enumerated = chi_hat - chi_true + mean_if1;
    const Eigen::VectorXd w = model.weight_atoms();
    out.formula = ((fit.a_hat - model.a).array() * (fit.b_hat - model.b).array() * w.array()).sum();
    return out;
}

Kernel2<Observation> build_second_order_kernel(const ModelKind& kind, const ScalarFn& a_hat,
                                               const ScalarFn& b_hat, ProjectionKernel pk) {
    auto shared_pk = std::make_shared<const ProjectionKernel>(std::move(pk));
    const ResidualFns res = residual_fns(kind, a_hat, b_hat);
    Kernel2<Observation> kernel;
    kernel.claimed_degenerate = true;
    kernel.f = [shared_pk, res](const Observation& x1, const Observation& x2) {
        const double pi12 = shared_pk->eval(x1.z.point, x2.z.point);
        return -0.5 * pi12 *
               (res.eps_a(x1) * res.eps_b(x2) + res.eps_a(x2) * res.eps_b(x1));
    };
    return kernel;
}

SecondOrderEstimate estimate_second_order(std::span<const Observation> data_fold,
                                          const NuisanceFit& fit, const ModelKind& kind,
                                          const ProjectionKernel& pk) {
    const std::size_t n = data_fold.size();
    if (n < 2) throw std::invalid_argument("estimate_second_order: need at least two observations");
    const FirstOrderEstimate first = estimate_first_order(data_fold, fit, kind);

    const ResidualFns res = residual_fns(kind, fit.a_hat, fit.b_hat);
    const int k = pk.rank();
    Eigen::VectorXd ea(static_cast<Eigen::Index>(n));
    Eigen::VectorXd eb(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd basis_vals(static_cast<Eigen::Index>(n), k);
    for (std::size_t i = 0; i < n; ++i) {
        ea[static_cast<Eigen::Index>(i)] = res.eps_a(data_fold[i]);
        eb[static_cast<Eigen::Index>(i)] = res.eps_b(data_fold[i]);
        basis_vals.row(static_cast<Eigen::Index>(i)) =
            pk.basis().eval_all(data_fold[i].z.point).transpose();
    }
    const Eigen::MatrixXd lhs = basis_vals * pk.omega_inverse(); // n x k

    // Same ordered-pair sum as ustat_order2 of the built kernel; the kernel
    // value at a pair is -Pi_ij (ea_i eb_j + ea_j eb_i)/2, accumulated in
    // fixed index order with compensated row sums.
    const bool cache_pairs = (k > 0) && n <= 4096;
    Eigen::MatrixXd pair_table;
    if (cache_pairs) pair_table.noalias() = lhs * basis_vals.transpose();

    std::vector<detail::CompensatedSum> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double pij =
                (k == 0) ? 0.0
                : cache_pairs
                    ? pair_table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                    : lhs.row(static_cast<Eigen::Index>(i))
                          .dot(basis_vals.row(static_cast<Eigen::Index>(j)));
            const double v = -0.5 * pij *
                             (ea[static_cast<Eigen::Index>(i)] * eb[static_cast<Eigen::Index>(j)] +
                              ea[static_cast<Eigen::Index>(j)] * eb[static_cast<Eigen::Index>(i)]);
            rows[i].add(v);
            rows[j].add(v);
        }
    }
    detail::CompensatedSum total;
    double worst_row = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rows[i].value();
        total.add(r);
        worst_row = std::max(worst_row, std::abs(r) / static_cast<double>(n - 1));
    }

    SecondOrderEstimate out;
    out.u2 = total.value() / (static_cast<double>(n) * static_cast<double>(n - 1));
    out.chi_second = first.chi_first + out.u2;
    out.empirical_degeneracy = worst_row;
    return out;
}

BiasPair exact_bias_second_order(const DiscreteModel& model, const FixedFit& fit,
                                 const ProjectionKernel& pk) {
    const BiasPair first = exact_bias_first_order(model, fit);
    const NuisanceFit view = fixed_fit_view(model, fit);

    const Kernel2<Observation> kernel =
        build_second_order_kernel(model.kind, view.a_hat, view.b_hat, pk);
    const double mean_k2 = exact_expectation2(model, kernel.f);

    BiasPair out;
    out.enumerated = first.enumerated + mean_k2;

    // <(I - Pi) u, (I - Pi) v>_w on the support
    const Eigen::VectorXd u = fit.a_hat - model.a;
    const Eigen::VectorXd v = fit.b_hat - model.b;
    const int J = model.size();
    Eigen::VectorXd proj_u(J);
    Eigen::VectorXd proj_v(J);
    const auto pu = pk.project_values(u);
    const auto pv = pk.project_values(v);
    for (int j = 0; j < J; ++j) {
        const Eigen::VectorXd& z = model.support[static_cast<std::size_t>(j)];
        proj_u[j] = pu.fn(z);
        proj_v[j] = pv.fn(z);
    }
    const Eigen::VectorXd w = model.weight_atoms();
    out.formula = ((u - proj_u).array() * (v - proj_v).array() * w.array()).sum();
    return out;
}

namespace {

struct FoldEstimate {
    double weight = 0.0;
    FirstOrderEstimate first;
    SecondOrderEstimate second;
    bool has_second = false;
    double gram_condition = 0.0;
    int clip_events = 0;
};

std::vector<Observation> gather(std::span<const Observation> data, const std::vector<int>& idx) {
    std::vector<Observation> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(data[static_cast<std::size_t>(i)]);
    return out;
}

// Exact integration grid for Gram matrices: fine enough for both the
// truncation basis and the piecewise-constant fitted weight.
EvalDomain gram_domain(const Partition& partition, int truncation_level) {
    if (partition.is_discrete()) return partition.domain();
    return EvalDomain::dyadic_grid(partition.dim(), std::max(partition.level(), truncation_level));
}

} // namespace

EstimateReport cross_fit_estimate(const ModelKind& kind, std::span<const Observation> data,
                                  const CrossFitConfig& config) {
    if (config.folds < 1) throw std::invalid_argument("cross_fit_estimate: folds >= 1 required");
    const int n = static_cast<int>(data.size());
    if (n < std::max(config.folds, 2))
        throw std::invalid_argument("cross_fit_estimate: sample too small for the fold plan");

    const int d = config.partition.dim();
    BasisSystem trunc = BasisSystem::tensor_haar_capped(d, config.k_truncation);
    int trunc_level = 0;
    while ((1 << (trunc_level * d)) < trunc.size()) ++trunc_level;

    const SplitPlan plan = (config.folds > 1)
                               ? sample_split(n, config.folds, config.seed)
                               : SplitPlan{1, std::vector<int>(static_cast<std::size_t>(n), 0)};

    std::vector<FoldEstimate> folds;
    for (int f = 0; f < config.folds; ++f) {
        const std::vector<int> eval_idx = plan.fold_indices(f);
        const std::vector<int> train_idx =
            (config.folds > 1) ? plan.complement_indices(f) : eval_idx;
        const std::vector<Observation> train = gather(data, train_idx);
        const std::vector<Observation> eval = gather(data, eval_idx);

        NuisanceFit fit = fit_nuisances(kind, train, config.partition, config.fit_options);
        fit.meta.fold = f;

        FoldEstimate fe;
        fe.weight = static_cast<double>(eval.size()) / static_cast<double>(n);
        fe.clip_events = fit.meta.clip_events;
        fe.first = estimate_first_order(eval, fit, kind);
        if (config.want_second && trunc.size() > 0) {
            ProjectionKernel pk(trunc, WeightMeasure::of(fit.w_hat),
                                gram_domain(config.partition, trunc_level));
            fe.gram_condition = pk.gram_condition();
            fe.second = estimate_second_order(eval, fit, kind, pk);
            fe.has_second = true;
        } else if (config.want_second) {
            fe.second.chi_second = fe.first.chi_first; // rank-0 correction is identically zero
            fe.has_second = true;
        }
        folds.push_back(std::move(fe));
    }

    EstimateReport report;
    report.k_used = trunc.size();
    for (const FoldEstimate& fe : folds) {
        report.chi_plugin += fe.weight * fe.first.chi_plugin;
        report.chi_first += fe.weight * fe.first.chi_first;
        report.var_first += fe.weight * fe.weight * fe.first.var_first;
        report.clip_events += fe.clip_events;
        report.gram_condition = std::max(report.gram_condition, fe.gram_condition);
        if (fe.has_second) {
            report.chi_second += fe.weight * fe.second.chi_second;
            report.degeneracy = std::max(report.degeneracy, fe.second.empirical_degeneracy);
        }
    }
    return report;
}

} // namespace hoif
