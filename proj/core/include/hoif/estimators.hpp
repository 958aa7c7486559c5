#pragma once

#include <memory>
#include <optional>
#include <span>

#include "hoif/basis.hpp"
#include "hoif/model.hpp"
#include "hoif/nuisance.hpp"
#include "hoif/ustat.hpp"

namespace hoif {

// Estimators of the target functional chi from a sample, given fitted
// nuisances, plus exact-bias oracles over discrete models.
//
// The three estimators:
//   plug-in       chi(eta_hat)
//   first-order   chi(eta_hat) + mean of if1_{eta_hat} over the sample
//   second-order  first-order + U_n of a rank-k quadratic correction kernel
//
// Exact bias identities on a discrete model with fixed (non-random) fits,
// writing u = a_hat - a, v = b_hat - b and w = s1~ f:
//
//   first-order bias  = integral of u v w dnu            (f_hat cancels)
//   second-order bias = <(I - Pi_k) u, (I - Pi_k) v>_w   (with w_hat = w)
//
// where Pi_k projects onto the truncation basis in the bilinear form
// <g,h>_w. Both identities are verified in two independent ways: full
// enumeration of the estimator's expectation, and the right-hand-side
// formula. The correction kernel's sign and scale are pinned by the second
// identity: the kernel must cancel exactly the represented part of the
// first-order bias.

// Residual functions entering the quadratic kernel:
//   eps_a(x) = S1(x) a_hat(z) + S3(x),  eps_b(x) = S1(x) b_hat(z) + S2(x).
// Their conditional means are E[eps_a|Z=z] = s1~(z)(a_hat - a)(z) and
// E[eps_b|Z=z] = s1~(z)(b_hat - b)(z); both vanish at the truth.
struct ResidualFns {
    std::function<double(const Observation&)> eps_a;
    std::function<double(const Observation&)> eps_b;
};

ResidualFns residual_fns(const ModelKind& kind, const ScalarFn& a_hat, const ScalarFn& b_hat);

// Fixed nuisance values on a discrete model's support, for the oracles.
// f_hat defaults to the model's f (it cancels from the first-order bias
// either way).
struct FixedFit {
    Eigen::VectorXd a_hat;
    Eigen::VectorXd b_hat;
    std::optional<Eigen::VectorXd> f_hat;
};

// NuisanceFit views used by the oracles and the simulation harness.
NuisanceFit fixed_fit_view(const DiscreteModel& model, const FixedFit& fit);
NuisanceFit truth_fit_view(const DiscreteModel& model);

struct FirstOrderEstimate {
    double chi_plugin = 0.0;
    double chi_first = 0.0;
    double var_first = 0.0; // sample variance of if1 over the fold / fold size
};

FirstOrderEstimate estimate_first_order(std::span<const Observation> data_fold,
                                        const NuisanceFit& fit, const ModelKind& kind);

struct BiasPair {
    double enumerated = 0.0; // full enumeration of the estimator's exact expectation, minus chi
    double formula = 0.0;    // the closed-form right-hand side
};

BiasPair exact_bias_first_order(const DiscreteModel& model, const FixedFit& fit);

// The quadratic correction kernel
//   k2(x1,x2) = -sym( eps_a(x1) Pi_k(z1,z2) eps_b(x2) ),
// degenerate at the truth. pk must be built in the weight the residual means
// live in (w_hat targeting s1~ f; exactly s1~ f for the oracles).
Kernel2<Observation> build_second_order_kernel(const ModelKind& kind, const ScalarFn& a_hat,
                                               const ScalarFn& b_hat, ProjectionKernel pk);

struct SecondOrderEstimate {
    double chi_second = 0.0;
    double u2 = 0.0;                    // the U-statistic correction term
    double empirical_degeneracy = 0.0;  // max_i |mean_{j != i} k2(X_i, X_j)|
};

// chi_second = chi_first + U_n(k2) over the fold. Evaluates the same pair
// sum as ustat_order2 of the built kernel, with cached per-observation
// residuals and basis vectors.
SecondOrderEstimate estimate_second_order(std::span<const Observation> data_fold,
                                          const NuisanceFit& fit, const ModelKind& kind,
                                          const ProjectionKernel& pk);

// Requires pk built with the model's true weight s1~ f on the support.
BiasPair exact_bias_second_order(const DiscreteModel& model, const FixedFit& fit,
                                 const ProjectionKernel& pk);

struct EstimateReport {
    double chi_plugin = 0.0;
    double chi_first = 0.0;
    double chi_second = 0.0;
    double var_first = 0.0;
    int k_used = 0;
    double degeneracy = 0.0;     // empirical degeneracy of the second-order kernel
    double gram_condition = 0.0; // worst Gram condition number across folds
    int clip_events = 0;
};

struct CrossFitConfig {
    int folds = 2;               // 1 = no split: fit and evaluate on the full sample
    std::uint64_t seed = 0;      // split seed
    FitOptions fit_options;
    Partition partition;         // nuisance partition (regression basis + histograms)
    int k_truncation = 1;        // basis size cap for the correction kernel; 0 disables it
    bool want_plugin = true;
    bool want_first = true;
    bool want_second = true;
};

// Cross-fitted estimates: for each fold, nuisances are fit on the
// complement and the corrections evaluated on the fold; fold estimates are
// combined with fold-size weights.
EstimateReport cross_fit_estimate(const ModelKind& kind, std::span<const Observation> data,
                                  const CrossFitConfig& config);

} // namespace hoif
