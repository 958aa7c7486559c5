#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hoif/basis.hpp"
#include "hoif/model.hpp"

namespace hoif {

// Cell structure used by the histogram estimators: either the dyadic cells
// of [0,1]^d at a resolution level, or the atom list of a discrete support
// (counting measure, cell volume 1).
class Partition {
public:
    static Partition dyadic(int d, int level);
    static Partition atoms(std::vector<Eigen::VectorXd> atom_points);

    int size() const;
    int locate(const Eigen::VectorXd& z) const;
    double cell_volume(int cell) const;
    EvalDomain domain() const; // cell midpoints / atoms, with cell volumes as masses
    BasisSystem indicator_basis() const; // per-cell indicator family (spans cellwise-constant fns)
    bool is_discrete() const { return discrete_; }
    int dim() const { return dim_; }
    int level() const { return level_; }

private:
    bool discrete_ = false;
    int dim_ = 1;
    int level_ = 0;
    std::vector<Eigen::VectorXd> atom_points_;
};

// Fold assignment. Nuisances are fit on the complement of the fold on which
// the correction terms are evaluated.
struct SplitPlan {
    int folds = 0;
    std::vector<int> fold_of; // fold index per observation

    std::vector<int> fold_indices(int fold) const;
    std::vector<int> complement_indices(int fold) const;
};

// Deterministic balanced split (fold sizes differ by at most 1).
SplitPlan sample_split(int n, int folds, std::uint64_t seed);

// Least-squares series fit g(z) = phi(z)' c.
struct SeriesFit {
    BasisSystem basis;
    Eigen::VectorXd coeffs;

    double operator()(const Eigen::VectorXd& z) const { return basis.eval_all(z).dot(coeffs); }
    ScalarFn fn() const;
};

// Projection of the target onto span(basis) over the (restricted) subsample.
// Throws CollinearBasisError when the design Gram matrix has condition
// number above 1e10, and std::invalid_argument on an empty subsample.
SeriesFit fit_regression_series(std::span<const Observation> data,
                                const std::function<double(const Observation&)>& target,
                                const BasisSystem& basis,
                                const std::function<bool(const Observation&)>& restriction = {});

constexpr double kMaxDesignCondition = 1e10;

// Histogram density: cell frequencies over cell volume; integrates to 1
// exactly, empty cells get density 0.
struct HistogramDensity {
    Partition partition;
    Eigen::VectorXd density;

    double operator()(const Eigen::VectorXd& z) const { return density[partition.locate(z)]; }
    ScalarFn fn() const;
};

HistogramDensity fit_density_histogram(std::span<const Observation> data,
                                       const Partition& partition);

// Inverse-propensity fit for the missing-data model: series regression of A
// on the basis, clipped into [eps_clip, 1-eps_clip], inverted.
struct PropensityFit {
    SeriesFit p_hat;
    double eps_clip = 0.05;
    int clip_events = 0; // fitted values outside the clip interval, counted on the fit sample

    double a_hat(const Eigen::VectorXd& z) const;
    ScalarFn a_fn() const;
};

PropensityFit fit_propensity_and_a(std::span<const Observation> data, const BasisSystem& basis,
                                   double eps_clip = 0.05);

// Estimate of the weight function s1~ f:
//   MissingData: -(histogram of Z over observations with A=1, normalized by
//                the total sample size), i.e. an estimate of -f Pr(A=1|Z);
//   Covariance / Ate: -f_hat (since s1~ = -1).
struct WeightFit {
    Partition partition;
    Eigen::VectorXd values; // per-cell value of w_hat

    double operator()(const Eigen::VectorXd& z) const { return values[partition.locate(z)]; }
    ScalarFn fn() const;
};

WeightFit fit_weight(const ModelKind& kind, std::span<const Observation> data,
                     const Partition& partition);

// Fitted nuisance bundle: everything the estimators need, evaluable
// anywhere on the domain.
struct NuisanceFit {
    ScalarFn a_hat;
    ScalarFn b_hat;
    ScalarFn f_hat;
    ScalarFn w_hat;
    EvalDomain chi_domain; // integration domain for the plug-in functional

    struct Meta {
        int basis_size = 0;
        int fold = -1;
        int clip_events = 0;
    } meta;
};

struct FitOptions {
    double eps_clip = 0.05;
    bool weight_from_density = false; // use -f_hat as w_hat for every kind
};

// Fits all nuisances for the kind on the given observations, using the
// partition's indicator basis for the regressions and the partition's cells
// for the histograms.
NuisanceFit fit_nuisances(const ModelKind& kind, std::span<const Observation> data,
                          const Partition& partition, const FitOptions& options = {});

} // namespace hoif
