#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hoif/estimators.hpp"
#include "hoif/model.hpp"

namespace hoif {

// Requested smoothness of the synthetic truth functions: alpha for a, beta
// for b, gamma for the weight function s1~ f, on a d-dimensional domain.
struct SmoothnessSpec {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    int d = 1;
};

// Lacunary cosine series with geometric coefficient decay,
//   g(z) = base + amp * sum_{l=1..levels} 2^{-l*alpha} cos(2 pi 2^l z_axis(l) + theta_l) / norm,
// where norm = sum_l 2^{-l*alpha} so |g - base| <= amp, and axis(l) cycles
// through coordinates. The decay exponent controls the Holder regularity of
// the resulting texture; frequencies are integers, so every term integrates
// to zero over [0,1]^d and cross moments of two series reduce to matching
// (axis, frequency) pairs in closed form.
struct LacunarySeries {
    double base = 0.0;
    double amp = 0.0;
    double alpha = 1.0;
    int d = 1;
    int levels = 0;
    double norm = 1.0; // sum of the raw coefficients, fixed at construction
    std::vector<double> phases;

    static LacunarySeries make(int d, double alpha, double base, double amp, int levels,
                               std::uint64_t seed);

    double operator()(const Eigen::VectorXd& z) const;
    double weight(int l) const; // 2^{-l*alpha} / norm
    ScalarFn fn() const;
};

// Exact integral over [0,1]^d of the product of two series (uniform base
// measure).
double product_integral(const LacunarySeries& g, const LacunarySeries& h);

// Synthetic truth on [0,1]^d with uniform covariate density. For the
// missing-data kind, a is the inverse propensity (must stay >= 1); for the
// other kinds, a and b are the conditional-mean / effect functions.
struct ContinuousTruth {
    ModelKind kind;
    int d = 1;
    LacunarySeries a;
    LacunarySeries b;
    double chi = 0.0; // exact: integral of b (missing data) or of a*b

    void validate() const; // range checks on a probe grid
};

ContinuousTruth make_continuous_truth(const ModelKind& kind, const SmoothnessSpec& smoothness,
                                      double a_base, double a_amp, double b_base, double b_amp,
                                      int levels, std::uint64_t seed);

// i.i.d. sample of size n, deterministic given the seed.
std::vector<Observation> generate_dataset(const DiscreteModel& truth, int n, std::uint64_t seed);
std::vector<Observation> generate_dataset(const ContinuousTruth& truth, int n, std::uint64_t seed);

enum class EstimatorId { Plugin, FirstOrder, SecondOrder };

const char* estimator_name(EstimatorId id);
std::optional<EstimatorId> parse_estimator(const std::string& name);

// Truncation-size schedule: an explicit list aligned with the n grid, or a
// power rule k = ceil(c * n^p).
struct PowerRule {
    double c = 1.0;
    double p = 1.0 / 3.0;
    int at(int n) const;
};

struct KSchedule {
    std::vector<int> fixed; // aligned with the n grid when non-empty
    std::optional<PowerRule> power;
    bool cap_quarter_n = false; // additionally cap at n/4 (default schedule)

    int at(std::size_t n_index, int n) const;
};

enum class FitMode {
    Split,  // cross-fitted nuisances
    Oracle, // true nuisance functions
    Fixed,  // caller-supplied fixed fit on a discrete support
};

struct ExperimentConfig {
    std::variant<DiscreteModel, ContinuousTruth> truth;
    std::vector<int> n_grid;
    KSchedule k_schedule;
    int folds = 2;
    int replications = 1;
    std::uint64_t seed = 0;
    std::vector<EstimatorId> estimators;
    FitMode fit_mode = FitMode::Split;
    FixedFit fixed_fit;          // FitMode::Fixed
    double eps_clip = 0.05;
    PowerRule nuisance_rule;     // target cell count for the nuisance partition
    bool projection_weight_from_density = false;
    std::string output;
    int threads = 0;             // 0 = hardware concurrency

    void validate() const;
};

struct ResultRow {
    std::string estimator;
    int n = 0;
    int k = 0;
    double mean = 0.0;
    double bias = 0.0;     // mean - true chi
    double variance = 0.0; // population variance over replications
    double rmse = 0.0;
    int replications = 0;
    std::uint64_t seed = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;
};

// Runs the full grid. Replications execute concurrently on independent
// random streams; the table is aggregated in a fixed order, so the result is
// identical for any thread count. Per-replication failures are tolerated up
// to 10% of R per cell, beyond which the run aborts.
ResultTable run_experiment(const ExperimentConfig& config);

// OLS slope of log(RMSE) against log(n) over the estimator's rows; requires
// at least 3 distinct n values.
double rate_slope(const ResultTable& table, EstimatorId estimator);

} // namespace hoif
