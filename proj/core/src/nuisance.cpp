#include "hoif/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "hoif/rng.hpp"

namespace hoif {

Partition Partition::dyadic(int d, int level) {
    if (d < 1 || level < 0) throw ConfigError("partition: need d >= 1 and level >= 0");
    if (static_cast<double>(level) * d > 24) throw ConfigError("partition: too many cells");
    Partition p;
    p.discrete_ = false;
    p.dim_ = d;
    p.level_ = level;
    return p;
}

Partition Partition::atoms(std::vector<Eigen::VectorXd> atom_points) {
    if (atom_points.empty()) throw ConfigError("partition: empty atom list");
    Partition p;
    p.discrete_ = true;
    p.dim_ = static_cast<int>(atom_points[0].size());
    p.atom_points_ = std::move(atom_points);
    return p;
}

int Partition::size() const {
    if (discrete_) return static_cast<int>(atom_points_.size());
    return static_cast<int>(std::llround(std::pow(2.0, static_cast<double>(level_) * dim_)));
}

int Partition::locate(const Eigen::VectorXd& z) const {
    if (discrete_) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < atom_points_.size(); ++j) {
            const double d = (atom_points_[j] - z).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        return best;
    }
    const int per_dim = 1 << level_;
    int cell = 0;
    int stride = 1;
    for (int i = 0; i < dim_; ++i) {
        int c = static_cast<int>(std::floor(z[i] * per_dim));
        c = std::clamp(c, 0, per_dim - 1);
        cell += c * stride;
        stride *= per_dim;
    }
    return cell;
}

double Partition::cell_volume(int) const {
    if (discrete_) return 1.0;
    return 1.0 / static_cast<double>(size());
}

EvalDomain Partition::domain() const {
    if (discrete_) return EvalDomain::atoms(atom_points_);
    return EvalDomain::dyadic_grid(dim_, level_);
}

BasisSystem Partition::indicator_basis() const {
    if (discrete_) return BasisSystem::atom_indicators(atom_points_, size());
    // Scaled cell indicators; same span as unit-height indicators, so the
    // fitted functions are identical and evaluation stays O(1) per cell.
    return BasisSystem::tensor_haar(dim_, level_);
}

std::vector<int> SplitPlan::fold_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> SplitPlan::complement_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
    return out;
}

SplitPlan sample_split(int n, int folds, std::uint64_t seed) {
    if (folds < 1) throw std::invalid_argument("sample_split: need folds >= 1");
    if (n < folds) throw std::invalid_argument("sample_split: need n >= folds");
    Rng rng(seed);
    const std::vector<int> perm = rng.permutation(n);
    SplitPlan plan;
    plan.folds = folds;
    plan.fold_of.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        plan.fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % folds;
    return plan;
}

ScalarFn SeriesFit::fn() const {
    SeriesFit self = *this;
    return [self](const Eigen::VectorXd& z) { return self(z); };
}

SeriesFit fit_regression_series(std::span<const Observation> data,
                                const std::function<double(const Observation&)>& target,
                                const BasisSystem& basis,
                                const std::function<bool(const Observation&)>& restriction) {
    const int k = basis.size();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
    std::size_t used = 0;
    for (const Observation& obs : data) {
        if (restriction && !restriction(obs)) continue;
        ++used;
        const Eigen::VectorXd phi = basis.eval_all(obs.z.point);
        gram.noalias() += phi * phi.transpose();
        xty.noalias() += target(obs) * phi;
    }
    if (used == 0) throw std::invalid_argument("fit_regression_series: empty restricted subsample");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(k - 1);
    if (!(smin > 0.0) || smax / smin > kMaxDesignCondition)
        throw CollinearBasisError("fit_regression_series: design Gram matrix is rank-deficient");
    return SeriesFit{basis, svd.solve(xty)};
}

ScalarFn HistogramDensity::fn() const {
    HistogramDensity self = *this;
    return [self](const Eigen::VectorXd& z) { return self(z); };
}

HistogramDensity fit_density_histogram(std::span<const Observation> data,
                                       const Partition& partition) {
    if (data.empty()) throw std::invalid_argument("fit_density_histogram: empty sample");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(partition.size());
    for (const Observation& obs : data) counts[partition.locate(obs.z.point)] += 1.0;
    Eigen::VectorXd dens(partition.size());
    const double n = static_cast<double>(data.size());
    for (int c = 0; c < partition.size(); ++c)
        dens[c] = counts[c] / (n * partition.cell_volume(c));
    return HistogramDensity{partition, std::move(dens)};
}

double PropensityFit::a_hat(const Eigen::VectorXd& z) const {
    const double p = std::clamp(p_hat(z), eps_clip, 1.0 - eps_clip);
    return 1.0 / p;
}

ScalarFn PropensityFit::a_fn() const {
    PropensityFit self = *this;
    return [self](const Eigen::VectorXd& z) { return self.a_hat(z); };
}

PropensityFit fit_propensity_and_a(std::span<const Observation> data, const BasisSystem& basis,
                                   double eps_clip) {
    if (!(eps_clip > 0.0 && eps_clip < 0.5))
        throw std::invalid_argument("fit_propensity_and_a: eps_clip must lie in (0, 0.5)");
    PropensityFit fit;
    fit.eps_clip = eps_clip;
    fit.p_hat = fit_regression_series(
        data, [](const Observation& o) { return o.a; }, basis);
    for (const Observation& obs : data) {
        const double p = fit.p_hat(obs.z.point);
        if (p < eps_clip || p > 1.0 - eps_clip) ++fit.clip_events;
    }
    return fit;
}

ScalarFn WeightFit::fn() const {
    WeightFit self = *this;
    return [self](const Eigen::VectorXd& z) { return self(z); };
}

WeightFit fit_weight(const ModelKind& kind, std::span<const Observation> data,
                     const Partition& partition) {
    if (data.empty()) throw std::invalid_argument("fit_weight: empty sample");
    WeightFit out;
    out.partition = partition;
    if (kind.tag == ModelTag::MissingData) {
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(partition.size());
        for (const Observation& obs : data)
            if (obs.a == 1.0) counts[partition.locate(obs.z.point)] += 1.0;
        const double n = static_cast<double>(data.size());
        out.values.resize(partition.size());
        for (int c = 0; c < partition.size(); ++c)
            out.values[c] = -counts[c] / (n * partition.cell_volume(c));
    } else {
        const HistogramDensity dens = fit_density_histogram(data, partition);
        out.values = -dens.density;
    }
    return out;
}

NuisanceFit fit_nuisances(const ModelKind& kind, std::span<const Observation> data,
                          const Partition& partition, const FitOptions& options) {
    const BasisSystem basis = partition.indicator_basis();
    NuisanceFit fit;
    fit.meta.basis_size = basis.size();
    fit.chi_domain = partition.domain();

    const HistogramDensity dens = fit_density_histogram(data, partition);
    fit.f_hat = dens.fn();

    switch (kind.tag) {
        case ModelTag::MissingData: {
            const PropensityFit pf = fit_propensity_and_a(data, basis, options.eps_clip);
            fit.meta.clip_events = pf.clip_events;
            fit.a_hat = pf.a_fn();
            fit.b_hat = fit_regression_series(
                            data, [](const Observation& o) { return o.y1; }, basis,
                            [](const Observation& o) { return o.a == 1.0; })
                            .fn();
            break;
        }
        case ModelTag::Covariance: {
            fit.a_hat = fit_regression_series(
                            data, [](const Observation& o) { return o.a; }, basis)
                            .fn();
            fit.b_hat = fit_regression_series(
                            data, [](const Observation& o) { return o.y1; }, basis)
                            .fn();
            break;
        }
        case ModelTag::Ate: {
            // The pseudo-outcome Y * (A - pi)/(pi(1-pi)) has conditional mean
            // equal to the treatment-effect function; pi is known.
            const ScalarFn pi = kind.propensity;
            auto pseudo = [pi](double y, const Observation& o) {
                const double p = pi(o.z.point);
                return y * (o.a - p) / (p * (1.0 - p));
            };
            fit.a_hat = fit_regression_series(
                            data, [pseudo](const Observation& o) { return pseudo(o.y1, o); },
                            basis)
                            .fn();
            fit.b_hat = fit_regression_series(
                            data, [pseudo](const Observation& o) { return pseudo(o.y2, o); },
                            basis)
                            .fn();
            break;
        }
    }

    if (options.weight_from_density && kind.tag == ModelTag::MissingData) {
        WeightFit wf;
        wf.partition = partition;
        wf.values = -dens.density;
        fit.w_hat = wf.fn();
    } else {
        fit.w_hat = fit_weight(kind, data, partition).fn();
    }
    return fit;
}

} // namespace hoif
