#include "hoif/basis.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace hoif {

EvalDomain EvalDomain::atoms(std::vector<Eigen::VectorXd> pts) {
    EvalDomain d;
    d.masses = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pts.size()));
    d.points = std::move(pts);
    return d;
}

EvalDomain EvalDomain::dyadic_grid(int d, int level) {
    if (d < 1 || level < 0) throw ConfigError("dyadic_grid: need d >= 1 and level >= 0");
    const double ld = static_cast<double>(level) * d;
    if (ld > 24) throw ConfigError("dyadic_grid: grid size 2^(level*d) too large");
    const int per_dim = 1 << level;
    const auto cells = static_cast<std::size_t>(std::llround(std::pow(2.0, ld)));
    EvalDomain out;
    out.points.reserve(cells);
    const double vol = 1.0 / static_cast<double>(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        Eigen::VectorXd p(d);
        std::size_t rest = c;
        for (int i = 0; i < d; ++i) {
            const auto coord = rest % static_cast<std::size_t>(per_dim);
            rest /= static_cast<std::size_t>(per_dim);
            p[i] = (static_cast<double>(coord) + 0.5) / per_dim;
        }
        out.points.push_back(std::move(p));
    }
    out.masses = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cells), vol);
    return out;
}

BasisSystem BasisSystem::constant(int dim_domain) { return tensor_haar(dim_domain, 0); }

BasisSystem BasisSystem::tensor_haar(int dim_domain, int level, int max_size) {
    if (dim_domain < 1 || level < 0)
        throw ConfigError("tensor_haar: need dim >= 1 and level >= 0");
    const double sz = std::pow(2.0, static_cast<double>(level) * dim_domain);
    if (sz > static_cast<double>(max_size))
        throw ConfigError("tensor_haar: size 2^(level*d) exceeds the configured maximum");
    BasisSystem b;
    b.family_ = Family::Haar;
    b.dim_ = dim_domain;
    b.level_ = level;
    b.size_ = static_cast<int>(std::llround(sz));
    b.haar_scale_ = std::sqrt(sz);
    return b;
}

BasisSystem BasisSystem::tensor_haar_capped(int dim_domain, int k) {
    if (k < 1) {
        BasisSystem b;
        b.family_ = Family::Haar;
        b.dim_ = dim_domain;
        b.level_ = 0;
        b.size_ = 0;
        b.haar_scale_ = 1.0;
        return b;
    }
    int level = 0;
    while (std::pow(2.0, static_cast<double>(level + 1) * dim_domain) <= static_cast<double>(k))
        ++level;
    return tensor_haar(dim_domain, level);
}

BasisSystem BasisSystem::atom_indicators(std::vector<Eigen::VectorXd> atoms, int k) {
    if (atoms.empty()) throw ConfigError("atom_indicators: empty atom list");
    if (k < 1 || k > static_cast<int>(atoms.size()))
        throw ConfigError("atom_indicators: need 1 <= k <= number of atoms");
    BasisSystem b;
    b.family_ = Family::AtomIndicator;
    b.dim_ = static_cast<int>(atoms[0].size());
    b.size_ = k;
    b.atoms_ = std::make_shared<const std::vector<Eigen::VectorXd>>(std::move(atoms));
    return b;
}

BasisSystem BasisSystem::custom(int dim_domain, std::vector<ScalarFn> fns) {
    BasisSystem b;
    b.family_ = Family::Custom;
    b.dim_ = dim_domain;
    b.size_ = static_cast<int>(fns.size());
    b.fns_ = std::make_shared<const std::vector<ScalarFn>>(std::move(fns));
    return b;
}

int BasisSystem::haar_cell(const Eigen::VectorXd& z) const {
    const int per_dim = 1 << level_;
    int cell = 0;
    int stride = 1;
    for (int i = 0; i < dim_; ++i) {
        int c = static_cast<int>(std::floor(z[i] * per_dim));
        if (c < 0) c = 0;
        if (c >= per_dim) c = per_dim - 1;
        cell += c * stride;
        stride *= per_dim;
    }
    return cell;
}

int BasisSystem::atom_index(const Eigen::VectorXd& z) const {
    const auto& atoms = *atoms_;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double d = (atoms[j] - z).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

double BasisSystem::eval(int j, const Eigen::VectorXd& z) const {
    switch (family_) {
        case Family::Haar:
            return haar_cell(z) == j ? haar_scale_ : 0.0;
        case Family::AtomIndicator:
            return atom_index(z) == j ? 1.0 : 0.0;
        case Family::Custom:
            return (*fns_)[static_cast<std::size_t>(j)](z);
    }
    return 0.0;
}

Eigen::VectorXd BasisSystem::eval_all(const Eigen::VectorXd& z) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size_);
    switch (family_) {
        case Family::Haar: {
            if (size_ > 0) v[haar_cell(z)] = haar_scale_;
            break;
        }
        case Family::AtomIndicator: {
            const int j = atom_index(z);
            if (j < size_) v[j] = 1.0;
            break;
        }
        case Family::Custom:
            for (int j = 0; j < size_; ++j) v[j] = (*fns_)[static_cast<std::size_t>(j)](z);
            break;
    }
    return v;
}

Eigen::MatrixXd gram(const BasisSystem& basis, const WeightMeasure& weight,
                     const EvalDomain& domain) {
    const int k = basis.size();
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(k, k);
    for (int m = 0; m < domain.size(); ++m) {
        const Eigen::VectorXd& p = domain.points[static_cast<std::size_t>(m)];
        const double wm = weight.w(p) * domain.masses[m];
        if (wm == 0.0) continue;
        const Eigen::VectorXd phi = basis.eval_all(p);
        omega.noalias() += wm * (phi * phi.transpose());
    }
    return omega;
}

ProjectionKernel::ProjectionKernel(BasisSystem basis, WeightMeasure weight, EvalDomain domain)
    : basis_(std::move(basis)), weight_(std::move(weight)), domain_(std::move(domain)) {
    const int k = basis_.size();
    if (k == 0) {
        omega_inv_ = Eigen::MatrixXd::Zero(0, 0);
        condition_ = 1.0;
        return;
    }
    const Eigen::MatrixXd omega = gram(basis_, weight_, domain_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(k - 1);
    condition_ = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(condition_ <= kMaxCondition))
        throw DegenerateWeightError("projection kernel: Gram matrix singular or ill-conditioned");
    omega_inv_ = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() *
                 svd.matrixU().transpose();
}

double ProjectionKernel::eval(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) const {
    if (basis_.size() == 0) return 0.0;
    return basis_.eval_all(z1).dot(omega_inv_ * basis_.eval_all(z2));
}

ProjectionKernel::Projection ProjectionKernel::project(const ScalarFn& g) const {
    Eigen::VectorXd vals(domain_.size());
    for (int m = 0; m < domain_.size(); ++m)
        vals[m] = g(domain_.points[static_cast<std::size_t>(m)]);
    return project_values(vals);
}

ProjectionKernel::Projection ProjectionKernel::project_values(
    const Eigen::VectorXd& g_at_points) const {
    const int k = basis_.size();
    if (g_at_points.size() != domain_.size())
        throw std::invalid_argument("project_values: value count must match the domain");
    Eigen::VectorXd moments = Eigen::VectorXd::Zero(k);
    for (int m = 0; m < domain_.size(); ++m) {
        const Eigen::VectorXd& p = domain_.points[static_cast<std::size_t>(m)];
        const double wm = weight_.w(p) * domain_.masses[m] * g_at_points[m];
        if (wm == 0.0) continue;
        moments.noalias() += wm * basis_.eval_all(p);
    }
    Projection out;
    out.coeffs = omega_inv_ * moments;
    BasisSystem basis = basis_;
    Eigen::VectorXd coeffs = out.coeffs;
    out.fn = [basis, coeffs](const Eigen::VectorXd& z) { return basis.eval_all(z).dot(coeffs); };
    return out;
}

} // namespace hoif
