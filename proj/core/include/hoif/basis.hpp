#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "hoif/errors.hpp"
#include "hoif/model.hpp"

namespace hoif {

// Finite evaluation domain: points with base-measure masses. A discrete
// support uses counting measure (mass 1 per atom); a dyadic quadrature grid
// uses cell volumes. Integrals below are sums over this domain, so they are
// exact on discrete supports and midpoint quadrature otherwise.
struct EvalDomain {
    std::vector<Eigen::VectorXd> points;
    Eigen::VectorXd masses;

    static EvalDomain atoms(std::vector<Eigen::VectorXd> pts);
    // Midpoints of the 2^(level*d) dyadic cells of [0,1]^d, mass = cell volume.
    static EvalDomain dyadic_grid(int d, int level);

    int size() const { return static_cast<int>(points.size()); }
};

// A system of k functions on [0,1]^d (or on a discrete support). Families:
//   tensor_haar      the 2^(level*d) dyadic-cell indicators scaled by
//                    2^(level*d/2), so each integrates to 1 in square under
//                    Lebesgue measure; level 0 is the constant function 1
//   atom_indicators  indicators of the first k atoms of a support
//   custom           arbitrary user functions
class BasisSystem {
public:
    BasisSystem() = default; // empty system (size 0)

    static BasisSystem constant(int dim_domain);
    static BasisSystem tensor_haar(int dim_domain, int level, int max_size = 1 << 20);
    static BasisSystem atom_indicators(std::vector<Eigen::VectorXd> atoms, int k);
    static BasisSystem custom(int dim_domain, std::vector<ScalarFn> fns);

    int dim_domain() const { return dim_; }
    int size() const { return size_; }

    double eval(int j, const Eigen::VectorXd& z) const;
    Eigen::VectorXd eval_all(const Eigen::VectorXd& z) const;

    // Largest tensor-Haar system with size <= k on this dimension; k < 1 is
    // the empty system (size 0), which yields a zero projection.
    static BasisSystem tensor_haar_capped(int dim_domain, int k);

private:
    enum class Family { Haar, AtomIndicator, Custom };

    Family family_ = Family::Custom;
    int dim_ = 0;
    int size_ = 0;
    int level_ = 0;                              // Haar
    double haar_scale_ = 1.0;                    // 2^(level*d/2)
    std::shared_ptr<const std::vector<Eigen::VectorXd>> atoms_; // AtomIndicator
    std::shared_ptr<const std::vector<ScalarFn>> fns_;          // Custom

    int haar_cell(const Eigen::VectorXd& z) const;
    int atom_index(const Eigen::VectorXd& z) const;
};

// Weight measure w dnu; w may change sign or be negative everywhere. On a
// discrete support the atom weight is w(z_j) itself (counting base measure),
// so any density factor is supplied inside w.
struct WeightMeasure {
    ScalarFn w;

    static WeightMeasure of(ScalarFn fn) { return {std::move(fn)}; }
    static WeightMeasure constant(double c) {
        return {[c](const Eigen::VectorXd&) { return c; }};
    }
};

// Gram matrix G_ij = sum_m phi_i(p_m) phi_j(p_m) w(p_m) mass_m.
Eigen::MatrixXd gram(const BasisSystem& basis, const WeightMeasure& weight,
                     const EvalDomain& domain);

// Rank-k reproducing kernel Pi(z1,z2) = phi(z1)' G^{-1} phi(z2) for the span
// of the basis under the weight measure: integrating Pi(.,z2) against any
// basis function in the weight measure returns that function at z2. The
// kernel is symmetric, and the projection it induces is idempotent and
// self-adjoint w.r.t. the (possibly indefinite) bilinear form <g,h>_w.
//
// Construction throws DegenerateWeightError when the Gram matrix has
// condition number above 1e12; the weight is rejected rather than
// regularized.
class ProjectionKernel {
public:
    ProjectionKernel(BasisSystem basis, WeightMeasure weight, EvalDomain domain);

    const BasisSystem& basis() const { return basis_; }
    const WeightMeasure& weight() const { return weight_; }
    const EvalDomain& domain() const { return domain_; }
    const Eigen::MatrixXd& omega_inverse() const { return omega_inv_; }
    double gram_condition() const { return condition_; }
    int rank() const { return basis_.size(); }

    double eval(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) const;

    struct Projection {
        Eigen::VectorXd coeffs;
        ScalarFn fn;
    };
    // Pi g: coefficients G^{-1} <phi, g>_w and the evaluable projected function.
    Projection project(const ScalarFn& g) const;
    // Same with g supplied as values at the construction-domain points.
    Projection project_values(const Eigen::VectorXd& g_at_points) const;

    static constexpr double kMaxCondition = 1e12;

private:
    BasisSystem basis_;
    WeightMeasure weight_;
    EvalDomain domain_;
    Eigen::MatrixXd omega_inv_;
    double condition_ = 0.0;
};

} // namespace hoif
