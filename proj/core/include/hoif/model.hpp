#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hoif/errors.hpp"
#include "hoif/observation.hpp"

namespace hoif {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

// The model class: structured semiparametric models whose target functional
// has a first-order influence function of the bilinear form
//
//   if1(x) = a(z) b(z) S1(x) + a(z) S2(x) + b(z) S3(x) + S4(x) - chi,
//
// for a known statistic S = (S1,S2,S3,S4) of the data. Three members:
//
//   MissingData  X = (Y*A, A, Z), Y,A in {0,1} conditionally independent
//                given Z. b(z) = Pr(Y=1|Z=z), a(z) = 1/Pr(A=1|Z=z) >= 1.
//                Target chi = integral of b f = E[Y].
//                S = (-A, A*Y, 1, 0).
//
//   Covariance   X = (Y, A, Z) with binary Y, A. a(z) = E(A|Z=z),
//                b(z) = E(Y|Z=z). Target chi = integral of a b f.
//                S = (-1, Y, A, 0). Note the S2/S3 roles: with S2 = Y and
//                S3 = A the conditional means satisfy s1~*b + s2~ = 0 and
//                s1~*a + s3~ = 0, which makes if1 mean zero; the swapped
//                assignment does not.
//
//   Ate          X = (Y1, Y2, A, Z) with known propensity pi(z) = Pr(A=1|Z).
//                a(z), b(z) are the two conditional treatment effects,
//                both in [-1,1]. Target chi = integral of a b f.
//                With W = (A - pi)/(pi (1-pi)):
//                S = (1 - 2*A*W, Y2*W, Y1*W, 0).
//
// The conditional means s_i~(z) = E(S_i | Z=z) satisfy, in every member,
//   s1~ b + s2~ = 0   and   s1~ a + s3~ = 0,
// which is the engine behind the exact bias identities in estimators.hpp.
enum class ModelTag { MissingData, Covariance, Ate };

struct ModelKind {
    ModelTag tag = ModelTag::MissingData;
    ScalarFn propensity; // Ate only; known, with 0 < pi(z) < 1 everywhere

    static ModelKind missing_data() { return {ModelTag::MissingData, {}}; }
    static ModelKind covariance() { return {ModelTag::Covariance, {}}; }
    static ModelKind ate(ScalarFn pi) { return {ModelTag::Ate, std::move(pi)}; }

    bool has_second_outcome() const { return tag == ModelTag::Ate; }
};

// Value of the statistic S at one observation.
struct SVector {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;
    double s4 = 0.0;
};

// Unknown parameter functions. Interpretation of a and b depends on the
// model kind (see above); f is the covariate density w.r.t. the dominating
// measure.
struct NuisanceParams {
    ScalarFn a;
    ScalarFn b;
    ScalarFn f;
};

// Closed-form conditional means s_i~(z) = E(S_i | Z=z).
struct StildeFns {
    ScalarFn s1;
    ScalarFn s2;
    ScalarFn s3;
};

// Finite-support covariate model. Every moment of the implied observation
// distribution is computable by finite enumeration, which makes this the
// exact ground-truth oracle for all bias and degeneracy identities.
//
// Observation law given Z = z_j:
//   MissingData  A ~ Bern(1/a_j), Y ~ Bern(b_j) independent, y1 = Y*A.
//   Covariance   A ~ Bern(a_j), Y ~ Bern(b_j) independent.
//   Ate          A ~ Bern(pi(z_j)); given A, the outcomes are independent
//                with Pr(Y1=1|A) = (1 + a_j (2A-1))/2 and
//                Pr(Y2=1|A) = (1 + b_j (2A-1))/2, so the two conditional
//                treatment effects are exactly a_j and b_j.
struct DiscreteModel {
    ModelKind kind;
    std::vector<Eigen::VectorXd> support;
    Eigen::VectorXd f;
    Eigen::VectorXd a;
    Eigen::VectorXd b;

    int size() const { return static_cast<int>(support.size()); }
    int dim() const { return support.empty() ? 0 : static_cast<int>(support[0].size()); }

    // Index of the support atom nearest to z (exact match for generated data).
    int locate(const Eigen::VectorXd& z) const;

    // Throws std::invalid_argument on range violations:
    // f >= 0 summing to 1 (tol 1e-10); per-kind ranges of a and b;
    // for Ate, 0 < pi(z_j) < 1 on the support.
    void validate() const;

    // Atom values of the conditional means s_i~.
    Eigen::VectorXd stilde1_atoms() const;
    Eigen::VectorXd stilde2_atoms() const;
    Eigen::VectorXd stilde3_atoms() const;

    // Atom weights of the measure s1~ f, the weight in which the first-order
    // bias is an inner product of the two nuisance errors.
    Eigen::VectorXd weight_atoms() const;

    // ScalarFn view of per-atom values, evaluated by nearest-atom lookup.
    ScalarFn atom_fn(Eigen::VectorXd values) const;
};

// One atom of the full observation distribution implied by a DiscreteModel.
struct WeightedObs {
    Observation obs;
    double prob = 0.0;
};

// --- operations ------------------------------------------------------------

// S = (S1,S2,S3,S4) at one observation. Throws LayoutError when the
// observation does not match the model kind's layout.
SVector statistic_S(const ModelKind& kind, const Observation& obs);

// Closed-form conditional means for arbitrary parameter functions:
//   MissingData: s1~ = -1/a, s2~ = b/a, s3~ = 1
//   Covariance / Ate: s1~ = -1, s2~ = b, s3~ = a
StildeFns stilde(const ModelKind& kind, const NuisanceParams& params);

// Target functional. Exact finite sum on a DiscreteModel; quadrature sum
// over the supplied domain otherwise (accuracy is the caller's concern).
double functional_chi(const DiscreteModel& model);
double functional_chi(const ModelKind& kind, const ScalarFn& a, const ScalarFn& b,
                      const ScalarFn& f, const std::vector<Eigen::VectorXd>& quad_points,
                      const Eigen::VectorXd& quad_masses);

// First-order influence function value at one observation, centered at chi.
double first_order_if(const ModelKind& kind, const ScalarFn& a, const ScalarFn& b,
                      double chi, const Observation& obs);

// Full observation support, at most J*2*2 atoms (J*2*2*2 for Ate).
// Probabilities sum to 1.
std::vector<WeightedObs> enumerate_observations(const DiscreteModel& model);

// Exact E[g(X)] and E[g(X1,X2)] (X1, X2 independent copies) by enumeration.
double exact_expectation(const DiscreteModel& model,
                         const std::function<double(const Observation&)>& g);
double exact_expectation2(const DiscreteModel& model,
                          const std::function<double(const Observation&, const Observation&)>& g);

} // namespace hoif
