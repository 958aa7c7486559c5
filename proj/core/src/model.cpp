#include "hoif/model.hpp"

#include <cmath>
#include <limits>

namespace hoif {

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

void check_layout(const ModelKind& kind, const Observation& obs) {
    if (!is_binary(obs.a)) throw LayoutError("observation: a must be 0 or 1");
    if (!is_binary(obs.y1)) throw LayoutError("observation: y1 must be 0 or 1");
    switch (kind.tag) {
        case ModelTag::MissingData:
            if (obs.a == 0.0 && obs.y1 != 0.0)
                throw LayoutError("missing-data observation: y1 = Y*A must be 0 when a = 0");
            break;
        case ModelTag::Covariance:
            break;
        case ModelTag::Ate:
            if (!is_binary(obs.y2)) throw LayoutError("ate observation: y2 must be 0 or 1");
            if (!kind.propensity) throw LayoutError("ate model: propensity function missing");
            break;
    }
}

} // namespace

SVector statistic_S(const ModelKind& kind, const Observation& obs) {
    check_layout(kind, obs);
    switch (kind.tag) {
        case ModelTag::MissingData:
            return {-obs.a, obs.y1, 1.0, 0.0}; // y1 is already A*Y
        case ModelTag::Covariance:
            return {-1.0, obs.y1, obs.a, 0.0};
        case ModelTag::Ate: {
            const double pi = kind.propensity(obs.z.point);
            if (!(pi > 0.0 && pi < 1.0)) throw LayoutError("ate model: propensity outside (0,1)");
            const double w = (obs.a - pi) / (pi * (1.0 - pi));
            return {1.0 - 2.0 * obs.a * w, obs.y2 * w, obs.y1 * w, 0.0};
        }
    }
    throw LayoutError("unknown model kind");
}

StildeFns stilde(const ModelKind& kind, const NuisanceParams& params) {
    if (kind.tag == ModelTag::MissingData) {
        ScalarFn a = params.a;
        ScalarFn b = params.b;
        return {
            [a](const Eigen::VectorXd& z) { return -1.0 / a(z); },
            [a, b](const Eigen::VectorXd& z) { return b(z) / a(z); },
            [](const Eigen::VectorXd&) { return 1.0; },
        };
    }
    return {
        [](const Eigen::VectorXd&) { return -1.0; },
        params.b,
        params.a,
    };
}

int DiscreteModel::locate(const Eigen::VectorXd& z) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < size(); ++j) {
        const double d = (support[static_cast<std::size_t>(j)] - z).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

void DiscreteModel::validate() const {
    const int J = size();
    if (J == 0) throw std::invalid_argument("discrete model: empty support");
    if (f.size() != J || a.size() != J || b.size() != J)
        throw std::invalid_argument("discrete model: f, a, b must all have the support's length");
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
        if (f[j] < 0.0) throw std::invalid_argument("discrete model: f must be nonnegative");
        total += f[j];
    }
    if (std::abs(total - 1.0) > 1e-10)
        throw std::invalid_argument("discrete model: f must sum to 1");
    for (int j = 0; j < J; ++j) {
        switch (kind.tag) {
            case ModelTag::MissingData:
                if (a[j] < 1.0) throw std::invalid_argument("missing-data model: a >= 1 required");
                if (b[j] < 0.0 || b[j] > 1.0)
                    throw std::invalid_argument("missing-data model: b in [0,1] required");
                break;
            case ModelTag::Covariance:
                if (a[j] < 0.0 || a[j] > 1.0)
                    throw std::invalid_argument("covariance model: a in [0,1] required");
                if (b[j] < 0.0 || b[j] > 1.0)
                    throw std::invalid_argument("covariance model: b in [0,1] required");
                break;
            case ModelTag::Ate: {
                if (a[j] < -1.0 || a[j] > 1.0 || b[j] < -1.0 || b[j] > 1.0)
                    throw std::invalid_argument("ate model: effects must lie in [-1,1]");
                if (!kind.propensity) throw std::invalid_argument("ate model: propensity missing");
                const double pi = kind.propensity(support[static_cast<std::size_t>(j)]);
                if (!(pi > 0.0 && pi < 1.0))
                    throw std::invalid_argument("ate model: propensity outside (0,1) on support");
                break;
            }
        }
    }
}

Eigen::VectorXd DiscreteModel::stilde1_atoms() const {
    if (kind.tag == ModelTag::MissingData) return (-a.array().inverse()).matrix();
    return Eigen::VectorXd::Constant(size(), -1.0);
}

Eigen::VectorXd DiscreteModel::stilde2_atoms() const {
    if (kind.tag == ModelTag::MissingData) return (b.array() / a.array()).matrix();
    return b;
}

Eigen::VectorXd DiscreteModel::stilde3_atoms() const {
    if (kind.tag == ModelTag::MissingData) return Eigen::VectorXd::Ones(size());
    return a;
}

Eigen::VectorXd DiscreteModel::weight_atoms() const {
    return (stilde1_atoms().array() * f.array()).matrix();
}

ScalarFn DiscreteModel::atom_fn(Eigen::VectorXd values) const {
    if (values.size() != size())
        throw std::invalid_argument("atom_fn: value vector must match support size");
    auto self = *this;
    return [self, values = std::move(values)](const Eigen::VectorXd& z) {
        return values[self.locate(z)];
    };
}

double functional_chi(const DiscreteModel& model) {
    if (model.kind.tag == ModelTag::MissingData) return model.f.dot(model.b);
    return (model.a.array() * model.b.array() * model.f.array()).sum();
}

double functional_chi(const ModelKind& kind, const ScalarFn& a, const ScalarFn& b,
                      const ScalarFn& f, const std::vector<Eigen::VectorXd>& quad_points,
                      const Eigen::VectorXd& quad_masses) {
    double acc = 0.0;
    for (std::size_t m = 0; m < quad_points.size(); ++m) {
        const Eigen::VectorXd& z = quad_points[m];
        const double integrand =
            (kind.tag == ModelTag::MissingData) ? b(z) * f(z) : a(z) * b(z) * f(z);
        acc += integrand * quad_masses[static_cast<Eigen::Index>(m)];
    }
    return acc;
}

double first_order_if(const ModelKind& kind, const ScalarFn& a, const ScalarFn& b,
                      double chi, const Observation& obs) {
    const SVector s = statistic_S(kind, obs);
    const double az = a(obs.z.point);
    const double bz = b(obs.z.point);
    return az * bz * s.s1 + az * s.s2 + bz * s.s3 + s.s4 - chi;
}

std::vector<WeightedObs> enumerate_observations(const DiscreteModel& model) {
    model.validate();
    std::vector<WeightedObs> out;
    const int J = model.size();
    for (int j = 0; j < J; ++j) {
        const Eigen::VectorXd& z = model.support[static_cast<std::size_t>(j)];
        const double fj = model.f[j];
        if (fj == 0.0) continue;
        const Covariate cov = Covariate::at_atom(z, j);
        switch (model.kind.tag) {
            case ModelTag::MissingData: {
                const double p = 1.0 / model.a[j]; // Pr(A=1|Z)
                const double bj = model.b[j];
                // y1 = Y*A: three reachable atoms
                out.push_back({{0.0, 0.0, 0.0, cov}, fj * (1.0 - p)});
                out.push_back({{0.0, 0.0, 1.0, cov}, fj * p * (1.0 - bj)});
                out.push_back({{1.0, 0.0, 1.0, cov}, fj * p * bj});
                break;
            }
            case ModelTag::Covariance: {
                const double aj = model.a[j];
                const double bj = model.b[j];
                for (int av = 0; av <= 1; ++av)
                    for (int yv = 0; yv <= 1; ++yv) {
                        const double pa = av ? aj : 1.0 - aj;
                        const double py = yv ? bj : 1.0 - bj;
                        out.push_back({{static_cast<double>(yv), 0.0,
                                        static_cast<double>(av), cov},
                                       fj * pa * py});
                    }
                break;
            }
            case ModelTag::Ate: {
                const double pi = model.kind.propensity(z);
                for (int av = 0; av <= 1; ++av) {
                    const double pa = av ? pi : 1.0 - pi;
                    const double sign = av ? 1.0 : -1.0;
                    const double p1 = (1.0 + model.a[j] * sign) / 2.0; // Pr(Y1=1|A)
                    const double p2 = (1.0 + model.b[j] * sign) / 2.0; // Pr(Y2=1|A)
                    for (int y1 = 0; y1 <= 1; ++y1)
                        for (int y2 = 0; y2 <= 1; ++y2) {
                            const double q1 = y1 ? p1 : 1.0 - p1;
                            const double q2 = y2 ? p2 : 1.0 - p2;
                            out.push_back({{static_cast<double>(y1), static_cast<double>(y2),
                                            static_cast<double>(av), cov},
                                           fj * pa * q1 * q2});
                        }
                }
                break;
            }
        }
    }
    return out;
}

double exact_expectation(const DiscreteModel& model,
                         const std::function<double(const Observation&)>& g) {
    double acc = 0.0;
    for (const auto& wo : enumerate_observations(model)) acc += wo.prob * g(wo.obs);
    return acc;
}

double exact_expectation2(const DiscreteModel& model,
                          const std::function<double(const Observation&, const Observation&)>& g) {
    const auto atoms = enumerate_observations(model);
    double acc = 0.0;
    for (const auto& x1 : atoms)
        for (const auto& x2 : atoms) acc += x1.prob * x2.prob * g(x1.obs, x2.obs);
    return acc;
}

} // namespace hoif
