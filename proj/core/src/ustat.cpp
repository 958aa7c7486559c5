#include "hoif/ustat.hpp"

#include <cmath>
#include <vector>

namespace hoif {

double degeneracy_check(const DiscreteModel& model, const Kernel2<Observation>& kernel) {
    const auto atoms = enumerate_observations(model);
    double worst = 0.0;
    for (const auto& fixed : atoms) {
        detail::CompensatedSum acc;
        for (const auto& other : atoms) acc.add(other.prob * kernel(fixed.obs, other.obs));
        worst = std::max(worst, std::abs(acc.value()));
    }
    return worst;
}

double hoeffding_variance(const DiscreteModel& model, const Kernel2<Observation>& kernel, int n) {
    if (n < 2) throw std::invalid_argument("hoeffding_variance: need n >= 2");
    const auto atoms = enumerate_observations(model);
    const auto m = atoms.size();

    std::vector<std::vector<double>> vals(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) vals[i][j] = kernel(atoms[i].obs, atoms[j].obs);

    detail::CompensatedSum theta_acc;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            theta_acc.add(atoms[i].prob * atoms[j].prob * vals[i][j]);
    const double theta = theta_acc.value();

    // f1(x) = E[f(x, X2)] - theta;  s1sq = Var f1;  s2sq = E[(f - theta)^2]
    double s1sq = 0.0;
    double s2sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        detail::CompensatedSum row;
        for (std::size_t j = 0; j < m; ++j) row.add(atoms[j].prob * (vals[i][j] - theta));
        const double f1 = row.value();
        s1sq += atoms[i].prob * f1 * f1;
        for (std::size_t j = 0; j < m; ++j) {
            const double c = vals[i][j] - theta;
            s2sq += atoms[i].prob * atoms[j].prob * c * c;
        }
    }

    const double nn = static_cast<double>(n);
    return 4.0 * (nn - 2.0) / (nn * (nn - 1.0)) * s1sq + 2.0 / (nn * (nn - 1.0)) * s2sq;
}

} // namespace hoif
