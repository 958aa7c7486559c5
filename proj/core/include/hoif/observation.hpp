#pragma once

#include <Eigen/Core>

namespace hoif {

// Covariate value: a point in [0,1]^d. When the value was drawn from (or
// located on) a discrete support, `atom` carries the support index; -1 means
// "no atom known" and forces nearest-atom lookup where one is needed.
struct Covariate {
    Eigen::VectorXd point;
    int atom = -1;

    static Covariate at_atom(Eigen::VectorXd p, int index) {
        return Covariate{std::move(p), index};
    }
    static Covariate continuous(Eigen::VectorXd p) { return Covariate{std::move(p), -1}; }
};

// One sampled record. Outcomes and the treatment indicator are stored as 0/1
// doubles. Under the missing-data model y1 is the product Y*A, so y1 = 0
// whenever a = 0. y2 is meaningful only for the two-outcome treatment model.
struct Observation {
    double y1 = 0.0;
    double y2 = 0.0;
    double a = 0.0;
    Covariate z;
};

} // namespace hoif
