#pragma once

#include <stdexcept>
#include <string>

namespace hoif {

// Malformed configuration, file, or size overflow. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Observation fields do not match the model kind (e.g. y1 != 0 with a == 0 under missing data).
class LayoutError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Gram matrix of the basis w.r.t. the weight measure is singular or too ill-conditioned.
class DegenerateWeightError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Regression design is rank-deficient on the (restricted) subsample.
class CollinearBasisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hoif
