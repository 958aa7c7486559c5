#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <utility>

#include "hoif/model.hpp"

namespace hoif {

// Symmetric two-argument kernel. `claimed_degenerate` is advisory metadata;
// degeneracy_check verifies it against an exact model.
template <class X>
struct Kernel2 {
    std::function<double(const X&, const X&)> f;
    bool claimed_degenerate = false;

    double operator()(const X& x1, const X& x2) const { return f(x1, x2); }
};

namespace detail {

// Neumaier compensated summation; keeps the pair loops deterministic to well
// below 1e-12 regardless of magnitude cancellation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace detail

// Sample mean of g: the order-1 U-statistic.
template <class X, class G>
double ustat_order1(std::span<const X> data, G&& g) {
    if (data.empty()) throw std::invalid_argument("ustat_order1: empty sample");
    detail::CompensatedSum acc;
    for (const X& x : data) acc.add(g(x));
    return acc.value() / static_cast<double>(data.size());
}

// Order-2 U-statistic: the average of f over ordered distinct pairs,
//   (n(n-1))^{-1} sum_{i != j} f(X_i, X_j),
// by a direct O(n^2) double loop in fixed index order.
template <class X, class F>
double ustat_order2(std::span<const X> data, F&& f) {
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("ustat_order2: need at least two observations");
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) acc.add(f(data[i], data[j]) + f(data[j], data[i]));
    return acc.value() / (static_cast<double>(n) * static_cast<double>(n - 1));
}

template <class X, class F>
double ustat_order2(std::span<const X> data, const Kernel2<X>& k) {
    return ustat_order2(data, k.f);
}

// (x1,x2) -> (f(x1,x2) + f(x2,x1)) / 2. The order-2 U-statistic is invariant
// under this replacement because it averages over ordered pairs.
template <class X>
Kernel2<X> symmetrize(std::function<double(const X&, const X&)> f) {
    return Kernel2<X>{
        [f = std::move(f)](const X& x1, const X& x2) { return 0.5 * (f(x1, x2) + f(x2, x1)); },
        false};
}

// Max over observation atoms x of |E[f(x, X2)]| under the exact model; the
// kernel is degenerate when this is <= 1e-10.
double degeneracy_check(const DiscreteModel& model, const Kernel2<Observation>& kernel);

constexpr double kDegeneracyTol = 1e-10;

// Exact finite-n variance of the order-2 U-statistic of a symmetric kernel
// under the model, via the two-term projection decomposition: with the
// kernel centered at theta = E f and f1(x) = E[f_c(x, X2)],
//   Var(U_n) = 4(n-2)/(n(n-1)) * Var(f1) + 2/(n(n-1)) * E[f_c^2].
double hoeffding_variance(const DiscreteModel& model, const Kernel2<Observation>& kernel, int n);

} // namespace hoif
