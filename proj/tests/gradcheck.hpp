#ifndef RPK_TESTS_GRADCHECK_HPP
#define RPK_TESTS_GRADCHECK_HPP

#include <functional>
#include <vector>

#include "rpk/tensor.hpp"

namespace rpk::testing {

// Test-only linear scalarizer: fixed random weights keep the loss surface
// smooth so finite differences never straddle a kink.
inline Tensor weighted_sum(const Tensor& x, const std::vector<double>& w) {
    if (w.size() != x.values().size()) throw ShapeError("weighted_sum: weight count");
    Tensor out = make_op_node(Shape{1, 1, 1}, {x});
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) acc += w[i] * x.values()[i];
    out.values_mut()[0] = acc;
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        on->backprop = [on, xn, w]() {
            autodiff::ensure_grad(xn);
            for (size_t i = 0; i < w.size(); ++i) xn->grad[i] += on->grad[0] * w[i];
        };
    }
    return out;
}

// Central finite differences against backward() for every element of every
// tracked input. Returns the worst relative error.
inline double gradcheck(std::vector<Tensor> inputs, const std::function<Tensor()>& forward, double h = 1e-4) {
    for (auto& t : inputs) t.zero_grad();
    Tensor loss = forward();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) analytic.push_back(t.grad());

    double worst = 0.0;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& vals = inputs[ti].values_mut();
        for (size_t i = 0; i < vals.size(); ++i) {
            double keep = vals[i];
            double lp, lm;
            {
                autodiff::NoGradGuard ng;
                vals[i] = keep + h;
                lp = forward().item();
                vals[i] = keep - h;
                lm = forward().item();
                vals[i] = keep;
            }
            double numeric = (lp - lm) / (2.0 * h);
            double a = analytic[ti][i];
            double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline std::vector<double> random_vec(Rng& rng, int64_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace rpk::testing

#endif  // RPK_TESTS_GRADCHECK_HPP
