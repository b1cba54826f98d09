#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "finsler/errors.hpp"

namespace finsler {

namespace detail {

inline double simpson(double h, double fa, double fc, double fb) {
    return (fa + 4.0 * fc + fb) * (h / 6.0);
}

template <typename F>
double simpson_adaptive(const F& f, double a, double c, double b,
                        double fa, double fc, double fb, double whole,
                        double tol, int depth, double& worst_estimate) {
    const double ca = 0.5 * (a + c);
    const double cb = 0.5 * (c + b);
    const double fca = f(ca);
    const double fcb = f(cb);
    const double h2 = 0.5 * (b - a);
    const double left = simpson(h2, fa, fca, fc);
    const double right = simpson(h2, fc, fcb, fb);
    const double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol || depth <= 0) {
        if (depth <= 0) worst_estimate = std::max(worst_estimate, std::abs(err));
        return left + right + err;
    }
    return simpson_adaptive(f, a, ca, c, fa, fca, fc, left, 0.5 * tol, depth - 1, worst_estimate) +
           simpson_adaptive(f, c, cb, b, fc, fcb, fb, right, 0.5 * tol, depth - 1, worst_estimate);
}

} // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
/// Reversed limits integrate with flipped sign. Throws QuadratureError with the
/// achieved estimate when the recursion depth is exhausted above tolerance.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    const double c = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fc = f(c);
    const double whole = detail::simpson(b - a, fa, fc, fb);
    double worst = 0.0;
    const double r = detail::simpson_adaptive(f, a, c, b, fa, fc, fb, whole, tol, max_depth, worst);
    if (worst > tol)
        throw QuadratureError("adaptive_simpson: depth exhausted, achieved estimate " +
                                  std::to_string(worst) + " above tolerance " + std::to_string(tol),
                              worst);
    return sign * r;
}

} // namespace finsler
