// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles, deliberately independent of the library's numerics:
// adaptive Simpson instead of Gauss-Kronrod, direct long-double summation
// instead of the production series evaluator.
#pragma once

#include <cmath>
#include <functional>

namespace oracles {

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

inline double adaptive_simpson_impl(const std::function<double(double)>& f, double a, double b,
                                    double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m);
    const double right = simpson(f, m, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson_impl(f, a, m, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_impl(f, m, b, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    return adaptive_simpson_impl(f, a, b, simpson(f, a, b), tol, 48);
}

inline double central_difference(const std::function<double(double)>& f, double z, double step) {
    return (f(z + step) - f(z - step)) / (2.0 * step);
}

/// Fixed-step composite Simpson; for smooth bounded integrands where the
/// adaptive refinement is unnecessary.
inline double composite_simpson(const std::function<double(double)>& f, double a, double b,
                                double max_step) {
    if (a == b) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_step)));
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) total += simpson(f, a + i * h, a + (i + 1) * h);
    return total;
}

/// Direct high-K summation of sum a_k q^k e^{-(z0 + alpha k) y} in long double,
/// with a_k supplied by the caller.
inline double series_sum(const std::function<long double(int)>& a, double q, double z0,
                         double alpha, double y, int terms) {
    long double sum = 0.0L;
    for (int k = 0; k < terms; ++k) {
        sum += a(k) * std::pow((long double)q, k) * std::exp(-((long double)z0 + alpha * k) * y);
    }
    return static_cast<double>(sum);
}

}  // namespace oracles
