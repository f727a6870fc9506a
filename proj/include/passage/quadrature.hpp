// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

namespace passage {

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// One 15-point Gauss-Kronrod panel on [a, b]. Error estimate is the
/// difference against the embedded 7-point Gauss rule.
QuadResult gk15_panel(const std::function<double(double)>& f, double a, double b);

/// Adaptive Gauss-Kronrod on [a, b], worst-panel-first refinement.
/// Stops when the summed error estimate is below abs_tol + rel_tol*|value|.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double abs_tol = 1e-13, double rel_tol = 1e-11,
                              int max_panels = 4000);

}  // namespace passage
