// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "passage/exponent.hpp"

namespace passage {

/// One-parameter function family on an interval: c, c0 + c1*a, or c * a^k.
/// Restricting to these shapes keeps V, its inverse and the killing integral
/// closed form, and the spec serializable.
struct ParametricFn {
    enum class Kind { Constant, Affine, Power };
    Kind kind = Kind::Constant;
    double c0 = 1.0;  // Constant: value; Affine: intercept; Power: coefficient
    double c1 = 0.0;  // Affine: slope; Power: exponent

    double operator()(double a) const;
    static ParametricFn constant(double c) { return {Kind::Constant, c, 0.0}; }
    static ParametricFn affine(double c0, double c1) { return {Kind::Affine, c0, c1}; }
    static ParametricFn power(double coef, double exponent) {
        return {Kind::Power, coef, exponent};
    }
};

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double a) const { return a > lo && a < hi; }
};

struct LevySpec {
    LevyTriplet triplet;
};

struct PssmpSpec {
    LevyTriplet triplet;
    double alpha = 1.0;  // self-similarity index, > 0
};

enum class CsbpVariant { Recurrent, Extinct };

struct CsbpSpec {
    LevyTriplet triplet;
    CsbpVariant variant = CsbpVariant::Recurrent;
    double theta = 1.0;  // free reference point, > psi^{-1}(p) for Recurrent
};

/// Deterministic downward drift with speed v(a) killed at rate omega(a).
struct KilledDriftSpec {
    ParametricFn speed;               // v > 0 on domain
    ParametricFn kill_rate;           // omega >= 0 on domain
    double theta = 0.0;               // anchor for V(a) = int_theta^a dy/v(y)
    Interval domain;

    double clock(double a) const;          // V(a)
    double clock_inverse(double t) const;  // V^{-1}(t)
    /// int_l^x omega(a)/v(a) da, closed form for the supported shapes.
    double kill_integral(double l, double x) const;
};

using ProcessSpec = std::variant<LevySpec, PssmpSpec, CsbpSpec, KilledDriftSpec>;

/// State space of the family (Levy/pssMp: R; Csbp: (0,inf) or [0,inf);
/// KilledDrift: its domain interval).
Interval state_space(const ProcessSpec& spec);

std::string family_name(const ProcessSpec& spec);

/// Validates family-specific invariants and throws ValidationError on
/// failure. For Csbp this runs the 1/psi tail-integral dichotomy check.
void validate_spec(const ProcessSpec& spec);

/// Numerical proxy for int^inf 1/psi: log-grid integral over
/// [psi^{-1}(0)+1, 1e9].
double psi_reciprocal_integral_proxy(const LevyTriplet& t);

/// Dichotomy behind the two Csbp variants: true when int^inf 1/psi diverges
/// (Recurrent), decided by the growth of the log-grid integral between
/// Z = 1e6 and Z = 1e9.
bool psi_reciprocal_integral_diverges(const LevyTriplet& t);

}  // namespace passage
