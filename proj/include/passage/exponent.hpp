// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "passage/errors.hpp"

namespace passage {

/// Exponential jump density lambda * rho * exp(-rho h) on (0, inf).
struct ExpJumpComponent {
    double rate;   // lambda > 0, events per unit time
    double scale;  // rho > 0, inverse jump size
};

/// Jumps of fixed size at a fixed rate.
struct AtomJumpComponent {
    double rate;  // lambda > 0
    double size;  // h > 0
};

/// Finite-activity jump measure: none, a mixture of exponential densities,
/// or a finite list of atoms. All Laplace-transform pieces are closed form.
class JumpMeasure {
  public:
    JumpMeasure() = default;
    static JumpMeasure none() { return JumpMeasure{}; }
    static JumpMeasure exp_mixture(std::vector<ExpJumpComponent> components);
    static JumpMeasure atoms(std::vector<AtomJumpComponent> components);

    bool empty() const { return exp_.empty() && atoms_.empty(); }
    const std::vector<ExpJumpComponent>& exp_components() const { return exp_; }
    const std::vector<AtomJumpComponent>& atom_components() const { return atoms_; }

    /// Total jump intensity (finite by construction).
    double total_rate() const;
    /// Integral of h over (0,1] against the measure (the compensator mass).
    double compensator_below_one() const;
    /// Integral of (e^{-zh} - 1) against the measure, and its z-derivatives.
    double laplace_term(double z) const;
    double laplace_term_d1(double z) const;
    double laplace_term_d2(double z) const;
    double laplace_term_d3(double z) const;
    /// Mean jump size (integral of h over (0, inf)).
    double mean_jump() const;

  private:
    std::vector<ExpJumpComponent> exp_;
    std::vector<AtomJumpComponent> atoms_;
};

/// Characteristics (gamma, sigma^2, m, p) of a possibly killed spectrally
/// positive Levy process. The Laplace exponent kept here satisfies psi(0)=0;
/// killing enters only as psi - p at call sites.
struct LevyTriplet {
    double gamma = 0.0;   // drift coefficient in the exponent convention
    double sigma2 = 0.0;  // Gaussian coefficient, >= 0
    JumpMeasure jumps;
    double p = 0.0;  // killing rate, >= 0

    /// Drift of the sample path once small jumps are de-compensated:
    /// X_t = path_drift * t + sigma W_t + sum of jumps.
    double path_drift() const { return gamma - jumps.compensator_below_one(); }
};

struct TripletDiagnostics {
    bool pass = false;
    std::vector<std::string> reasons;
};

struct PsiInverseResult {
    double z = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

/// psi(z) = -gamma z + sigma^2 z^2 / 2 + int (e^{-zh} + zh 1_{(0,1]}(h) - 1) m(dh).
/// Does not include the killing term -p.
double eval_psi(const LevyTriplet& t, double z);

/// Closed-form derivative of eval_psi. Requires z > 0 (z = 0+ is the limit).
double eval_psi_prime(const LevyTriplet& t, double z);

double eval_psi_second(const LevyTriplet& t, double z);

/// Field invariants plus the subordinator heuristic: fails when the induced
/// psi is nonincreasing on [0, 1e6] (monotone paths admit no downward passage).
TripletDiagnostics validate_triplet(const LevyTriplet& t);

/// Throwing wrapper around validate_triplet for construction sites.
void require_valid_triplet(const LevyTriplet& t);

/// Largest z >= 0 with psi(z) = q (the right-continuous inverse of the
/// convex psi). Bracketed bisection from the minimizer of psi, polished by
/// Newton, to |psi(z) - q| <= 1e-12 * max(1, q).
PsiInverseResult psi_inverse(const LevyTriplet& t, double q);

/// Minimizer of psi on [0, inf): 0 when psi'(0+) >= 0, else the root of psi'.
double psi_argmin(const LevyTriplet& t);

}  // namespace passage
