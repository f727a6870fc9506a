// SPDX-License-Identifier: Apache-2.0
#include "passage/exponent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace passage {

JumpMeasure JumpMeasure::exp_mixture(std::vector<ExpJumpComponent> components) {
    for (const auto& c : components) {
        if (!(c.rate > 0.0) || !(c.scale > 0.0)) {
            throw ValidationError("exp mixture component needs rate > 0 and scale > 0");
        }
    }
    JumpMeasure m;
    m.exp_ = std::move(components);
    return m;
}

JumpMeasure JumpMeasure::atoms(std::vector<AtomJumpComponent> components) {
    for (const auto& c : components) {
        if (!(c.rate > 0.0) || !(c.size > 0.0)) {
            throw ValidationError("atom component needs rate > 0 and size > 0");
        }
    }
    JumpMeasure m;
    m.atoms_ = std::move(components);
    return m;
}

double JumpMeasure::total_rate() const {
    double r = 0.0;
    for (const auto& c : exp_) r += c.rate;
    for (const auto& c : atoms_) r += c.rate;
    return r;
}

double JumpMeasure::compensator_below_one() const {
    double s = 0.0;
    for (const auto& c : exp_) {
        // int_0^1 h rho e^{-rho h} dh = (1 - e^{-rho})/rho - e^{-rho}
        s += c.rate * ((1.0 - std::exp(-c.scale)) / c.scale - std::exp(-c.scale));
    }
    for (const auto& c : atoms_) {
        if (c.size <= 1.0) s += c.rate * c.size;
    }
    return s;
}

double JumpMeasure::laplace_term(double z) const {
    double s = 0.0;
    for (const auto& c : exp_) s += -c.rate * z / (c.scale + z);
    for (const auto& c : atoms_) s += c.rate * std::expm1(-z * c.size);
    return s;
}

double JumpMeasure::laplace_term_d1(double z) const {
    double s = 0.0;
    for (const auto& c : exp_) {
        const double d = c.scale + z;
        s += -c.rate * c.scale / (d * d);
    }
    for (const auto& c : atoms_) s += -c.rate * c.size * std::exp(-z * c.size);
    return s;
}

double JumpMeasure::laplace_term_d2(double z) const {
    double s = 0.0;
    for (const auto& c : exp_) {
        const double d = c.scale + z;
        s += 2.0 * c.rate * c.scale / (d * d * d);
    }
    for (const auto& c : atoms_) s += c.rate * c.size * c.size * std::exp(-z * c.size);
    return s;
}

double JumpMeasure::laplace_term_d3(double z) const {
    double s = 0.0;
    for (const auto& c : exp_) {
        const double d = c.scale + z;
        s += -6.0 * c.rate * c.scale / (d * d * d * d);
    }
    for (const auto& c : atoms_) {
        s += -c.rate * c.size * c.size * c.size * std::exp(-z * c.size);
    }
    return s;
}

double JumpMeasure::mean_jump() const {
    double s = 0.0;
    for (const auto& c : exp_) s += c.rate / c.scale;
    for (const auto& c : atoms_) s += c.rate * c.size;
    return s;
}

namespace {

void check_fields(const LevyTriplet& t) {
    if (!(t.sigma2 >= 0.0) || !(t.p >= 0.0) || !std::isfinite(t.gamma)) {
        throw ValidationError("invalid Levy triplet fields (sigma2 >= 0, p >= 0 required)");
    }
}

}  // namespace

double eval_psi(const LevyTriplet& t, double z) {
    if (z < 0.0) throw std::domain_error("eval_psi: z must be >= 0");
    check_fields(t);
    const double comp = t.jumps.compensator_below_one();
    return -t.gamma * z + 0.5 * t.sigma2 * z * z + z * comp + t.jumps.laplace_term(z);
}

double eval_psi_prime(const LevyTriplet& t, double z) {
    if (z <= 0.0) throw std::domain_error("eval_psi_prime: z must be > 0");
    check_fields(t);
    const double comp = t.jumps.compensator_below_one();
    return -t.gamma + t.sigma2 * z + comp + t.jumps.laplace_term_d1(z);
}

double eval_psi_second(const LevyTriplet& t, double z) {
    return t.sigma2 + t.jumps.laplace_term_d2(z);
}

namespace {

// psi'(0+) exists for finite-activity measures: -gamma + comp + d1(0).
double psi_prime_at_zero(const LevyTriplet& t) {
    return -t.gamma + t.jumps.compensator_below_one() + t.jumps.laplace_term_d1(0.0);
}

}  // namespace

TripletDiagnostics validate_triplet(const LevyTriplet& t) {
    TripletDiagnostics d;
    if (!(t.sigma2 >= 0.0)) d.reasons.push_back("sigma2 must be >= 0");
    if (!(t.p >= 0.0)) d.reasons.push_back("killing rate p must be >= 0");
    if (!std::isfinite(t.gamma)) d.reasons.push_back("gamma must be finite");
    if (!d.reasons.empty()) return d;

    // Subordinator heuristic: psi nonincreasing on [0, 1e6] means monotone
    // paths (no Gaussian part, nonnegative net drift) and no downward passage.
    const int kGridPoints = 256;
    bool increases = false;
    double prev = 0.0;  // psi(0) = 0 exactly
    for (int i = 1; i <= kGridPoints; ++i) {
        const double z = 1e6 * std::pow(10.0, -8.0 * (1.0 - double(i) / kGridPoints));
        const double v = eval_psi(t, z);
        if (v > prev) {
            increases = true;
            break;
        }
        prev = v;
    }
    if (!increases) {
        std::ostringstream os;
        os << "triplet defines a subordinator (psi nonincreasing on [0, 1e6]; "
           << "sigma2=" << t.sigma2 << ", path drift=" << t.path_drift() << ")";
        d.reasons.push_back(os.str());
        return d;
    }
    d.pass = true;
    return d;
}

void require_valid_triplet(const LevyTriplet& t) {
    TripletDiagnostics d = validate_triplet(t);
    if (!d.pass) {
        std::string msg = "invalid Levy triplet:";
        for (const auto& r : d.reasons) msg += " " + r + ";";
        throw ValidationError(msg);
    }
}

double psi_argmin(const LevyTriplet& t) {
    if (psi_prime_at_zero(t) >= 0.0) return 0.0;
    // psi' is increasing (psi convex); bracket the root and bisect.
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (eval_psi_prime(t, hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 200) throw NumericalError("psi_argmin: psi' stays negative (subordinator?)");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (eval_psi_prime(t, mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

PsiInverseResult psi_inverse(const LevyTriplet& t, double q) {
    if (q < 0.0) throw std::domain_error("psi_inverse: q must be >= 0");
    PsiInverseResult res;
    if (q == 0.0 && psi_prime_at_zero(t) >= 0.0) {
        // psi >= 0 with largest root exactly at the origin
        return res;
    }
    const double zstar = psi_argmin(t);

    // Bracket [lo, hi] with psi(lo) <= q < psi(hi); the root past the
    // minimizer is the largest one.
    double lo = zstar;
    double hi = std::max(1.0, 2.0 * zstar);
    int guard = 0;
    while (eval_psi(t, hi) <= q) {
        hi *= 2.0;
        if (++guard > 200) {
            throw NumericalError("psi_inverse: bracket expansion failed after 200 doublings");
        }
    }
    if (eval_psi(t, lo) > q) {
        // q below the minimum cannot happen for q >= 0 and valid triplets,
        // except through rounding at q == min; collapse to the minimizer.
        res.z = zstar;
        res.residual = std::abs(eval_psi(t, zstar) - q);
        return res;
    }

    const double tol = 1e-12 * std::max(1.0, q);
    double z = 0.5 * (lo + hi);
    int it = 0;
    for (; it < 300; ++it) {
        const double v = eval_psi(t, z) - q;
        if (std::abs(v) <= tol) break;
        (v < 0.0 ? lo : hi) = z;
        double znext = z;
        const double der = z > 0.0 ? eval_psi_prime(t, z) : psi_prime_at_zero(t);
        if (der > 0.0) znext = z - v / der;  // Newton step
        if (!(znext > lo && znext < hi)) znext = 0.5 * (lo + hi);
        if (znext == z) break;
        z = znext;
    }
    res.z = std::max(z, 0.0);
    res.residual = std::abs(eval_psi(t, res.z) - q);
    res.iterations = it;
    if (res.residual > 1e-9 * std::max(1.0, q)) {
        throw NumericalError("psi_inverse: did not converge");
    }
    return res;
}

}  // namespace passage
