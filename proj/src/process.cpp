// SPDX-License-Identifier: Apache-2.0
#include "passage/process.hpp"

#include <cmath>
#include <limits>

#include "passage/quadrature.hpp"

namespace passage {

double ParametricFn::operator()(double a) const {
    switch (kind) {
        case Kind::Constant: return c0;
        case Kind::Affine: return c0 + c1 * a;
        case Kind::Power: return c0 * std::pow(a, c1);
    }
    return c0;
}

namespace {

// Antiderivative of a^j / v(a) for integer j >= 0; used for the killing
// integral after decomposing omega into power terms.
double power_over_speed_antiderivative(const ParametricFn& v, double j, double a) {
    switch (v.kind) {
        case ParametricFn::Kind::Constant:
            return std::pow(a, j + 1.0) / ((j + 1.0) * v.c0);
        case ParametricFn::Kind::Power: {
            const double e = j - v.c1;
            if (std::abs(e + 1.0) < 1e-14) return std::log(a) / v.c0;
            return std::pow(a, e + 1.0) / ((e + 1.0) * v.c0);
        }
        case ParametricFn::Kind::Affine: {
            const double u = v.c0 + v.c1 * a;
            if (v.c1 == 0.0) return std::pow(a, j + 1.0) / ((j + 1.0) * v.c0);
            if (j == 0.0) return std::log(u) / v.c1;
            if (j == 1.0) return a / v.c1 - v.c0 * std::log(u) / (v.c1 * v.c1);
            return std::numeric_limits<double>::quiet_NaN();  // caller falls back
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// omega decomposed as sum of coef * a^exponent terms (at most two).
struct PowerTerm {
    double coef, exponent;
};

int decompose(const ParametricFn& f, PowerTerm out[2]) {
    switch (f.kind) {
        case ParametricFn::Kind::Constant:
            out[0] = {f.c0, 0.0};
            return f.c0 == 0.0 ? 0 : 1;
        case ParametricFn::Kind::Affine: {
            int n = 0;
            if (f.c0 != 0.0) out[n++] = {f.c0, 0.0};
            if (f.c1 != 0.0) out[n++] = {f.c1, 1.0};
            return n;
        }
        case ParametricFn::Kind::Power:
            out[0] = {f.c0, f.c1};
            return f.c0 == 0.0 ? 0 : 1;
    }
    return 0;
}

}  // namespace

double KilledDriftSpec::clock(double a) const {
    switch (speed.kind) {
        case ParametricFn::Kind::Constant: return (a - theta) / speed.c0;
        case ParametricFn::Kind::Affine:
            if (speed.c1 == 0.0) return (a - theta) / speed.c0;
            return std::log((speed.c0 + speed.c1 * a) / (speed.c0 + speed.c1 * theta)) / speed.c1;
        case ParametricFn::Kind::Power: {
            if (std::abs(speed.c1 - 1.0) < 1e-14) return std::log(a / theta) / speed.c0;
            const double e = 1.0 - speed.c1;
            return (std::pow(a, e) - std::pow(theta, e)) / (speed.c0 * e);
        }
    }
    return 0.0;
}

double KilledDriftSpec::clock_inverse(double t) const {
    switch (speed.kind) {
        case ParametricFn::Kind::Constant: return theta + speed.c0 * t;
        case ParametricFn::Kind::Affine: {
            if (speed.c1 == 0.0) return theta + speed.c0 * t;
            return ((speed.c0 + speed.c1 * theta) * std::exp(speed.c1 * t) - speed.c0) / speed.c1;
        }
        case ParametricFn::Kind::Power: {
            if (std::abs(speed.c1 - 1.0) < 1e-14) return theta * std::exp(speed.c0 * t);
            const double e = 1.0 - speed.c1;
            return std::pow(std::pow(theta, e) + speed.c0 * e * t, 1.0 / e);
        }
    }
    return theta;
}

double KilledDriftSpec::kill_integral(double l, double x) const {
    PowerTerm terms[2];
    const int n = decompose(kill_rate, terms);
    double total = 0.0;
    bool closed_form = true;
    for (int i = 0; i < n; ++i) {
        const double upper =
            terms[i].coef * power_over_speed_antiderivative(speed, terms[i].exponent, x);
        const double lower =
            terms[i].coef * power_over_speed_antiderivative(speed, terms[i].exponent, l);
        if (std::isnan(upper) || std::isnan(lower)) {
            closed_form = false;
            break;
        }
        total += upper - lower;
    }
    if (closed_form) return total;
    auto integrand = [this](double a) { return kill_rate(a) / speed(a); };
    QuadResult q = integrate_adaptive(integrand, l, x, 1e-15, 1e-13);
    if (!q.converged) throw NumericalError("killed-drift kill integral did not converge");
    return q.value;
}

Interval state_space(const ProcessSpec& spec) {
    return std::visit(
        [](const auto& s) -> Interval {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec> || std::is_same_v<T, PssmpSpec>) {
                return Interval{};
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                const double inf = std::numeric_limits<double>::infinity();
                if (s.variant == CsbpVariant::Recurrent) return Interval{0.0, inf};
                // 0 belongs to the extinct state space; widen lo past it.
                return Interval{-1e-300, inf};
            } else {
                return s.domain;
            }
        },
        spec);
}

std::string family_name(const ProcessSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec>) return "levy";
            if constexpr (std::is_same_v<T, PssmpSpec>) return "pssmp";
            if constexpr (std::is_same_v<T, CsbpSpec>) {
                return s.variant == CsbpVariant::Recurrent ? "csbp_recurrent" : "csbp_extinct";
            }
            return "killed_drift";
        },
        spec);
}

namespace {

// log-grid trapezoid of int 1/psi = int z/psi(z) d(log z) over [z_lo, z_hi]
double reciprocal_psi_integral(const LevyTriplet& t, double z_lo, double z_hi) {
    const int n = 600;
    const double du = std::log(z_hi / z_lo) / n;
    double total = 0.0;
    double prev = z_lo / eval_psi(t, z_lo);
    for (int i = 1; i <= n; ++i) {
        const double z = z_lo * std::exp(du * i);
        const double cur = z / eval_psi(t, z);
        total += 0.5 * (prev + cur) * du;
        prev = cur;
        if (total > 1e4) break;  // clearly divergent
    }
    return total;
}

}  // namespace

double psi_reciprocal_integral_proxy(const LevyTriplet& t) {
    const double z_lo = psi_inverse(t, 0.0).z + 1.0;
    return reciprocal_psi_integral(t, z_lo, 1e9);
}

bool psi_reciprocal_integral_diverges(const LevyTriplet& t) {
    const double z_lo = psi_inverse(t, 0.0).z + 1.0;
    const double to_mid = reciprocal_psi_integral(t, z_lo, 1e6);
    const double to_top = reciprocal_psi_integral(t, z_lo, 1e9);
    // Divergent integrals keep growing with the cutoff (logarithmically for
    // linear psi); convergent ones have saturated long before 1e6.
    return to_top >= 1e3 || to_top - to_mid > 1e-3;
}

void validate_spec(const ProcessSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec>) {
                require_valid_triplet(s.triplet);
            } else if constexpr (std::is_same_v<T, PssmpSpec>) {
                require_valid_triplet(s.triplet);
                if (!(s.alpha > 0.0)) throw ValidationError("pssmp: alpha must be > 0");
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                require_valid_triplet(s.triplet);
                const double z0 = psi_inverse(s.triplet, s.triplet.p).z;
                const bool diverges = psi_reciprocal_integral_diverges(s.triplet);
                if (s.variant == CsbpVariant::Recurrent) {
                    if (!diverges) {
                        throw ValidationError(
                            "csbp recurrent: int^inf 1/psi converges; use the extinct variant");
                    }
                    if (!(s.theta > z0)) {
                        throw ValidationError("csbp recurrent: theta must exceed psi^{-1}(p)");
                    }
                } else {
                    if (diverges) {
                        throw ValidationError(
                            "csbp extinct: int^inf 1/psi diverges; use the recurrent variant");
                    }
                }
            } else {
                const KilledDriftSpec& kd = s;
                if (!(kd.domain.lo < kd.domain.hi)) throw ValidationError("killed drift: empty domain");
                if (!kd.domain.contains(kd.theta)) {
                    throw ValidationError("killed drift: theta must lie in the domain");
                }
                // int_{inf I}^x 1/v must diverge so every level is reached.
                switch (kd.speed.kind) {
                    case ParametricFn::Kind::Constant:
                        if (!(kd.speed.c0 > 0.0)) throw ValidationError("killed drift: v must be > 0");
                        if (std::isfinite(kd.domain.lo)) {
                            throw ValidationError(
                                "killed drift: constant speed needs a domain unbounded below");
                        }
                        break;
                    case ParametricFn::Kind::Affine: {
                        if (kd.speed.c1 <= 0.0) {
                            throw ValidationError(
                                "killed drift: affine speed needs positive slope");
                        }
                        const double root = -kd.speed.c0 / kd.speed.c1;
                        if (!std::isfinite(kd.domain.lo) ||
                            std::abs(kd.domain.lo - root) > 1e-12 * std::max(1.0, std::abs(root))) {
                            throw ValidationError(
                                "killed drift: affine speed requires domain.lo at its zero");
                        }
                        break;
                    }
                    case ParametricFn::Kind::Power:
                        if (!(kd.speed.c0 > 0.0)) throw ValidationError("killed drift: v must be > 0");
                        if (kd.speed.c1 < 1.0) {
                            throw ValidationError(
                                "killed drift: power speed needs exponent >= 1 for 1/v to diverge");
                        }
                        if (std::abs(kd.domain.lo) > 0.0) {
                            throw ValidationError("killed drift: power speed requires domain (0, hi)");
                        }
                        break;
                }
                // omega must be nonnegative on the domain; check the shapes.
                const double probe_lo =
                    std::isfinite(kd.domain.lo) ? std::nextafter(kd.domain.lo, kd.domain.hi) : -1e6;
                const double probe_hi = std::isfinite(kd.domain.hi) ? kd.domain.hi : 1e6;
                if (kd.kill_rate(probe_lo) < 0.0 || kd.kill_rate(probe_hi) < 0.0 ||
                    kd.kill_rate(kd.theta) < 0.0) {
                    throw ValidationError("killed drift: omega must be nonnegative");
                }
            }
        },
        spec);
}

}  // namespace passage
