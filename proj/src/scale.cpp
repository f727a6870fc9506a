// SPDX-License-Identifier: Apache-2.0
#include "passage/scale.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include "passage/quadrature.hpp"

namespace passage {

namespace {

constexpr double kLogFloor = -745.0;  // exp underflows to 0 below this

double third_derivative(const LevyTriplet& t, double z) {
    return t.jumps.laplace_term_d3(z);
}

// Polish a root of psi(z) = q to sub-ulp accuracy; psi_inverse's own
// tolerance (1e-12 relative) is too loose for the singular CSBP integrands.
double polish_root(const LevyTriplet& t, double q, double z) {
    for (int i = 0; i < 80; ++i) {
        const double v = eval_psi(t, z) - q;
        if (v == 0.0) break;
        const double d = z > 0.0 ? eval_psi_prime(t, z) : 0.0;
        if (!(d > 0.0)) break;  // critical root: Newton cannot improve
        const double step = v / d;
        const double znext = z - step;
        if (znext == z || !(znext >= 0.0)) break;
        z = znext;
        if (std::abs(step) <= 2.0 * std::abs(z) * 1e-17) break;
    }
    return z;
}

}  // namespace

SeriesGrowth series_growth(const ScaleSeries& s) {
    SeriesGrowth g{std::numeric_limits<double>::infinity(), 0.0};
    for (int k = std::max(1, s.K / 2); k <= s.K; ++k) {
        const double ratio = s.coeffs[k] / s.coeffs[k - 1];
        g.min_ratio_k2 = std::min(g.min_ratio_k2, ratio * k * k);
        g.max_ratio_k = std::max(g.max_ratio_k, ratio * k);
    }
    return g;
}

ScaleEval scale_levy(const LevySpec& spec, double q, double x) {
    if (q < 0.0) throw std::domain_error("scale_levy: q must be >= 0");
    const PsiInverseResult root = psi_inverse(spec.triplet, spec.triplet.p + q);
    ScaleEval out;
    out.log_value = -root.z * x;
    out.value = std::exp(out.log_value);
    const double slope = root.z > 0.0 ? eval_psi_prime(spec.triplet, root.z)
                                      : std::max(1.0, spec.triplet.sigma2);
    const double z_err = slope > 0.0 ? root.residual / slope : root.residual;
    out.abs_error_bound = std::abs(x) * out.value * z_err;
    out.terms_or_nodes = root.iterations;
    return out;
}

ScaleSeries pssmp_coefficients(const PssmpSpec& spec, int K) {
    if (K < 1) throw std::domain_error("pssmp_coefficients: K must be >= 1");
    const LevyTriplet& t = spec.triplet;
    const double z0 = polish_root(t, t.p, psi_inverse(t, t.p).z);
    ScaleSeries s;
    s.z0 = z0;
    s.alpha = spec.alpha;
    s.K = K;
    s.coeffs.resize(K + 1);
    s.coeffs[0] = 1.0;
    double a = 1.0;
    for (int l = 1; l <= K; ++l) {
        const double factor = eval_psi(t, z0 + l * spec.alpha) - t.p;
        if (!(factor > 0.0)) {
            std::ostringstream os;
            os << "pssmp_coefficients: nonpositive factor psi(z0 + " << l
               << " alpha) - p = " << factor << " (degenerate spec)";
            throw ValidationError(os.str());
        }
        a /= factor;
        s.coeffs[l] = a;
    }
    return s;
}

ScaleEval scale_pssmp(const PssmpSpec& spec, double q, double x) {
    if (q < 0.0) throw std::domain_error("scale_pssmp: q must be >= 0");
    const LevyTriplet& t = spec.triplet;
    const double z0 = polish_root(t, t.p, psi_inverse(t, t.p).z);
    ScaleEval out;
    if (q == 0.0) {
        out.log_value = -z0 * x;
        out.value = std::exp(out.log_value);
        out.terms_or_nodes = 1;
        return out;
    }
    const double decay = std::exp(-spec.alpha * x);
    double term = std::exp(-z0 * x);  // k = 0
    double sum = term;
    double prev_term = term;
    int k = 0;
    double tail_bound = std::numeric_limits<double>::infinity();
    while (true) {
        ++k;
        if (k > 100000) {
            throw NumericalError("scale_pssmp: series did not reach the truncation rule");
        }
        const double factor = eval_psi(t, z0 + k * spec.alpha) - t.p;
        if (!(factor > 0.0)) throw ValidationError("scale_pssmp: degenerate spec");
        prev_term = term;
        term *= q * decay / factor;
        sum += term;
        if (!std::isfinite(sum)) throw NumericalError("scale_pssmp: series overflow");
        const double r = term / prev_term;
        if (r < 1.0 && term <= 1e-16 * sum) {
            tail_bound = term * r / (1.0 - r);
            if (tail_bound <= 1e-12 * sum) break;
        }
    }
    out.value = sum;
    out.log_value = std::log(sum);
    out.abs_error_bound = tail_bound + 1e-16 * sum * k;
    out.terms_or_nodes = k + 1;
    return out;
}

// ---------------------------------------------------------------------------
// CSBP engine
// ---------------------------------------------------------------------------

CsbpScaleEngine::CsbpScaleEngine(const CsbpSpec& spec) : spec_(spec) {
    const LevyTriplet& t = spec_.triplet;
    require_valid_triplet(t);
    z0_ = polish_root(t, t.p, psi_inverse(t, t.p).z);
    p_hat_ = eval_psi(t, z0_);
    g1_ = z0_ > 0.0 ? eval_psi_prime(t, z0_)
                    : (-t.gamma + t.jumps.compensator_below_one() + t.jumps.laplace_term_d1(0.0));
    g2_ = eval_psi_second(t, z0_);
    g3_ = third_derivative(t, z0_);
    const double h_char = std::max({1.0, spec_.theta - z0_, z0_});
    critical_ = !(g1_ > 1e-8 * std::max(1.0, g2_ * h_char));

    if (critical_) {
        // Integrand dies like exp(-2q/(g2 h)) at the root; a fixed depth
        // covers every q >= 1e-8 at double precision.
        u_lo_ = -34.0 - std::log(std::max(g2_, 1e-6));
    } else {
        const double h_cap = g2_ > 0.0 ? 0.05 * g1_ / g2_ : 1e-7 * h_char;
        u_lo_ = std::log(std::min(1e-7 * h_char, h_cap));
    }
    u_hi_ = std::log(1e8 * h_char);
    du_ = 0.0025;
    const int n = static_cast<int>(std::ceil((u_hi_ - u_lo_) / du_)) + 1;

    knot_u_.resize(n);
    knot_s_.resize(n);
    knot_logd_.resize(n);
    std::vector<double> increments(n, 0.0);
    for (int j = 0; j < n; ++j) {
        knot_u_[j] = u_lo_ + du_ * j;
        const double d = divided_difference(std::exp(knot_u_[j]));
        knot_s_[j] = 1.0 / d;
        knot_logd_[j] = std::log(d);
    }
    auto integrand = [this](double u) { return 1.0 / divided_difference(std::exp(u)); };
    for (int j = 0; j + 1 < n; ++j) {
        increments[j] = gk15_panel(integrand, knot_u_[j], knot_u_[j + 1]).value;
    }
    // Anchor A = 0 at the top knot and accumulate downward so that values in
    // the mass-carrying region keep full relative precision.
    knot_a_.assign(n, 0.0);
    for (int j = n - 2; j >= 0; --j) knot_a_[j] = knot_a_[j + 1] - increments[j];

    // Interpolation audit: Hermite against direct quadrature at midpoints.
    for (int j = 0; j + 1 < n; j += 97) {
        const double um = knot_u_[j] + 0.5 * du_;
        const double direct = knot_a_[j] + gk15_panel(integrand, knot_u_[j], um).value;
        interp_error_ = std::max(interp_error_, std::abs(interp_a(um) - direct));
    }

    // Convergent tail beyond the table for extinct specs, via w = 1/z.
    const double z_top = z0_ + std::exp(u_hi_);
    auto tail_fn = [&t, this](double w) {
        const double z = 1.0 / w;
        return 1.0 / (w * w * (eval_psi(t, z) - p_hat_));
    };
    if (spec_.variant == CsbpVariant::Extinct) {
        QuadResult tail = integrate_adaptive(tail_fn, 0.0, 1.0 / z_top, 1e-16, 1e-11);
        if (!tail.converged) throw NumericalError("csbp engine: tail integral did not converge");
        tail_j_ = tail.value;
    }
    a_total_ = tail_j_;
}

double CsbpScaleEngine::divided_difference(double h) const {
    const double h_taylor = 1e-6 * std::max(1.0, z0_);
    if (h < h_taylor) {
        return g1_ + h * (0.5 * g2_ + h * g3_ / 6.0);
    }
    return (eval_psi(spec_.triplet, z0_ + h) - p_hat_) / h;
}

double CsbpScaleEngine::interp_a(double u) const {
    if (u <= u_lo_) {
        if (critical_) {
            // asymptote A ~ -(2/g2) e^{-u}; only reached where the integrand
            // has already underflowed
            return knot_a_.front() - (2.0 / g2_) * (std::exp(-u) - std::exp(-u_lo_));
        }
        return knot_a_.front() + (u - u_lo_) / g1_;
    }
    const int last = static_cast<int>(knot_u_.size()) - 1;
    if (u >= knot_u_[last]) return knot_a_[last];
    const int j = std::min(last - 1, static_cast<int>((u - u_lo_) / du_));
    const double s = (u - knot_u_[j]) / du_;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * knot_a_[j] + h10 * du_ * knot_s_[j] + h01 * knot_a_[j + 1] +
           h11 * du_ * knot_s_[j + 1];
}

double CsbpScaleEngine::inner_integral(double z) const {
    if (!(z > z0_)) return -std::numeric_limits<double>::infinity();
    return interp_a(std::log(z - z0_));
}

double CsbpScaleEngine::tail_integral(double z) const {
    return a_total_ - inner_integral(z);
}

// expr_kind: 0 = XPrefactor (jacobian term u), 1 = ReciprocalWeight,
// 2 = extinct (ReciprocalWeight with A referenced to a_total_).
double CsbpScaleEngine::exponent(int expr_kind, double q, double x, double a_ref,
                                 double u) const {
    const double h = std::exp(u);
    double f = -x * (z0_ + h) + q * (interp_a(u) - a_ref);
    if (expr_kind == 0) {
        f += u;
    } else {
        f -= std::log(divided_difference(h));
    }
    return f;
}

ScaleEval CsbpScaleEngine::evaluate(CsbpExpression expr, bool extinct, double q,
                                    double x) const {
    const int expr_kind = extinct ? 2 : (expr == CsbpExpression::XPrefactor ? 0 : 1);
    if (extinct && !(q > 0.0)) {
        throw std::domain_error("csbp extinct scale: q must be > 0");
    }
    if (!extinct && expr_kind == 1 && !(q > 0.0)) {
        throw std::domain_error("csbp recurrent first expression: q must be > 0");
    }
    ScaleEval out;
    if (q == 0.0) {
        // x int_{z0}^inf e^{-xz} dz = e^{-x z0}
        out.log_value = -x * z0_;
        out.value = std::exp(out.log_value);
        out.terms_or_nodes = 0;
        return out;
    }
    if (extinct && x == 0.0) {
        // substitution w = tail integral turns the integrand into e^{-qw}
        out.log_value = -std::log(q);
        out.value = 1.0 / q;
        out.terms_or_nodes = 0;
        return out;
    }
    if (!(x > 4e-7)) {
        throw NumericalError("csbp scale: x below supported range");
    }

    const double a_ref = extinct ? a_total_ : interp_a(std::log(spec_.theta - z0_));

    // Scan the knot grid for the peak and the support of the integrand.
    const int n = static_cast<int>(knot_u_.size());
    double f_max = -std::numeric_limits<double>::infinity();
    int j_peak = 0;
    std::vector<double> f_knots(n);
    for (int j = 0; j < n; ++j) {
        const double h = std::exp(knot_u_[j]);
        double f = -x * (z0_ + h) + q * (knot_a_[j] - a_ref);
        f += (expr_kind == 0) ? knot_u_[j] : -knot_logd_[j];
        f_knots[j] = f;
        if (f > f_max) {
            f_max = f;
            j_peak = j;
        }
    }
    int j_a = j_peak, j_b = j_peak;
    while (j_a > 0 && f_knots[j_a] > f_max + kLogFloor) --j_a;
    while (j_b < n - 1 && f_knots[j_b] > f_max + kLogFloor) ++j_b;
    if (j_b == n - 1 && f_knots[j_b] > f_max + kLogFloor) {
        throw NumericalError("csbp scale: integrand support exceeds the table (x too small)");
    }

    auto scaled = [&](double u) { return std::exp(exponent(expr_kind, q, x, a_ref, u) - f_max); };
    QuadResult quad =
        integrate_adaptive(scaled, knot_u_[j_a], knot_u_[j_b], 1e-280, 1e-11, 6000);
    if (!quad.converged) throw NumericalError("csbp scale: outer quadrature did not converge");

    double total = quad.value;
    double err = quad.abs_error;

    if (j_a == 0 && !critical_) {
        // Closed-form continuation below the table where (psi - p)/h is
        // constant to machine precision: exponent is beta*(u - u_lo) plus an
        // O(h) correction handled to first order.
        const double beta = q / g1_ + (expr_kind == 0 ? 1.0 : 0.0);
        const double h_lo = std::exp(u_lo_);
        double c1 = -x - q * g2_ / (2.0 * g1_ * g1_);
        if (expr_kind != 0) c1 -= g2_ / (2.0 * g1_);
        const double factor = 1.0 / beta - c1 * h_lo / (beta * (beta + 1.0));
        const double f_lo = exponent(expr_kind, q, x, a_ref, u_lo_);
        const double piece = std::exp(f_lo - f_max) * factor;
        total += piece;
        err += std::abs(piece) * (c1 * h_lo) * (c1 * h_lo);
    }

    if (!(total > 0.0)) throw NumericalError("csbp scale: vanishing integral");
    out.log_value = f_max + std::log(total);
    if (expr_kind == 0) out.log_value += std::log(x);
    out.value = std::exp(out.log_value);
    out.terms_or_nodes = quad.evaluations;
    out.abs_error_bound =
        out.value * (err / total + q * interp_error_ + 1e-13);
    return out;
}

const CsbpScaleEngine& csbp_engine(const CsbpSpec& spec) {
    static std::shared_mutex mutex;
    static std::map<std::string, std::unique_ptr<CsbpScaleEngine>> cache;

    char key[512];
    std::string jumps;
    for (const auto& c : spec.triplet.jumps.exp_components()) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "e%.17g,%.17g;", c.rate, c.scale);
        jumps += buf;
    }
    for (const auto& c : spec.triplet.jumps.atom_components()) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "a%.17g,%.17g;", c.rate, c.size);
        jumps += buf;
    }
    std::snprintf(key, sizeof key, "%.17g|%.17g|%.17g|%d|%.17g|%s", spec.triplet.gamma,
                  spec.triplet.sigma2, spec.triplet.p, spec.variant == CsbpVariant::Extinct,
                  spec.theta, jumps.c_str());
    {
        std::shared_lock lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
    }
    auto engine = std::make_unique<CsbpScaleEngine>(spec);
    std::unique_lock lock(mutex);
    auto [it, inserted] = cache.emplace(key, std::move(engine));
    return *it->second;
}

ScaleEval scale_csbp_recurrent(const CsbpSpec& spec, double q, double x, CsbpExpression expr) {
    if (spec.variant != CsbpVariant::Recurrent) {
        throw ValidationError("scale_csbp_recurrent: spec variant is extinct");
    }
    if (q < 0.0) throw std::domain_error("scale_csbp_recurrent: q must be >= 0");
    if (!(x > 0.0)) throw std::domain_error("scale_csbp_recurrent: x must be > 0");
    return csbp_engine(spec).evaluate(expr, /*extinct=*/false, q, x);
}

ScaleEval scale_csbp_extinct(const CsbpSpec& spec, double q, double x) {
    if (spec.variant != CsbpVariant::Extinct) {
        throw ValidationError("scale_csbp_extinct: spec variant is recurrent");
    }
    if (!(q > 0.0)) throw std::domain_error("scale_csbp_extinct: q must be > 0");
    if (!(x >= 0.0)) throw std::domain_error("scale_csbp_extinct: x must be >= 0");
    return csbp_engine(spec).evaluate(CsbpExpression::ReciprocalWeight, /*extinct=*/true, q, x);
}

ScaleEval scale_killed_drift(const KilledDriftSpec& spec, double q, double x) {
    if (!spec.domain.contains(x)) throw std::domain_error("scale_killed_drift: x outside domain");
    if (q < 0.0) throw std::domain_error("scale_killed_drift: q must be >= 0");
    ScaleEval out;
    out.log_value = -spec.kill_integral(spec.theta, x) - q * spec.clock(x);
    out.value = std::exp(out.log_value);
    out.abs_error_bound = out.value * 1e-14;
    out.terms_or_nodes = 1;
    return out;
}

namespace {

ScaleEval scale_dispatch(const ProcessSpec& spec, double q, double y) {
    return std::visit(
        [&](const auto& s) -> ScaleEval {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec>) {
                return scale_levy(s, q, y);
            } else if constexpr (std::is_same_v<T, PssmpSpec>) {
                return scale_pssmp(s, q, y);
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                if (s.variant == CsbpVariant::Recurrent || q == 0.0) {
                    // at q = 0 both variants share the x-prefactor display
                    return csbp_engine(s).evaluate(CsbpExpression::XPrefactor, false, q, y);
                }
                return scale_csbp_extinct(s, q, y);
            } else {
                return scale_killed_drift(s, q, y);
            }
        },
        spec);
}

}  // namespace

TransformResult first_passage_transform_detailed(const ProcessSpec& spec, double q, double x,
                                                 double l) {
    if (l > x) throw std::domain_error("first_passage_transform: requires l <= x");
    if (q < 0.0) throw std::domain_error("first_passage_transform: q must be >= 0");
    const Interval space = state_space(spec);
    if (!space.contains(x) || !space.contains(l)) {
        throw std::domain_error("first_passage_transform: level outside the state space");
    }
    if (x == l) return {1.0, 0.0};
    if (const auto* kd = std::get_if<KilledDriftSpec>(&spec)) {
        // ratio form is exact for this family
        const double log_ratio =
            -kd->kill_integral(l, x) - q * (kd->clock(x) - kd->clock(l));
        return {std::exp(log_ratio), std::exp(log_ratio) * 1e-14};
    }
    const ScaleEval num = scale_dispatch(spec, q, x);
    const ScaleEval den = scale_dispatch(spec, q, l);
    const double value = std::exp(num.log_value - den.log_value);
    const double rel =
        (num.value > 0.0 ? num.abs_error_bound / num.value : 0.0) +
        (den.value > 0.0 ? den.abs_error_bound / den.value : 0.0);
    return {value, value * rel};
}

double first_passage_transform(const ProcessSpec& spec, double q, double x, double l) {
    return first_passage_transform_detailed(spec, q, x, l).value;
}

}  // namespace passage
