// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "passage/process.hpp"

namespace passage {

/// One scale-function evaluation. Values are unnormalized (the scale function
/// is only fixed up to a multiplicative constant); cross-family comparisons
/// must use ratios. log_value is kept alongside so ratios of very large or
/// very small values stay representable.
struct ScaleEval {
    double value = 0.0;
    double log_value = 0.0;
    double abs_error_bound = 0.0;
    int terms_or_nodes = 0;
};

/// Precomputed series data for the self-similar family:
/// Phi_q(x) = sum_k a_k q^k exp(-(z0 + alpha k) x).
struct ScaleSeries {
    double z0 = 0.0;
    double alpha = 1.0;
    std::vector<double> coeffs;  // a_0 .. a_K, a_0 == 1
    int K = 0;
};

struct SeriesGrowth {
    double min_ratio_k2 = 0.0;  // min over k in [K/2,K] of a_k k^2 / a_{k-1}
    double max_ratio_k = 0.0;   // max over k in [K/2,K] of k a_k / a_{k-1}
};

SeriesGrowth series_growth(const ScaleSeries& s);

/// Phi_q(x) = exp(-psi^{-1}(p+q) x) for the Levy family.
ScaleEval scale_levy(const LevySpec& spec, double q, double x);

/// a_k = 1 / prod_{l=1..k} (psi(psi^{-1}(p) + l alpha) - p).
ScaleSeries pssmp_coefficients(const PssmpSpec& spec, int K);

/// Series evaluation with a geometric tail bound as the truncation rule.
ScaleEval scale_pssmp(const PssmpSpec& spec, double q, double x);

/// Which of the two equivalent integral displays to evaluate for the
/// recurrent CSBP scale function. They agree up to a factor independent of x.
enum class CsbpExpression {
    XPrefactor,       // x * int exp(-xz + int_theta^z q/(psi-p)) dz
    ReciprocalWeight  // int 1/(psi-p) exp(-xz + int_theta^z q/(psi-p)) dz
};

ScaleEval scale_csbp_recurrent(const CsbpSpec& spec, double q, double x,
                               CsbpExpression expr = CsbpExpression::XPrefactor);

ScaleEval scale_csbp_extinct(const CsbpSpec& spec, double q, double x);

ScaleEval scale_killed_drift(const KilledDriftSpec& spec, double q, double x);

struct TransformResult {
    double value = 0.0;
    double abs_error_bound = 0.0;
};

/// P_x[e^{-q T_l^-}; T_l^- < zeta] = Phi_q(x) / Phi_q(l), dispatched by family.
double first_passage_transform(const ProcessSpec& spec, double q, double x, double l);
TransformResult first_passage_transform_detailed(const ProcessSpec& spec, double q, double x,
                                                 double l);

/// Shared per-spec state for the CSBP integral formulas: the inner integral
/// A(z) ~ int dz'/(psi - p) tabulated once on a log grid around z0 = psi^{-1}(p)
/// and then read concurrently. Exposed for tests.
class CsbpScaleEngine {
  public:
    explicit CsbpScaleEngine(const CsbpSpec& spec);

    double z0() const { return z0_; }
    double slope_at_root() const { return g1_; }
    bool critical() const { return critical_; }
    /// A(z) anchored so that A -> 0 as z -> infinity side of the table.
    double inner_integral(double z) const;
    /// Convergent tail int_z^inf 1/(psi-p); extinct specs only.
    double tail_integral(double z) const;
    double interpolation_error_bound() const { return interp_error_; }

    ScaleEval evaluate(CsbpExpression expr, bool extinct, double q, double x) const;

  private:
    double divided_difference(double h) const;  // (psi(z0+h) - psi(z0)) / h
    double interp_a(double u) const;
    double exponent(int expr_kind, double q, double x, double a_ref, double u) const;

    CsbpSpec spec_;
    double z0_ = 0.0;
    double p_hat_ = 0.0;  // psi(z0), used instead of p to keep (psi - p)/h smooth
    double g1_ = 0.0, g2_ = 0.0, g3_ = 0.0;
    bool critical_ = false;
    double u_lo_ = 0.0, u_hi_ = 0.0, du_ = 0.0;
    std::vector<double> knot_u_, knot_a_, knot_s_, knot_logd_;
    double tail_j_ = 0.0;      // int_{z_top}^inf 1/(psi-p)
    double a_total_ = 0.0;     // tail_j_ (A anchored to 0 at z_top)
    double interp_error_ = 0.0;
};

/// Engine cache keyed by the spec contents; built once, then shared read-only.
const CsbpScaleEngine& csbp_engine(const CsbpSpec& spec);

}  // namespace passage
