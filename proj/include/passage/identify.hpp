// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "passage/scale.hpp"

namespace passage {

struct TransformRow {
    double x = 0.0;
    double l = 0.0;
    double q = 0.0;
    double value = 1.0;  // in (0, 1]
};

/// First-passage transform observations. Rows with q <= q_min are excluded
/// from every fit (transforms trusted only above the threshold Q).
struct TransformGrid {
    std::vector<TransformRow> rows;
    double q_min = -1.0;
};

struct PhiGrid {
    std::vector<std::pair<double, double>> points;  // (q, phi), sorted by q
};

struct PhiFitDiagnostics {
    std::vector<double> q;
    std::vector<double> r_squared;   // of the zero-intercept model, per q
    std::vector<int> gap_count;      // distinct gaps per q
    bool low_confidence = false;     // some q had a single-gap (one-point) fit
    int excluded_rows = 0;           // q <= q_min or x == l
};

struct PhiFit {
    PhiGrid grid;
    PhiFitDiagnostics diagnostics;
};

/// Per q, least-squares slope of -log(value) against the gap x - l through
/// the origin. Throws NumericalError if the fitted phi is not nondecreasing.
PhiFit fit_phi_grid(const TransformGrid& data);

struct LevyFormResult {
    bool is_levy = false;
    double score = 0.0;      // worst-case relative deviation from the affine model
    bool degenerate = false; // fewer than 3 gaps or 3 q values: vacuous
};

/// True iff -log(value) is affine through the origin in the gap, uniformly
/// in q, to 1e-8 relative.
LevyFormResult detect_levy_form(const TransformGrid& data);

enum class TripletHypothesis {
    PureDrift,       // psi(z) = c z, c > 0
    Bm,              // psi(z) = sigma^2 z^2 / 2
    DriftBm,         // psi(z) = -gamma z + sigma^2 z^2 / 2
    DriftBmExpJump,  // DriftBm plus one exponential jump component
};

struct FitResult {
    std::optional<ProcessSpec> fitted;
    double residual = std::numeric_limits<double>::infinity();
    std::map<std::string, double> params;
    bool converged = false;
    int evaluations = 0;
    std::vector<std::string> notes;
};

/// Fits psi parameters so that psi(phi(q)) - p = q in least squares over the
/// grid. p is fitted too unless p_known is given. Bounded simplex with five
/// deterministic restarts, 1e4 evaluation budget.
FitResult fit_triplet(const PhiGrid& phi, TripletHypothesis hypothesis,
                      std::optional<double> p_known = 0.0, std::uint64_t seed = 0);

/// sigma^2 from psi on the lattice (alpha n): least squares of
/// 2 psi(alpha n)/(alpha n)^2 = sigma^2 + c/n over the top half, intercept.
double extract_sigma2_lattice(const std::vector<std::pair<int, double>>& psi_values,
                              double alpha);

enum class PssmpHypothesis {
    BrownianWithKilling,  // driving psi(z) = sigma^2 z^2/2, free z0 = psi^{-1}(p)
};

/// Least squares of log(transform) against the series-ratio model at fixed
/// alpha; recovers (sigma^2, z0) and audits the coefficient growth condition.
FitResult fit_pssmp(const TransformGrid& data, double alpha,
                    PssmpHypothesis hypothesis = PssmpHypothesis::BrownianWithKilling,
                    std::uint64_t seed = 0);

enum class CsbpHypothesis {
    LinearBranching,  // psi(z) = b z
    Feller,           // psi(z) = sigma^2 z^2 / 2
    DriftDiffusion,   // psi(z) = -gamma z + sigma^2 z^2 / 2
};

/// Least squares of transform values against the CSBP integral formulas.
/// Reports the fitted branching mechanism g = psi - p on a z grid in notes.
FitResult fit_csbp(const TransformGrid& data, CsbpVariant variant, CsbpHypothesis hypothesis,
                   double p_known = 0.0, std::uint64_t seed = 0);

/// Plain Nelder-Mead with deterministic restarts; exposed for tests.
struct SimplexResult {
    std::vector<double> x;
    double fval = std::numeric_limits<double>::infinity();
    int evaluations = 0;
};
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double scale, int budget, int restarts,
                          std::uint64_t seed);

}  // namespace passage
