// SPDX-License-Identifier: Apache-2.0
#include "passage/identify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "passage/rng.hpp"

namespace passage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rows usable for fitting: above the q threshold and with a positive gap.
std::vector<TransformRow> usable_rows(const TransformGrid& data, int* excluded = nullptr) {
    std::vector<TransformRow> rows;
    int dropped = 0;
    for (const auto& r : data.rows) {
        if (r.q <= data.q_min || !(r.x > r.l) || !(r.value > 0.0) || r.value > 1.0 + 1e-12) {
            ++dropped;
            continue;
        }
        rows.push_back(r);
    }
    if (excluded) *excluded = dropped;
    return rows;
}

std::map<double, std::vector<TransformRow>> by_q(const std::vector<TransformRow>& rows) {
    std::map<double, std::vector<TransformRow>> groups;
    for (const auto& r : rows) groups[r.q].push_back(r);
    return groups;
}

// Dense symmetric solve for the tiny normal-equation systems (dim <= 4).
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> a,
                                           std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (a[col][col] == 0.0) throw NumericalError("singular normal equations");
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double scale, int budget, int restarts,
                          std::uint64_t seed) {
    const std::size_t dim = x0.size();
    SimplexResult best;
    best.x = x0;

    auto eval = [&](const std::vector<double>& x) {
        ++best.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : kInf;
    };
    best.fval = eval(x0);

    for (int restart = 0; restart <= restarts; ++restart) {
        if (best.evaluations >= budget) break;
        Rng rng(RngStream{seed, static_cast<std::uint64_t>(restart)});
        std::vector<std::vector<double>> simplex(dim + 1, best.x);
        std::vector<double> fv(dim + 1);
        const double spread = scale * (restart == 0 ? 1.0 : std::pow(0.5, restart));
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i > 0) simplex[i][i - 1] += spread;
            if (restart > 0) {
                for (std::size_t d = 0; d < dim; ++d) {
                    simplex[i][d] += spread * 0.3 * (2.0 * rng.uniform() - 1.0);
                }
            }
            fv[i] = eval(simplex[i]);
        }
        while (best.evaluations < budget) {
            std::vector<std::size_t> order(dim + 1);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t lo = order[0], hi = order[dim];
            if (fv[lo] < best.fval) {
                best.fval = fv[lo];
                best.x = simplex[lo];
            }
            double diam = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                double mn = kInf, mx = -kInf;
                for (std::size_t i = 0; i <= dim; ++i) {
                    mn = std::min(mn, simplex[i][d]);
                    mx = std::max(mx, simplex[i][d]);
                }
                diam = std::max(diam, mx - mn);
            }
            if (diam < 1e-12 && fv[hi] - fv[lo] < 1e-18 * (1.0 + std::abs(fv[lo]))) break;

            std::vector<double> centroid(dim, 0.0);
            for (std::size_t i = 0; i <= dim; ++i) {
                if (i == hi) continue;
                for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[i][d] / dim;
            }
            auto blend = [&](double t) {
                std::vector<double> p(dim);
                for (std::size_t d = 0; d < dim; ++d) {
                    p[d] = centroid[d] + t * (centroid[d] - simplex[hi][d]);
                }
                return p;
            };
            const auto reflected = blend(1.0);
            const double fr = eval(reflected);
            if (fr < fv[lo]) {
                const auto expanded = blend(2.0);
                const double fe = eval(expanded);
                if (fe < fr) {
                    simplex[hi] = expanded;
                    fv[hi] = fe;
                } else {
                    simplex[hi] = reflected;
                    fv[hi] = fr;
                }
            } else if (fr < fv[order[dim - 1]]) {
                simplex[hi] = reflected;
                fv[hi] = fr;
            } else {
                const auto contracted = blend(fr < fv[hi] ? 0.5 : -0.5);
                const double fc = eval(contracted);
                if (fc < std::min(fr, fv[hi])) {
                    simplex[hi] = contracted;
                    fv[hi] = fc;
                } else {
                    for (std::size_t i = 0; i <= dim; ++i) {
                        if (i == lo) continue;
                        for (std::size_t d = 0; d < dim; ++d) {
                            simplex[i][d] = 0.5 * (simplex[i][d] + simplex[lo][d]);
                        }
                        fv[i] = eval(simplex[i]);
                    }
                }
            }
        }
    }
    return best;
}

PhiFit fit_phi_grid(const TransformGrid& data) {
    PhiFit out;
    auto rows = usable_rows(data, &out.diagnostics.excluded_rows);
    if (rows.empty()) throw ValidationError("fit_phi_grid: no usable rows");
    for (auto& [q, group] : by_q(rows)) {
        double sgy = 0.0, sgg = 0.0, syy = 0.0;
        std::set<double> gaps;
        for (const auto& r : group) {
            const double g = r.x - r.l;
            const double y = -std::log(r.value);
            sgy += g * y;
            sgg += g * g;
            syy += y * y;
            gaps.insert(g);
        }
        const double slope = sgy / sgg;
        double ss_res = 0.0;
        for (const auto& r : group) {
            const double e = -std::log(r.value) - slope * (r.x - r.l);
            ss_res += e * e;
        }
        out.grid.points.emplace_back(q, slope);
        out.diagnostics.q.push_back(q);
        out.diagnostics.r_squared.push_back(syy > 0.0 ? 1.0 - ss_res / syy : 1.0);
        out.diagnostics.gap_count.push_back(static_cast<int>(gaps.size()));
        if (gaps.size() < 2) out.diagnostics.low_confidence = true;
    }
    std::sort(out.grid.points.begin(), out.grid.points.end());
    double phi_scale = 0.0;
    for (const auto& [q, phi] : out.grid.points) phi_scale = std::max(phi_scale, std::abs(phi));
    for (std::size_t i = 1; i < out.grid.points.size(); ++i) {
        if (out.grid.points[i].second < out.grid.points[i - 1].second - 1e-12 * phi_scale) {
            throw NumericalError("fit_phi_grid: fitted phi is not nondecreasing in q");
        }
    }
    return out;
}

LevyFormResult detect_levy_form(const TransformGrid& data) {
    LevyFormResult out;
    auto rows = usable_rows(data);
    auto groups = by_q(rows);
    std::set<double> gaps;
    for (const auto& r : rows) gaps.insert(r.x - r.l);
    if (groups.size() < 3 || gaps.size() < 3) {
        out.degenerate = true;
        out.is_levy = true;
        return out;
    }
    for (auto& [q, group] : groups) {
        double sgy = 0.0, sgg = 0.0, ymax = 0.0;
        for (const auto& r : group) {
            const double g = r.x - r.l;
            const double y = -std::log(r.value);
            sgy += g * y;
            sgg += g * g;
            ymax = std::max(ymax, std::abs(y));
        }
        const double slope = sgy / sgg;
        for (const auto& r : group) {
            const double dev = std::abs(-std::log(r.value) - slope * (r.x - r.l));
            out.score = std::max(out.score, dev / std::max(ymax, 1e-300));
        }
    }
    out.is_levy = out.score <= 1e-8;
    return out;
}

namespace {

struct TripletModel {
    TripletHypothesis hypothesis;
    bool fit_p;
    double p_known;

    int dim() const {
        int d = 0;
        switch (hypothesis) {
            case TripletHypothesis::PureDrift: d = 1; break;
            case TripletHypothesis::Bm: d = 1; break;
            case TripletHypothesis::DriftBm: d = 2; break;
            case TripletHypothesis::DriftBmExpJump: d = 4; break;
        }
        return d + (fit_p ? 1 : 0);
    }

    // Unconstrained parameter vector -> (triplet, p).
    LevyTriplet unpack(const std::vector<double>& u) const {
        LevyTriplet t;
        std::size_t i = 0;
        switch (hypothesis) {
            case TripletHypothesis::PureDrift:
                t.gamma = -std::exp(u[i++]);
                break;
            case TripletHypothesis::Bm:
                t.sigma2 = std::exp(u[i++]);
                break;
            case TripletHypothesis::DriftBm:
                t.gamma = u[i++];
                t.sigma2 = std::exp(u[i++]);
                break;
            case TripletHypothesis::DriftBmExpJump: {
                t.gamma = u[i++];
                t.sigma2 = std::exp(u[i++]);
                const double lambda = std::exp(u[i++]);
                const double rho = std::exp(u[i++]);
                t.jumps = JumpMeasure::exp_mixture({{lambda, rho}});
                break;
            }
        }
        t.p = fit_p ? std::exp(u[i++]) : p_known;
        return t;
    }

    std::vector<double> pack_initial(const PhiGrid& phi) const {
        // Linear pre-solve in the linear coefficients at a few candidate
        // jump scales; gives the simplex a good start.
        auto linear_fit = [&](double rho, std::vector<double>& coeffs) {
            std::vector<std::vector<double>> cols;  // design columns
            const bool want_gamma = hypothesis == TripletHypothesis::PureDrift ||
                                    hypothesis == TripletHypothesis::DriftBm ||
                                    hypothesis == TripletHypothesis::DriftBmExpJump;
            const bool want_sigma = hypothesis != TripletHypothesis::PureDrift;
            const bool want_jump = hypothesis == TripletHypothesis::DriftBmExpJump;
            const std::size_t m = phi.points.size();
            std::vector<double> rhs(m);
            std::vector<std::vector<double>> design;
            for (std::size_t r = 0; r < m; ++r) {
                const auto [q, ph] = phi.points[r];
                rhs[r] = q;
                std::vector<double> row;
                if (want_gamma) row.push_back(-ph);
                if (want_sigma) row.push_back(0.5 * ph * ph);
                if (want_jump) {
                    const double comp = (1.0 - std::exp(-rho)) / rho - std::exp(-rho);
                    row.push_back(-ph / (rho + ph) + ph * comp);
                }
                if (fit_p) row.push_back(-1.0);
                design.push_back(std::move(row));
            }
            const std::size_t k = design.empty() ? 0 : design[0].size();
            std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
            std::vector<double> atb(k, 0.0);
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t i = 0; i < k; ++i) {
                    atb[i] += design[r][i] * rhs[r];
                    for (std::size_t j = 0; j < k; ++j) ata[i][j] += design[r][i] * design[r][j];
                }
            }
            coeffs = solve_normal_equations(ata, atb);
        };

        double best_rho = 1.0;
        std::vector<double> coeffs;
        if (hypothesis == TripletHypothesis::DriftBmExpJump) {
            double best_res = kInf;
            for (double rho : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
                std::vector<double> c;
                try {
                    linear_fit(rho, c);
                } catch (const NumericalError&) {
                    continue;
                }
                // quick residual
                double res = 0.0;
                for (const auto& [q, ph] : phi.points) {
                    std::size_t i = 0;
                    const double gamma = c[i++];
                    const double s2 = c[i++];
                    const double lam = c[i++];
                    const double comp = (1.0 - std::exp(-rho)) / rho - std::exp(-rho);
                    const double v = -gamma * ph + 0.5 * s2 * ph * ph +
                                     lam * (-ph / (rho + ph) + ph * comp);
                    const double pp = fit_p ? c[i] : p_known;
                    const double e = v - pp - q;
                    res += e * e;
                }
                if (res < best_res) {
                    best_res = res;
                    best_rho = rho;
                    coeffs = c;
                }
            }
            if (coeffs.empty()) linear_fit(1.0, coeffs);
        } else {
            linear_fit(1.0, coeffs);
        }

        std::vector<double> u;
        std::size_t i = 0;
        auto log_clamped = [](double v) { return std::log(std::max(v, 1e-8)); };
        switch (hypothesis) {
            case TripletHypothesis::PureDrift:
                // coefficient is gamma; the speed is -gamma
                u.push_back(log_clamped(-coeffs[i++]));
                break;
            case TripletHypothesis::Bm:
                u.push_back(log_clamped(coeffs[i++]));
                break;
            case TripletHypothesis::DriftBm:
                u.push_back(coeffs[i++]);
                u.push_back(log_clamped(coeffs[i++]));
                break;
            case TripletHypothesis::DriftBmExpJump:
                u.push_back(coeffs[i++]);
                u.push_back(log_clamped(coeffs[i++]));
                u.push_back(log_clamped(coeffs[i++]));
                u.push_back(std::log(best_rho));
                break;
        }
        if (fit_p) u.push_back(log_clamped(coeffs[i]));
        return u;
    }
};

double psi_of(const LevyTriplet& t, double z) { return eval_psi(t, z); }

}  // namespace

FitResult fit_triplet(const PhiGrid& phi, TripletHypothesis hypothesis,
                      std::optional<double> p_known, std::uint64_t seed) {
    FitResult out;
    const TripletModel model{hypothesis, !p_known.has_value(), p_known.value_or(0.0)};
    const std::size_t m = phi.points.size();
    if (static_cast<int>(m) < model.dim()) {
        throw ValidationError("fit_triplet: fewer grid points than free parameters");
    }
    auto objective = [&](const std::vector<double>& u) {
        double res = 0.0;
        LevyTriplet t;
        try {
            t = model.unpack(u);
        } catch (...) {
            return kInf;
        }
        for (const auto& [q, ph] : phi.points) {
            const double e = psi_of(t, ph) - t.p - q;
            res += e * e;
        }
        return res;
    };

    std::vector<double> u0;
    try {
        u0 = model.pack_initial(phi);
    } catch (const NumericalError&) {
        u0.assign(model.dim(), 0.0);
    }
    auto sr = nelder_mead(objective, u0, 0.5, 10000, 5, seed);
    out.residual = sr.fval;
    out.evaluations = sr.evaluations;
    const LevyTriplet t = model.unpack(sr.x);
    out.params["gamma"] = t.gamma;
    out.params["sigma2"] = t.sigma2;
    out.params["p"] = t.p;
    if (hypothesis == TripletHypothesis::PureDrift) out.params["speed"] = -t.gamma;
    if (hypothesis == TripletHypothesis::DriftBmExpJump) {
        out.params["jump_rate"] = t.jumps.exp_components()[0].rate;
        out.params["jump_scale"] = t.jumps.exp_components()[0].scale;
    }
    out.fitted = ProcessSpec{LevySpec{t}};
    out.converged = out.residual < 1e-16 * double(m);
    if (!out.converged) out.notes.push_back("budget exhausted before residual threshold");
    return out;
}

double extract_sigma2_lattice(const std::vector<std::pair<int, double>>& psi_values,
                              double alpha) {
    if (psi_values.size() < 8) {
        throw ValidationError("extract_sigma2_lattice: need at least 8 lattice points");
    }
    int n_max = 0;
    for (const auto& [n, v] : psi_values) n_max = std::max(n_max, n);
    // s_n = sigma^2 + c/n on the top half of the lattice
    double s11 = 0.0, s1x = 0.0, sxx = 0.0, s1y = 0.0, sxy = 0.0;
    int used = 0;
    for (const auto& [n, v] : psi_values) {
        if (n < (n_max + 1) / 2 || n < 1) continue;
        const double z = alpha * n;
        const double s = 2.0 * v / (z * z);
        const double xr = 1.0 / n;
        s11 += 1.0;
        s1x += xr;
        sxx += xr * xr;
        s1y += s;
        sxy += xr * s;
        ++used;
    }
    if (used < 2) throw ValidationError("extract_sigma2_lattice: top half has too few points");
    const double det = s11 * sxx - s1x * s1x;
    if (det == 0.0) throw NumericalError("extract_sigma2_lattice: degenerate lattice");
    return (s1y * sxx - sxy * s1x) / det;
}

namespace {

// Series transform for a Brownian-driven self-similar spec with parameters
// (sigma2, z0); p is implied as psi(z0).
double pssmp_log_phi(double sigma2, double z0, double alpha, double q, double y) {
    const double p = 0.5 * sigma2 * z0 * z0;
    double term = std::exp(-z0 * y);
    double sum = term;
    const double decay = std::exp(-alpha * y);
    for (int k = 1; k <= 100000; ++k) {
        const double zk = z0 + k * alpha;
        const double factor = 0.5 * sigma2 * zk * zk - p;
        if (!(factor > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double prev = term;
        term *= q * decay / factor;
        sum += term;
        if (term <= 1e-16 * sum && term < prev) {
            const double r = term / prev;
            if (term * r / (1.0 - r) <= 1e-13 * sum) break;
        }
    }
    return std::log(sum);
}

}  // namespace

FitResult fit_pssmp(const TransformGrid& data, double alpha, PssmpHypothesis hypothesis,
                    std::uint64_t seed) {
    (void)hypothesis;  // single hypothesis shape for now
    FitResult out;
    auto rows = usable_rows(data);
    if (rows.empty()) throw ValidationError("fit_pssmp: no usable rows");

    bool all_q_zero = true;
    for (const auto& r : rows) all_q_zero = all_q_zero && r.q == 0.0;
    if (all_q_zero) {
        // transform = exp(-z0 (x - l)): single-exponential slope fit
        double sgy = 0.0, sgg = 0.0;
        for (const auto& r : rows) {
            const double g = r.x - r.l;
            sgy += g * -std::log(r.value);
            sgg += g * g;
        }
        out.params["z0"] = sgy / sgg;
        out.converged = true;
        out.residual = 0.0;
        for (const auto& r : rows) {
            const double e = -std::log(r.value) - out.params["z0"] * (r.x - r.l);
            out.residual += e * e;
        }
        out.notes.push_back("q = 0 rows only: z0 identified alone, sigma2 left free");
        return out;
    }

    auto objective = [&](const std::vector<double>& u) {
        const double sigma2 = std::exp(u[0]);
        const double z0 = std::abs(u[1]);
        double res = 0.0;
        for (const auto& r : rows) {
            const double lm = pssmp_log_phi(sigma2, z0, alpha, r.q, r.x) -
                              pssmp_log_phi(sigma2, z0, alpha, r.q, r.l);
            if (std::isnan(lm)) return kInf;
            const double e = lm - std::log(r.value);
            res += e * e;
        }
        return res;
    };
    auto sr = nelder_mead(objective, {0.0, 0.1}, 0.7, 10000, 5, seed);
    out.residual = sr.fval;
    out.evaluations = sr.evaluations;
    const double sigma2 = std::exp(sr.x[0]);
    const double z0 = std::abs(sr.x[1]);
    out.params["sigma2"] = sigma2;
    out.params["z0"] = z0;
    out.params["p"] = 0.5 * sigma2 * z0 * z0;

    LevyTriplet t;
    t.sigma2 = sigma2;
    t.p = out.params["p"];
    PssmpSpec spec{t, alpha};
    out.fitted = ProcessSpec{spec};
    out.converged = out.residual < 1e-16 * double(rows.size());

    // Audit the implied coefficients against the growth condition.
    const ScaleSeries series = pssmp_coefficients(spec, 40);
    const SeriesGrowth growth = series_growth(series);
    out.params["coeff_min_k2"] = growth.min_ratio_k2;
    out.params["coeff_max_k"] = growth.max_ratio_k;
    if (!(growth.min_ratio_k2 > 0.0) || !std::isfinite(growth.max_ratio_k)) {
        out.notes.push_back("implied coefficients violate the growth condition");
    }
    return out;
}

FitResult fit_csbp(const TransformGrid& data, CsbpVariant variant, CsbpHypothesis hypothesis,
                   double p_known, std::uint64_t seed) {
    FitResult out;
    int excluded = 0;
    auto rows = usable_rows(data, &excluded);
    if (excluded > 0) {
        std::ostringstream os;
        os << excluded << " uninformative rows (x == l or q <= q_min) excluded";
        out.notes.push_back(os.str());
    }
    if (rows.empty()) throw ValidationError("fit_csbp: no usable rows");

    auto make_triplet = [&](const std::vector<double>& u) {
        LevyTriplet t;
        switch (hypothesis) {
            case CsbpHypothesis::LinearBranching: t.gamma = -std::exp(u[0]); break;
            case CsbpHypothesis::Feller: t.sigma2 = std::exp(u[0]); break;
            case CsbpHypothesis::DriftDiffusion:
                t.gamma = u[0];
                t.sigma2 = std::exp(u[1]);
                break;
        }
        t.p = p_known;
        return t;
    };

    // distinct (q, level) pairs so each Phi is evaluated once per candidate
    auto objective = [&](const std::vector<double>& u) {
        LevyTriplet t = make_triplet(u);
        try {
            const double z0 = psi_inverse(t, t.p).z;
            CsbpSpec spec{t, variant, z0 + 1.0};
            validate_spec(ProcessSpec{spec});
            CsbpScaleEngine engine(spec);
            std::map<std::pair<double, double>, double> log_phi;
            auto get = [&](double q, double y) {
                auto key = std::make_pair(q, y);
                auto it = log_phi.find(key);
                if (it != log_phi.end()) return it->second;
                const bool extinct = variant == CsbpVariant::Extinct && q > 0.0;
                const double v =
                    engine.evaluate(CsbpExpression::XPrefactor, extinct, q, y).log_value;
                log_phi.emplace(key, v);
                return v;
            };
            double res = 0.0;
            for (const auto& r : rows) {
                const double e = (get(r.q, r.x) - get(r.q, r.l)) - std::log(r.value);
                res += e * e;
            }
            return res;
        } catch (...) {
            return kInf;
        }
    };

    const int dim = hypothesis == CsbpHypothesis::DriftDiffusion ? 2 : 1;
    auto sr = nelder_mead(objective, std::vector<double>(dim, 0.0), 0.7, 2000, 3, seed);
    out.residual = sr.fval;
    out.evaluations = sr.evaluations;
    const LevyTriplet t = make_triplet(sr.x);
    out.params["gamma"] = t.gamma;
    out.params["sigma2"] = t.sigma2;
    out.params["p"] = t.p;
    if (hypothesis == CsbpHypothesis::LinearBranching) out.params["b"] = -t.gamma;

    // Variant consistency of the fitted mechanism.
    const bool fitted_recurrent = psi_reciprocal_integral_diverges(t);
    if (fitted_recurrent != (variant == CsbpVariant::Recurrent)) {
        out.notes.push_back("variant mismatch: fitted psi tail integral disagrees");
        out.converged = false;
        return out;
    }
    const double z0 = psi_inverse(t, t.p).z;
    CsbpSpec spec{t, variant, z0 + 1.0};
    out.fitted = ProcessSpec{spec};
    out.converged = out.residual < 1e-16 * double(rows.size());

    // Fitted branching mechanism g = psi - p on a reporting grid.
    std::ostringstream os;
    os << "g = psi - p at z in {z0 + k}: ";
    for (int k = 0; k <= 4; ++k) {
        os << (eval_psi(t, z0 + k) - t.p) << (k < 4 ? ", " : "");
    }
    out.notes.push_back(os.str());
    return out;
}

}  // namespace passage
