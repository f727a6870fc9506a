// SPDX-License-Identifier: Apache-2.0
#include "passage/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace passage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Inverse-Gaussian(m, lambda) via the Michael-Schucany-Haas transform,
// written so the discriminant never cancels.
double sample_inverse_gaussian(double m, double lambda, Rng& rng) {
    const double nu = rng.normal();
    const double w = m * nu * nu;
    const double x1 = m - 2.0 * m * w / (w + std::sqrt(w * (w + 4.0 * lambda)));
    const double u = rng.uniform();
    return u <= m / (m + x1) ? x1 : m * m / x1;
}

// Full-law passage time of mu t + sigma W_t to the level -gap; +inf on the
// defective event.
double sample_full_passage_time(double mu, double sigma, double gap, Rng& rng) {
    const double sigma2 = sigma * sigma;
    if (mu > 0.0) {
        if (rng.uniform() > std::exp(-2.0 * mu * gap / sigma2)) return kInf;
    }
    if (mu == 0.0) {
        double z = rng.normal();
        while (z == 0.0) z = rng.normal();
        const double r = gap / (sigma * z);
        return r * r;
    }
    const double m = gap / std::abs(mu);
    const double lambda = gap * gap / sigma2;
    return sample_inverse_gaussian(m, lambda, rng);
}

double jump_from_measure(const JumpMeasure& jumps, double total_rate, Rng& rng) {
    double pick = rng.uniform() * total_rate;
    for (const auto& c : jumps.exp_components()) {
        pick -= c.rate;
        if (pick <= 0.0) return rng.exponential(c.scale);
    }
    for (const auto& c : jumps.atom_components()) {
        pick -= c.rate;
        if (pick <= 0.0) return c.size;
    }
    // rounding fell past the end; the last component owns the remainder
    if (!jumps.atom_components().empty()) return jumps.atom_components().back().size;
    return rng.exponential(jumps.exp_components().back().scale);
}

// Gap (in units of the driving process) beyond which the crossing
// probability e^{-escape_rate * gap} is below 2^-60.
double escape_gap(double escape_rate) {
    return escape_rate > 0.0 ? 45.0 / escape_rate : kInf;
}

}  // namespace

SegmentOutcome diffusion_segment(double mu, double sigma, double gap, double horizon, Rng& rng) {
    SegmentOutcome out;
    out.time = horizon;
    if (sigma == 0.0) {
        if (mu < 0.0 && gap <= -mu * horizon) {
            out.crossed = true;
            out.time = gap / -mu;
            out.endpoint = -gap;
        } else {
            out.endpoint = std::isfinite(horizon) ? mu * horizon : 0.0;
        }
        return out;
    }
    if (std::isfinite(horizon) && horizon > 0.0) {
        // Far-from-barrier shortcut: P(min <= -gap) <= 2 exp(-(gap+mu h)^2/(2v)),
        // negligible past 9.2 standard deviations.
        const double sd = sigma * std::sqrt(horizon);
        const double margin = gap + mu * horizon;
        if (margin > 9.2 * sd) {
            const double s = mu * horizon + sd * rng.normal();
            if (s > -gap) {
                out.endpoint = s;
                return out;
            }
            // astronomically unlikely; fall through to the exact branch
        }
    }
    if (horizon == 0.0) return out;

    const double t_cross = sample_full_passage_time(mu, sigma, gap, rng);
    if (t_cross <= horizon) {
        out.crossed = true;
        out.time = t_cross;
        out.endpoint = -gap;
        return out;
    }
    if (!std::isfinite(horizon)) {
        out.endpoint = 0.0;  // unused: caller sees a never-crossing path
        return out;
    }
    // Endpoint given no crossing on [0, horizon]: rejection from the
    // unconditional Gaussian with the bridge reflection acceptance.
    const double v = sigma * sigma * horizon;
    const double sd = std::sqrt(v);
    const double mean = mu * horizon;
    for (std::uint64_t tries = 0;; ++tries) {
        const double s = mean + sd * rng.normal();
        if (s > -gap && rng.uniform() <= -std::expm1(-2.0 * gap * (gap + s) / v)) {
            out.endpoint = s;
            return out;
        }
        if (tries > 10'000'000) {
            throw NumericalError("diffusion_segment: endpoint rejection stalled");
        }
    }
}

std::pair<bool, double> inverse_gaussian_passage(double mu, double sigma, double gap,
                                                 double horizon, Rng& rng) {
    if (!(sigma > 0.0)) throw std::domain_error("inverse_gaussian_passage: sigma must be > 0");
    if (!(gap > 0.0)) throw std::domain_error("inverse_gaussian_passage: gap must be > 0");
    const double t = sample_full_passage_time(mu, sigma, gap, rng);
    return {t <= horizon, t};
}

// ---------------------------------------------------------------------------
// Levy
// ---------------------------------------------------------------------------

LevySampler::LevySampler(const LevySpec& spec) : spec_(spec) {
    require_valid_triplet(spec_.triplet);
    drift_ = spec_.triplet.path_drift();
    sigma_ = std::sqrt(spec_.triplet.sigma2);
    jump_rate_ = spec_.triplet.jumps.total_rate();
    escape_rate_ = psi_inverse(spec_.triplet, 0.0).z;
}

double LevySampler::sample_jump(Rng& rng) const {
    return jump_from_measure(spec_.triplet.jumps, jump_rate_, rng);
}

FirstPassageSample LevySampler::sample(double x, double l, Rng& rng,
                                       const SimOptions& opts) const {
    if (l > x) throw std::domain_error("sample: requires l <= x");
    if (x == l) return {true, 0.0, l};
    double pos = x;
    double t = 0.0;
    const double e_kill = rng.exponential(spec_.triplet.p);
    const double gap_escape = escape_gap(escape_rate_);
    for (std::uint64_t events = 0; events < opts.max_events; ++events) {
        const double t_jump = rng.exponential(jump_rate_);
        const double horizon = std::min({t_jump, e_kill - t, opts.clock_cap - t});
        SegmentOutcome seg = diffusion_segment(drift_, sigma_, pos - l, horizon, rng);
        if (seg.crossed) return {true, t + seg.time, l};
        if (!std::isfinite(horizon)) return {false, kInf, 0.0};
        t += horizon;
        pos += seg.endpoint;
        if (horizon != t_jump) return {false, t, 0.0};  // killed or capped
        pos += sample_jump(rng);
        if (pos - l > gap_escape) return {false, t, 0.0};
    }
    throw NumericalError("levy sampler: event budget exhausted");
}

LevySampler::PathOnGrid LevySampler::sample_grid(double x, double l,
                                                 std::span<const double> grid, Rng& rng) const {
    PathOnGrid out;
    out.positions.assign(grid.size(), 0.0);
    double pos = x;
    double t = 0.0;
    const double e_kill = rng.exponential(spec_.triplet.p);
    double next_jump = t + rng.exponential(jump_rate_);
    std::size_t j = 0;
    if (x == l) {
        out.cross_time = 0.0;
        return out;
    }
    while (j < grid.size()) {
        const double target = std::min({next_jump, e_kill, grid[j]});
        SegmentOutcome seg = diffusion_segment(drift_, sigma_, pos - l, target - t, rng);
        if (seg.crossed) {
            out.cross_time = t + seg.time;
            return out;
        }
        t = target;
        pos += seg.endpoint;
        if (t == e_kill) {
            out.kill_time = t;
            return out;
        }
        if (t == next_jump) {
            pos += sample_jump(rng);
            next_jump = t + rng.exponential(jump_rate_);
        }
        while (j < grid.size() && grid[j] <= t) {
            out.positions[j] = pos;
            ++j;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// pssMp (Lamperti time change of the driving Levy process)
// ---------------------------------------------------------------------------

PssmpSampler::PssmpSampler(const PssmpSpec& spec) : spec_(spec) {
    validate_spec(ProcessSpec{spec});
    drift_ = spec_.triplet.path_drift();
    sigma_ = std::sqrt(spec_.triplet.sigma2);
    jump_rate_ = spec_.triplet.jumps.total_rate();
    escape_rate_ = psi_inverse(spec_.triplet, 0.0).z;
}

double PssmpSampler::sample_jump(Rng& rng) const {
    return jump_from_measure(spec_.triplet.jumps, jump_rate_, rng);
}

FirstPassageSample PssmpSampler::sample(double x, double l, Rng& rng,
                                        const SimOptions& opts) const {
    if (l > x) throw std::domain_error("sample: requires l <= x");
    if (x == l) return {true, 0.0, l};
    const double a = spec_.alpha;
    double pos = x;      // driving process xi
    double u = 0.0;      // xi time
    double clock = 0.0;  // int_0^u e^{-a xi} dv = family time
    const double e_kill = rng.exponential(spec_.triplet.p);  // on xi time
    const double gap_escape = escape_gap(escape_rate_);
    for (std::uint64_t events = 0; events < opts.max_events; ++events) {
        const double seg_end = std::min(u + rng.exponential(jump_rate_), e_kill);
        bool ended_by_jump = seg_end < e_kill;
        while (u < seg_end) {
            const double h = std::min(opts.delta, seg_end - u);
            SegmentOutcome sub = diffusion_segment(drift_, sigma_, pos - l, h, rng);
            if (sub.crossed) {
                clock += 0.5 * (std::exp(-a * pos) + std::exp(-a * l)) * sub.time;
                return {true, clock, l};
            }
            const double next = pos + sub.endpoint;
            clock += 0.5 * (std::exp(-a * pos) + std::exp(-a * next)) * h;
            pos = next;
            u += h;
            if (clock > opts.clock_cap) return {false, clock, 0.0};
            if (pos - l > gap_escape) return {false, clock, 0.0};
            if (++events >= opts.max_events) {
                throw NumericalError("pssmp sampler: event budget exhausted");
            }
        }
        if (!ended_by_jump) return {false, clock, 0.0};  // killed on the xi clock
        pos += sample_jump(rng);
        if (pos - l > gap_escape) return {false, clock, 0.0};
    }
    throw NumericalError("pssmp sampler: event budget exhausted");
}

std::pair<bool, double> PssmpSampler::sample_marginal(double x, double t, Rng& rng,
                                                      const SimOptions& opts) const {
    const double a = spec_.alpha;
    double pos = x;
    double u = 0.0;
    double clock = 0.0;
    const double e_kill = rng.exponential(spec_.triplet.p);
    for (std::uint64_t events = 0; events < opts.max_events; ++events) {
        const double seg_end = std::min(u + rng.exponential(jump_rate_), e_kill);
        bool ended_by_jump = seg_end < e_kill;
        while (u < seg_end) {
            const double h = std::min(opts.delta, seg_end - u);
            // no barrier here: plain Gaussian increment
            const double next = pos + drift_ * h + sigma_ * std::sqrt(h) * rng.normal();
            const double inc = 0.5 * (std::exp(-a * pos) + std::exp(-a * next)) * h;
            if (clock + inc >= t) {
                // family time t falls inside this sub-step; linear interpolation
                const double frac = (t - clock) / inc;
                return {true, pos + frac * (next - pos)};
            }
            clock += inc;
            pos = next;
            u += h;
            if (++events >= opts.max_events) {
                throw NumericalError("pssmp marginal: event budget exhausted");
            }
        }
        if (!ended_by_jump) return {false, 0.0};  // killed before family time t
        pos += sample_jump(rng);
    }
    throw NumericalError("pssmp marginal: event budget exhausted");
}

// ---------------------------------------------------------------------------
// CSBP (Lamperti: X_t = Y_{theta_t}, family time = int du / Y_u)
// ---------------------------------------------------------------------------

CsbpSampler::CsbpSampler(const CsbpSpec& spec) : spec_(spec) {
    validate_spec(ProcessSpec{spec});
    drift_ = spec_.triplet.path_drift();
    sigma_ = std::sqrt(spec_.triplet.sigma2);
    jump_rate_ = spec_.triplet.jumps.total_rate();
    escape_rate_ = psi_inverse(spec_.triplet, 0.0).z;
}

double CsbpSampler::sample_jump(Rng& rng) const {
    return jump_from_measure(spec_.triplet.jumps, jump_rate_, rng);
}

FirstPassageSample CsbpSampler::sample(double x, double l, Rng& rng,
                                       const SimOptions& opts) const {
    if (!(l > 0.0)) throw std::domain_error("csbp sample: requires l > 0");
    if (l > x) throw std::domain_error("csbp sample: requires l <= x");
    if (x == l) return {true, 0.0, l};
    double pos = x;      // driving Levy process Y
    double u = 0.0;      // Y time
    double clock = 0.0;  // int du / Y = family time
    // Branching-mechanism killing psi - p: rate p per unit mass, which is
    // rate p on the driving-Levy clock.
    const double e_kill = rng.exponential(spec_.triplet.p);
    const double gap_escape = escape_gap(escape_rate_);
    for (std::uint64_t events = 0; events < opts.max_events; ++events) {
        const double seg_end = std::min(u + rng.exponential(jump_rate_), e_kill);
        bool ended_by_jump = seg_end < e_kill;
        while (u < seg_end) {
            const double h = std::min(opts.delta, seg_end - u);
            SegmentOutcome sub = diffusion_segment(drift_, sigma_, pos - l, h, rng);
            if (sub.crossed) {
                clock += 0.5 * (1.0 / pos + 1.0 / l) * sub.time;
                return {true, clock, l};
            }
            const double next = pos + sub.endpoint;
            clock += 0.5 * (1.0 / pos + 1.0 / next) * h;
            pos = next;
            u += h;
            if (clock > opts.clock_cap) return {false, clock, 0.0};
            if (pos - l > gap_escape) return {false, clock, 0.0};
            if (++events >= opts.max_events) {
                throw NumericalError("csbp sampler: event budget exhausted");
            }
        }
        if (!ended_by_jump) return {false, clock, 0.0};  // killed
        pos += sample_jump(rng);
        if (pos - l > gap_escape) return {false, clock, 0.0};
    }
    throw NumericalError("csbp sampler: event budget exhausted");
}

// ---------------------------------------------------------------------------
// Killed drift
// ---------------------------------------------------------------------------

KilledDriftSampler::KilledDriftSampler(const KilledDriftSpec& spec) : spec_(spec) {
    validate_spec(ProcessSpec{spec});
}

FirstPassageSample KilledDriftSampler::sample(double x, double l, Rng& rng,
                                              const SimOptions&) const {
    if (l > x) throw std::domain_error("killed drift sample: requires l <= x");
    if (!spec_.domain.contains(x) || !spec_.domain.contains(l)) {
        throw std::domain_error("killed drift sample: level outside the domain");
    }
    if (x == l) return {true, 0.0, l};
    const double passage = spec_.clock(x) - spec_.clock(l);
    const double hazard = spec_.kill_integral(l, x);
    const double e = rng.exponential(1.0);
    if (e > hazard) return {true, passage, l};
    return {false, passage, 0.0};
}

// ---------------------------------------------------------------------------

FirstPassageSample sample_levy_first_passage(const LevySpec& spec, double x, double l, Rng& rng,
                                             const SimOptions& opts) {
    return LevySampler(spec).sample(x, l, rng, opts);
}
FirstPassageSample sample_pssmp_first_passage(const PssmpSpec& spec, double x, double l, Rng& rng,
                                              const SimOptions& opts) {
    return PssmpSampler(spec).sample(x, l, rng, opts);
}
FirstPassageSample sample_csbp_first_passage(const CsbpSpec& spec, double x, double l, Rng& rng,
                                             const SimOptions& opts) {
    return CsbpSampler(spec).sample(x, l, rng, opts);
}
FirstPassageSample sample_killed_drift_passage(const KilledDriftSpec& spec, double x, double l,
                                               Rng& rng, const SimOptions& opts) {
    return KilledDriftSampler(spec).sample(x, l, rng, opts);
}

FirstPassageSample sample_first_passage(const ProcessSpec& spec, double x, double l, Rng& rng,
                                        const SimOptions& opts) {
    return std::visit(
        [&](const auto& s) -> FirstPassageSample {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec>) {
                return LevySampler(s).sample(x, l, rng, opts);
            } else if constexpr (std::is_same_v<T, PssmpSpec>) {
                return PssmpSampler(s).sample(x, l, rng, opts);
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                return CsbpSampler(s).sample(x, l, rng, opts);
            } else {
                return KilledDriftSampler(s).sample(x, l, rng, opts);
            }
        },
        spec);
}

}  // namespace passage
