// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "passage/process.hpp"
#include "passage/rng.hpp"

namespace passage {

/// One simulated first-passage outcome. time is the passage time when
/// crossed; otherwise it records when the trajectory was terminated
/// (killing, cap or escape) and is not a passage time.
struct FirstPassageSample {
    bool crossed = false;
    double time = 0.0;
    double level_at_crossing = 0.0;  // diagnostic; equals l for these families
};

struct SimOptions {
    /// Sub-step for the Lamperti clock quadrature (pssMp / CSBP only).
    double delta = 1e-3;
    /// Terminate as not-crossed once the family time exceeds this cap.
    /// Callers estimating E[e^{-qT}] can set 45/q: the discarded mass is
    /// below e^{-45}. Leave infinite for raw crossing-frequency runs.
    double clock_cap = std::numeric_limits<double>::infinity();
    std::uint64_t max_events = 200'000'000;
};

/// Exact outcome of one drifted Brownian segment mu t + sigma W_t run for
/// `horizon` against a barrier `gap` below the start.
struct SegmentOutcome {
    bool crossed = false;
    double time = 0.0;      // crossing time if crossed, else horizon
    double endpoint = 0.0;  // increment over the horizon, valid if !crossed
};

SegmentOutcome diffusion_segment(double mu, double sigma, double gap, double horizon, Rng& rng);

/// Full-law first passage of mu t + sigma W_t to -gap: returns (crossed
/// within horizon, time). The defective case (mu > 0) returns false with
/// probability 1 - exp(-2 mu gap / sigma^2).
std::pair<bool, double> inverse_gaussian_passage(double mu, double sigma, double gap,
                                                 double horizon, Rng& rng);

class LevySampler {
  public:
    explicit LevySampler(const LevySpec& spec);
    FirstPassageSample sample(double x, double l, Rng& rng, const SimOptions& opts = {}) const;

    /// Exact path marginals on a time grid, for the martingale check.
    /// positions[j] holds X_{t_j} while t_j < min(cross, kill).
    struct PathOnGrid {
        double cross_time = std::numeric_limits<double>::infinity();
        double kill_time = std::numeric_limits<double>::infinity();
        std::vector<double> positions;
    };
    PathOnGrid sample_grid(double x, double l, std::span<const double> grid, Rng& rng) const;

    double jump_rate() const { return jump_rate_; }

  private:
    double sample_jump(Rng& rng) const;
    LevySpec spec_;
    double drift_ = 0.0;  // path drift after de-compensation
    double sigma_ = 0.0;
    double jump_rate_ = 0.0;
    double escape_rate_ = 0.0;  // psi^{-1}(0) > 0 when the path drifts to +inf
};

class PssmpSampler {
  public:
    explicit PssmpSampler(const PssmpSpec& spec);
    FirstPassageSample sample(double x, double l, Rng& rng, const SimOptions& opts = {}) const;

    /// Marginal X_t of the time-changed process at a fixed time, for the
    /// self-similar moment identity check. Returns (alive, value).
    std::pair<bool, double> sample_marginal(double x, double t, Rng& rng,
                                            const SimOptions& opts = {}) const;

  private:
    double sample_jump(Rng& rng) const;
    PssmpSpec spec_;
    double drift_ = 0.0, sigma_ = 0.0, jump_rate_ = 0.0, escape_rate_ = 0.0;
};

class CsbpSampler {
  public:
    explicit CsbpSampler(const CsbpSpec& spec);
    /// Killing at rate p runs on the driving-Levy clock, which realizes the
    /// branching mechanism psi - p (each unit of mass is killed at rate p).
    FirstPassageSample sample(double x, double l, Rng& rng, const SimOptions& opts = {}) const;

  private:
    double sample_jump(Rng& rng) const;
    CsbpSpec spec_;
    double drift_ = 0.0, sigma_ = 0.0, jump_rate_ = 0.0, escape_rate_ = 0.0;
};

class KilledDriftSampler {
  public:
    explicit KilledDriftSampler(const KilledDriftSpec& spec);
    FirstPassageSample sample(double x, double l, Rng& rng, const SimOptions& opts = {}) const;

  private:
    KilledDriftSpec spec_;
};

FirstPassageSample sample_levy_first_passage(const LevySpec& spec, double x, double l, Rng& rng,
                                             const SimOptions& opts = {});
FirstPassageSample sample_pssmp_first_passage(const PssmpSpec& spec, double x, double l, Rng& rng,
                                              const SimOptions& opts = {});
FirstPassageSample sample_csbp_first_passage(const CsbpSpec& spec, double x, double l, Rng& rng,
                                             const SimOptions& opts = {});
FirstPassageSample sample_killed_drift_passage(const KilledDriftSpec& spec, double x, double l,
                                               Rng& rng, const SimOptions& opts = {});
FirstPassageSample sample_first_passage(const ProcessSpec& spec, double x, double l, Rng& rng,
                                        const SimOptions& opts = {});

}  // namespace passage
