// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "passage/scale.hpp"
#include "passage/simulate.hpp"

namespace passage {

struct MCReport {
    double estimate = 0.0;
    double std_error = 0.0;
    double closed_form = 0.0;
    double z_score = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    double wall_time = 0.0;  // seconds; excluded from serialized artifacts
    /// |estimate_delta - estimate_delta/2| for clock-discretized families,
    /// 0 for exact samplers.
    double bias_allowance = 0.0;
    /// |estimate - closed_form| <= 4 std_error + bias_allowance
    bool within_band = true;
};

struct MartingaleReport {
    std::vector<double> grid;
    std::vector<double> means;
    std::vector<double> std_errors;
    double reference = 0.0;  // Phi_q(x) under the tested exponent
    double constancy_statistic = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
};

struct MultiplicativityReport {
    double direct = 0.0;   // MC transform(x, l)
    double product = 0.0;  // MC transform(x, a) * MC transform(a, l)
    double std_error = 0.0;
    double z_score = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
};

/// Mean and standard error of e^{-q time} 1{crossed} over the samples.
/// Killed-before-crossing samples contribute 0 (sub-probability transform).
std::pair<double, double> mc_laplace(std::span<const FirstPassageSample> samples, double q);

/// Runs the family sampler n times (deterministically chunked across
/// threads) and compares the Laplace estimate with the closed-form
/// transform. For pssMp/CSBP specs a second run at delta/2 provides the
/// additive bias allowance.
MCReport compare_mc_closed(const ProcessSpec& spec, double q, double x, double l,
                           std::uint64_t n, std::uint64_t seed, const SimOptions& opts = {},
                           int threads = 1, std::uint64_t stream_base = 0,
                           double closed_form_scale = 1.0);

/// E[Phi(X_{t wedge T}) e^{-q (t wedge T)} 1{alive}] on a time grid for the
/// Levy family; constant in t when Phi is the true scale function.
/// exponent_override replaces psi^{-1}(p+q) to drive negative controls.
MartingaleReport martingale_residuals(const LevySpec& spec, double q, double x, double l,
                                      std::span<const double> grid, std::uint64_t n,
                                      std::uint64_t seed, int threads = 1,
                                      std::optional<double> exponent_override = {});

/// Strong-Markov factorization: MC transform(x,l) against the product of two
/// independent MC estimates through the midpoint a.
MultiplicativityReport multiplicativity_check(const ProcessSpec& spec, double q, double x,
                                              double a, double l, std::uint64_t n,
                                              std::uint64_t seed, const SimOptions& opts = {},
                                              int threads = 1);

/// Deterministically chunked Monte Carlo driver: per-chunk streams and an
/// ordered merge make totals independent of the thread count. Exposed for
/// the CLI simulate command and tests.
struct McMoments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t n = 0;
    std::uint64_t n_crossed = 0;
};
McMoments run_laplace_mc(const ProcessSpec& spec, double q, double x, double l, std::uint64_t n,
                         std::uint64_t seed, std::uint64_t stream_base, const SimOptions& opts,
                         int threads);

constexpr std::uint64_t kStreamBlock = 1ull << 32;
constexpr std::uint64_t kMcChunkSize = 4096;

}  // namespace passage
