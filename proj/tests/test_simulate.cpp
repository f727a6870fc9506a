// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "passage/scale.hpp"
#include "passage/simulate.hpp"
#include "passage/verify.hpp"

using namespace passage;

namespace {

LevySpec bm_spec() { return LevySpec{LevyTriplet{0.0, 1.0, {}, 0.0}}; }

double frequency_z(std::uint64_t crossed, std::uint64_t n, double expect) {
    const double p = double(crossed) / double(n);
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / double(n));
    return (p - expect) / se;
}

}  // namespace

TEST_CASE("inverse gaussian passage law") {
    Rng rng(RngStream{2024, 0});
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        auto [crossed, t] = inverse_gaussian_passage(0.0, 1.0, 1.0, 1e300, rng);
        const double w = crossed ? std::exp(-t) : 0.0;
        sum += w;
        sum_sq += w * w;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq - n * mean * mean) / (n - 1.0) / n);
    CHECK(std::abs(mean - std::exp(-std::sqrt(2.0))) <= 4.0 * se);

    // defective case: P(T < inf) = e^{-2 mu gap / sigma^2}
    Rng rng2(RngStream{2025, 0});
    std::uint64_t crossed = 0;
    const int m = 400000;
    for (int i = 0; i < m; ++i) {
        crossed += inverse_gaussian_passage(1.0, 1.0, 1.0, 1e300, rng2).first;
    }
    CHECK(std::abs(frequency_z(crossed, m, std::exp(-2.0))) <= 4.0);

    CHECK_THROWS_AS(inverse_gaussian_passage(0.0, 0.0, 1.0, 1.0, rng), std::domain_error);
}

TEST_CASE("deterministic drift segments") {
    Rng rng(RngStream{1, 0});
    // sigma = 0 branch: crossing exactly at gap/|mu|
    auto seg = diffusion_segment(-1.0, 0.0, 1.0, 5.0, rng);
    CHECK(seg.crossed);
    CHECK(seg.time == 1.0);
    auto seg2 = diffusion_segment(1.0, 0.0, 1.0, 5.0, rng);
    CHECK_FALSE(seg2.crossed);
    CHECK(seg2.endpoint == 5.0);
}

TEST_CASE("reproducibility of streams") {
    const LevySpec spec{LevyTriplet{-0.5, 1.0, JumpMeasure::exp_mixture({{0.7, 2.0}}), 0.2}};
    const LevySampler sampler(spec);
    Rng a(RngStream{77, 5});
    Rng b(RngStream{77, 5});
    for (int i = 0; i < 200; ++i) {
        const auto sa = sampler.sample(1.0, 0.0, a);
        const auto sb = sampler.sample(1.0, 0.0, b);
        CHECK(sa.crossed == sb.crossed);
        CHECK(sa.time == sb.time);  // bit identical
    }
    Rng c(RngStream{77, 6});
    bool differs = false;
    Rng a2(RngStream{77, 5});
    for (int i = 0; i < 50; ++i) {
        differs = differs || sampler.sample(1.0, 0.0, a2).time != sampler.sample(1.0, 0.0, c).time;
    }
    CHECK(differs);
}

TEST_CASE("levy sampler exact cases") {
    Rng rng(RngStream{3, 0});
    // pure negative drift: passage time (x - l)/c surely
    const LevySpec drift{LevyTriplet{-2.0, 0.0, {}, 0.0}};
    for (int i = 0; i < 10; ++i) {
        const auto s = sample_levy_first_passage(drift, 1.0, 0.0, rng);
        CHECK(s.crossed);
        CHECK(s.time == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(s.level_at_crossing == 0.0);
    }
    // x == l crosses immediately
    const auto at = sample_levy_first_passage(bm_spec(), 1.0, 1.0, rng);
    CHECK(at.crossed);
    CHECK(at.time == 0.0);
}

TEST_CASE("levy BM Laplace mean against the closed form") {
    const auto rep = compare_mc_closed(bm_spec(), 1.0, 1.0, 0.0, 200000, 404, {}, 2);
    CHECK(std::abs(rep.z_score) <= 4.0);
    CHECK(rep.bias_allowance == 0.0);
}

TEST_CASE("drift-to-infinity crossing frequency") {
    // negative drift plus big positive atoms: psi'(0+) < 0, crossing defective
    const LevySpec spec{LevyTriplet{-1.0, 0.0, JumpMeasure::atoms({{1.0, 2.0}}), 0.0}};
    const double root = psi_inverse(spec.triplet, 0.0).z;
    CHECK(root > 0.0);
    const McMoments m = run_laplace_mc(spec, 0.0, 1.0, 0.0, 200000, 1113, 0, {}, 2);
    CHECK(std::abs(frequency_z(m.n_crossed, m.n, std::exp(-root))) <= 4.0);
}

TEST_CASE("paths cross continuously at the barrier") {
    // no family may cross by a jump: the position at passage equals l
    Rng rng(RngStream{9, 1});
    const LevySpec levy{LevyTriplet{-0.5, 1.0, JumpMeasure::atoms({{1.0, 0.7}}), 0.1}};
    const PssmpSpec pssmp{LevyTriplet{-1.0, 1.0, {}, 0.3}, 1.0};
    const CsbpSpec csbp{LevyTriplet{-1.0, 1.0, {}, 0.15}, CsbpVariant::Extinct, 2.0};
    const LevySampler ls(levy);
    const PssmpSampler ps(pssmp);
    const CsbpSampler cs(csbp);
    for (int i = 0; i < 300; ++i) {
        const auto a = ls.sample(1.0, 0.0, rng);
        if (a.crossed) CHECK(std::abs(a.level_at_crossing - 0.0) <= 1e-9);
        const auto b = ps.sample(1.0, 0.0, rng);
        if (b.crossed) CHECK(std::abs(b.level_at_crossing - 0.0) <= 1e-9);
        const auto c = cs.sample(1.5, 0.6, rng);
        if (c.crossed) CHECK(std::abs(c.level_at_crossing - 0.6) <= 1e-9);
    }
}

TEST_CASE("segment no-crossing probability matches the reflection formula") {
    auto norm_cdf = [](double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); };
    for (auto [mu, gap, horizon] : {std::tuple{-0.5, 0.8, 1.0}, {0.7, 0.5, 2.0}, {0.0, 1.2, 1.5}}) {
        const double sigma = 1.0;
        const double v = sigma * sigma * horizon;
        const double sd = std::sqrt(v);
        const double p_nc = norm_cdf((gap + mu * horizon) / sd) -
                            std::exp(-2.0 * gap * mu / (sigma * sigma)) *
                                norm_cdf((mu * horizon - gap) / sd);
        Rng rng(RngStream{123, 7});
        const int n = 200000;
        int no_cross = 0;
        for (int i = 0; i < n; ++i) {
            no_cross += !diffusion_segment(mu, sigma, gap, horizon, rng).crossed;
        }
        const double p_hat = double(no_cross) / n;
        const double se = std::sqrt(p_nc * (1.0 - p_nc) / n);
        CAPTURE(mu);
        CHECK(std::abs(p_hat - p_nc) <= 4.0 * se);
    }
}

TEST_CASE("killed drift sampler closed cases") {
    Rng rng(RngStream{4, 0});
    // no killing: always crosses after the deterministic passage time
    KilledDriftSpec plain{ParametricFn::constant(1.0), ParametricFn::constant(0.0), 0.0, {}};
    for (int i = 0; i < 20; ++i) {
        const auto s = sample_killed_drift_passage(plain, 2.0, 0.5, rng);
        CHECK(s.crossed);
        CHECK(s.time == doctest::Approx(1.5).epsilon(1e-15));
    }
    // v(a) = a, x = e*l: unit passage time on the logarithmic clock
    KilledDriftSpec log_clock{ParametricFn::power(1.0, 1.0), ParametricFn::constant(0.0), 1.0,
                              Interval{0.0, std::numeric_limits<double>::infinity()}};
    const auto s = sample_killed_drift_passage(log_clock, std::exp(1.0) * 0.5, 0.5, rng);
    CHECK(s.crossed);
    CHECK(s.time == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("drifted pssmp crosses almost surely at q=0") {
    const PssmpSpec spec{LevyTriplet{-1.0, 1.0, {}, 0.0}, 1.0};
    const PssmpSampler sampler(spec);
    Rng rng(RngStream{8, 0});
    SimOptions opts;
    opts.delta = 5e-3;
    for (int i = 0; i < 2000; ++i) {
        CHECK(sampler.sample(1.0, 0.0, rng, opts).crossed);
    }
}

TEST_CASE("pssmp deterministic clock") {
    // xi = unit negative drift, alpha = 1: T = e^{-l} - e^{-x} exactly
    const PssmpSpec spec{LevyTriplet{-1.0, 0.0, {}, 0.0}, 1.0};
    Rng rng(RngStream{5, 0});
    SimOptions opts;
    opts.delta = 1e-3;
    const auto s = sample_pssmp_first_passage(spec, 1.0, 0.0, rng, opts);
    CHECK(s.crossed);
    CHECK(s.time == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("csbp deterministic clock and killing law") {
    // psi = b z: driving path x - b u, T = log(x/l)/b surely
    const CsbpSpec det{LevyTriplet{-2.0, 0.0, {}, 0.0}, CsbpVariant::Recurrent, 1.0};
    Rng rng(RngStream{6, 0});
    SimOptions opts;
    opts.delta = 1e-3;
    const auto s = sample_csbp_first_passage(det, 2.0, 0.5, rng, opts);
    CHECK(s.crossed);
    CHECK(s.time == doctest::Approx(std::log(4.0) / 2.0).epsilon(1e-6));

    const auto at = sample_csbp_first_passage(det, 0.7, 0.7, rng, opts);
    CHECK(at.crossed);
    CHECK(at.time == 0.0);
    CHECK_THROWS_AS(sample_csbp_first_passage(det, 1.0, 0.0, rng, opts), std::domain_error);

    // killing on the driving-Levy clock reproduces the branching-mechanism
    // transform e^{-z0 (x-l)} at q = 0 (z0 = psi^{-1}(p))
    const CsbpSpec killed{LevyTriplet{-1.0, 0.0, {}, 0.5}, CsbpVariant::Recurrent, 1.5};
    const McMoments m = run_laplace_mc(killed, 0.0, 1.0, 0.4, 200000, 21, 0, opts, 2);
    CHECK(std::abs(frequency_z(m.n_crossed, m.n, std::exp(-0.5 * 0.6))) <= 4.0);
}

TEST_CASE("defective crossing frequencies match the q=0 transform") {
    std::vector<ProcessSpec> specs = {
        LevySpec{LevyTriplet{-0.5, 1.0, JumpMeasure::exp_mixture({{0.7, 2.0}}), 0.2}},
        PssmpSpec{LevyTriplet{0.0, 1.0, {}, 0.5}, 1.0},
        CsbpSpec{LevyTriplet{-1.0, 1.0, {}, 0.15}, CsbpVariant::Extinct, 2.0},
        KilledDriftSpec{ParametricFn::constant(1.0), ParametricFn::constant(0.4), 0.0, {}},
    };
    std::vector<std::pair<double, double>> levels = {{1.0, 0.0}, {1.0, 0.0}, {1.5, 0.6}, {2.0, 1.0}};
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CAPTURE(family_name(specs[i]));
        const auto [x, l] = levels[i];
        const double expect = first_passage_transform(specs[i], 0.0, x, l);
        SimOptions opts;
        opts.delta = 1e-3;
        const McMoments m = run_laplace_mc(specs[i], 0.0, x, l, 100000, 31 + i, 0, opts, 2);
        CHECK(std::abs(frequency_z(m.n_crossed, m.n, expect)) <= 4.0);
    }
}

TEST_CASE("feller csbp Laplace mean against quadrature" * doctest::timeout(300)) {
    const CsbpSpec feller{LevyTriplet{0.0, 1.0, {}, 0.0}, CsbpVariant::Extinct, 1.0};
    SimOptions opts;
    opts.delta = 4e-3;
    const auto rep = compare_mc_closed(feller, 1.0, 1.0, 0.5, 20000, 51, opts, 2);
    CHECK(rep.within_band);
}

TEST_CASE("clock bias decays under delta halving" * doctest::timeout(600)) {
    // Richardson-style check: the delta vs delta/2 difference is statistical
    // noise at n = 1e5 for delta <= 1e-3.
    const CsbpSpec csbp{LevyTriplet{-1.0, 1.0, {}, 0.15}, CsbpVariant::Extinct, 2.0};
    const PssmpSpec pssmp{LevyTriplet{-1.0, 1.0, JumpMeasure::atoms({{0.5, 1.0}}), 0.3}, 1.0};
    const std::uint64_t n = 100000;
    for (int which = 0; which < 2; ++which) {
        ProcessSpec spec = which == 0 ? ProcessSpec{csbp} : ProcessSpec{pssmp};
        CAPTURE(family_name(spec));
        const double q = 1.0;
        const double x = which == 0 ? 1.5 : 1.0;
        const double l = which == 0 ? 0.6 : 0.0;
        SimOptions full, half;
        full.delta = 1e-3;
        half.delta = 5e-4;
        McMoments m1 = run_laplace_mc(spec, q, x, l, n, 61, 0, full, 2);
        McMoments m2 = run_laplace_mc(spec, q, x, l, n, 61, kStreamBlock, half, 2);
        const double mean1 = m1.sum / n, mean2 = m2.sum / n;
        const double var1 = (m1.sum_sq - n * mean1 * mean1) / (n - 1.0) / n;
        const double var2 = (m2.sum_sq - n * mean2 * mean2) / (n - 1.0) / n;
        CHECK(std::abs(mean1 - mean2) <= 3.0 * std::sqrt(var1 + var2));
    }
}

TEST_CASE("self-similar moment identity" * doctest::timeout(300)) {
    // E_x[e^{-alpha n X_t}] = sum_{k<=n} (a_{n-k}/a_n) e^{-(n-k) alpha x} t^k/k!
    // for drivers with psi'(0+) >= 0 and p = 0.
    const PssmpSpec spec{LevyTriplet{-0.3, 1.0, {}, 0.0}, 1.0};
    const PssmpSampler sampler(spec);
    const double x = 0.7, t = 0.3;
    auto psi = [&](double z) { return eval_psi(spec.triplet, z); };
    const double expect1 = std::exp(-x) + psi(1.0) * t;
    const double expect2 =
        std::exp(-2.0 * x) + psi(2.0) * t * std::exp(-x) + psi(1.0) * psi(2.0) * t * t / 2.0;

    SimOptions opts;
    opts.delta = 1e-3;
    const int n = 40000;
    double s1 = 0, s1sq = 0, s2 = 0, s2sq = 0;
    Rng rng(RngStream{71, 0});
    for (int i = 0; i < n; ++i) {
        const auto [alive, value] = sampler.sample_marginal(x, t, rng, opts);
        const double w1 = alive ? std::exp(-value) : 0.0;
        const double w2 = alive ? std::exp(-2.0 * value) : 0.0;
        s1 += w1;
        s1sq += w1 * w1;
        s2 += w2;
        s2sq += w2 * w2;
    }
    const double m1 = s1 / n, se1 = std::sqrt((s1sq - n * m1 * m1) / (n - 1.0) / n);
    const double m2 = s2 / n, se2 = std::sqrt((s2sq - n * m2 * m2) / (n - 1.0) / n);
    // 4 SE plus a small allowance for the trapezoid clock bias
    CHECK(std::abs(m1 - expect1) <= 4.0 * se1 + 2e-3);
    CHECK(std::abs(m2 - expect2) <= 4.0 * se2 + 2e-3);
}

TEST_CASE("martingale grid sampler marginals") {
    // at a fixed time, E[e^{-w X_t} e^{-q t}; alive] with w = psi^{-1}(p+q)
    // equals e^{-w x} when the path is stopped at the barrier
    const LevySpec spec{LevyTriplet{-0.5, 1.0, JumpMeasure::exp_mixture({{0.7, 2.0}}), 0.2}};
    const LevySampler sampler(spec);
    const double q = 1.0, x = 1.0, l = -0.5;
    const double w = psi_inverse(spec.triplet, spec.triplet.p + q).z;
    const std::vector<double> grid = {0.25, 0.8};
    Rng rng(RngStream{81, 0});
    const int n = 50000;
    double sum[2] = {0, 0}, sum_sq[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
        const auto path = sampler.sample_grid(x, l, grid, rng);
        for (int j = 0; j < 2; ++j) {
            double m;
            if (path.cross_time <= grid[j]) {
                m = std::exp(-w * l - q * path.cross_time);
            } else if (path.kill_time <= grid[j]) {
                m = 0.0;
            } else {
                m = std::exp(-w * path.positions[j] - q * grid[j]);
            }
            sum[j] += m;
            sum_sq[j] += m * m;
        }
    }
    for (int j = 0; j < 2; ++j) {
        const double mean = sum[j] / n;
        const double se = std::sqrt((sum_sq[j] - n * mean * mean) / (n - 1.0) / n);
        CHECK(std::abs(mean - std::exp(-w * x)) <= 4.0 * se);
    }
}
