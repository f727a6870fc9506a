// SPDX-License-Identifier: Apache-2.0
#include "passage/verify.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace passage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct ChunkMoments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t n_crossed = 0;
};

// Runs fn once per sample, chunked into fixed-size blocks with one RNG
// stream per block. The merge is in block order, so the totals are
// bit-identical for any thread count.
template <class Fn>
McMoments run_chunked(std::uint64_t n, std::uint64_t seed, std::uint64_t stream_base,
                      int threads, Fn&& fn) {
    const std::uint64_t chunks = (n + kMcChunkSize - 1) / kMcChunkSize;
    std::vector<ChunkMoments> partial(chunks);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::uint64_t count = std::min(kMcChunkSize, n - c * kMcChunkSize);
            Rng rng(RngStream{seed, stream_base + c});
            ChunkMoments& m = partial[c];
            for (std::uint64_t i = 0; i < count; ++i) {
                const auto [weight, crossed] = fn(rng);
                m.sum += weight;
                m.sum_sq += weight * weight;
                m.n_crossed += crossed ? 1 : 0;
            }
        }
    };
    const int nthreads = std::max(1, threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    McMoments total;
    total.n = n;
    for (const auto& m : partial) {
        total.sum += m.sum;
        total.sum_sq += m.sum_sq;
        total.n_crossed += m.n_crossed;
    }
    return total;
}

std::pair<double, double> mean_and_se(const McMoments& m) {
    if (m.n == 0) throw ValidationError("mc estimate: empty input");
    const double mean = m.sum / double(m.n);
    if (m.n < 2) return {mean, 0.0};
    double var = (m.sum_sq - double(m.n) * mean * mean) / double(m.n - 1);
    if (var < 0.0) var = 0.0;
    return {mean, std::sqrt(var / double(m.n))};
}

SimOptions capped(const SimOptions& opts, double q) {
    SimOptions o = opts;
    if (q > 0.0) o.clock_cap = std::min(o.clock_cap, 45.0 / q);
    return o;
}

}  // namespace

std::pair<double, double> mc_laplace(std::span<const FirstPassageSample> samples, double q) {
    if (samples.empty()) throw ValidationError("mc_laplace: empty input");
    McMoments m;
    m.n = samples.size();
    for (const auto& s : samples) {
        const double w = s.crossed ? std::exp(-q * s.time) : 0.0;
        m.sum += w;
        m.sum_sq += w * w;
        m.n_crossed += s.crossed ? 1 : 0;
    }
    return mean_and_se(m);
}

McMoments run_laplace_mc(const ProcessSpec& spec, double q, double x, double l, std::uint64_t n,
                         std::uint64_t seed, std::uint64_t stream_base, const SimOptions& opts,
                         int threads) {
    validate_spec(spec);
    const SimOptions run_opts = capped(opts, q);
    return std::visit(
        [&](const auto& s) -> McMoments {
            using T = std::decay_t<decltype(s)>;
            auto draw = [&](const auto& sampler) {
                return run_chunked(n, seed, stream_base, threads, [&](Rng& rng) {
                    const FirstPassageSample fp = sampler.sample(x, l, rng, run_opts);
                    return std::pair<double, bool>{
                        fp.crossed ? std::exp(-q * fp.time) : 0.0, fp.crossed};
                });
            };
            if constexpr (std::is_same_v<T, LevySpec>) {
                return draw(LevySampler(s));
            } else if constexpr (std::is_same_v<T, PssmpSpec>) {
                return draw(PssmpSampler(s));
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                return draw(CsbpSampler(s));
            } else {
                return draw(KilledDriftSampler(s));
            }
        },
        spec);
}

MCReport compare_mc_closed(const ProcessSpec& spec, double q, double x, double l,
                           std::uint64_t n, std::uint64_t seed, const SimOptions& opts,
                           int threads, std::uint64_t stream_base, double closed_form_scale) {
    if (n < 1000) throw ValidationError("compare_mc_closed: n must be >= 1000");
    const auto t0 = std::chrono::steady_clock::now();
    MCReport report;
    report.n = n;
    report.seed = seed;
    report.closed_form = first_passage_transform(spec, q, x, l) * closed_form_scale;

    const McMoments m = run_laplace_mc(spec, q, x, l, n, seed, stream_base, opts, threads);
    std::tie(report.estimate, report.std_error) = mean_and_se(m);

    const bool discretized = std::holds_alternative<PssmpSpec>(spec) ||
                             std::holds_alternative<CsbpSpec>(spec);
    if (discretized) {
        SimOptions half = opts;
        half.delta = 0.5 * opts.delta;
        const McMoments m2 =
            run_laplace_mc(spec, q, x, l, n, seed, stream_base + kStreamBlock, half, threads);
        report.bias_allowance = std::abs(report.estimate - mean_and_se(m2).first);
    }

    const double diff = report.estimate - report.closed_form;
    report.z_score = report.std_error > 0.0 ? diff / report.std_error
                                            : (diff == 0.0 ? 0.0 : std::copysign(kInf, diff));
    report.within_band =
        std::abs(diff) <= 4.0 * report.std_error + report.bias_allowance;
    report.wall_time = seconds_since(t0);
    return report;
}

MartingaleReport martingale_residuals(const LevySpec& spec, double q, double x, double l,
                                      std::span<const double> grid, std::uint64_t n,
                                      std::uint64_t seed, int threads,
                                      std::optional<double> exponent_override) {
    if (!(q > 0.0)) throw std::domain_error("martingale_residuals: q must be > 0");
    if (l > x) throw std::domain_error("martingale_residuals: requires l <= x");
    for (std::size_t j = 1; j < grid.size(); ++j) {
        if (!(grid[j] > grid[j - 1])) {
            throw ValidationError("martingale_residuals: grid must be strictly increasing");
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const double w = exponent_override.value_or(psi_inverse(spec.triplet, spec.triplet.p + q).z);
    auto phi = [w](double y) { return std::exp(-w * y); };

    const LevySampler sampler(spec);
    const std::uint64_t chunks = (n + kMcChunkSize - 1) / kMcChunkSize;
    const std::size_t slots = grid.size();
    std::vector<std::vector<ChunkMoments>> partial(chunks,
                                                   std::vector<ChunkMoments>(slots));
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::uint64_t count = std::min(kMcChunkSize, n - c * kMcChunkSize);
            Rng rng(RngStream{seed, c});
            for (std::uint64_t i = 0; i < count; ++i) {
                const auto path = sampler.sample_grid(x, l, grid, rng);
                for (std::size_t j = 0; j < slots; ++j) {
                    double m;
                    if (path.cross_time <= grid[j]) {
                        m = phi(l) * std::exp(-q * path.cross_time);
                    } else if (path.kill_time <= grid[j]) {
                        m = 0.0;
                    } else {
                        m = phi(path.positions[j]) * std::exp(-q * grid[j]);
                    }
                    partial[c][j].sum += m;
                    partial[c][j].sum_sq += m * m;
                }
            }
        }
    };
    const int nthreads = std::max(1, threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    MartingaleReport report;
    report.grid.assign(grid.begin(), grid.end());
    report.n = n;
    report.seed = seed;
    report.reference = phi(x);
    report.means.resize(slots);
    report.std_errors.resize(slots);
    for (std::size_t j = 0; j < slots; ++j) {
        McMoments m;
        m.n = n;
        for (std::uint64_t c = 0; c < chunks; ++c) {
            m.sum += partial[c][j].sum;
            m.sum_sq += partial[c][j].sum_sq;
        }
        std::tie(report.means[j], report.std_errors[j]) = mean_and_se(m);
        const double diff = std::abs(report.means[j] - report.reference);
        // zero-variance (deterministic) marginals count as constant up to
        // floating-point rounding of the exponentials
        const double z = report.std_errors[j] > 0.0
                             ? diff / report.std_errors[j]
                             : (diff <= 1e-12 * std::max(1.0, std::abs(report.reference))
                                    ? 0.0
                                    : kInf);
        report.constancy_statistic = std::max(report.constancy_statistic, z);
    }
    report.wall_time = seconds_since(t0);
    return report;
}

MultiplicativityReport multiplicativity_check(const ProcessSpec& spec, double q, double x,
                                              double a, double l, std::uint64_t n,
                                              std::uint64_t seed, const SimOptions& opts,
                                              int threads) {
    if (!(l <= a && a <= x)) {
        throw std::domain_error("multiplicativity_check: requires l <= a <= x");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto [full, se_full] =
        mean_and_se(run_laplace_mc(spec, q, x, l, n, seed, 0, opts, threads));
    const auto [upper, se_upper] =
        mean_and_se(run_laplace_mc(spec, q, x, a, n, seed, kStreamBlock, opts, threads));
    const auto [lower, se_lower] =
        mean_and_se(run_laplace_mc(spec, q, a, l, n, seed, 2 * kStreamBlock, opts, threads));

    MultiplicativityReport report;
    report.n = n;
    report.seed = seed;
    report.direct = full;
    report.product = upper * lower;
    const double var = se_full * se_full + upper * upper * se_lower * se_lower +
                       lower * lower * se_upper * se_upper;
    report.std_error = std::sqrt(var);
    const double diff = report.direct - report.product;
    report.z_score = report.std_error > 0.0 ? diff / report.std_error
                                            : (diff == 0.0 ? 0.0 : std::copysign(kInf, diff));
    report.wall_time = seconds_since(t0);
    return report;
}

}  // namespace passage
