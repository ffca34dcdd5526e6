// monte_carlo.hpp: Parallel, reproducible sampling drivers.
//
// Draw s uses stream (seed, stream_offset + s). Draws are grouped into fixed
// chunks by index; workers process whole chunks and the chunk estimates are
// merged in a pairwise tree fixed by chunk index. Results are therefore
// bitwise identical for any worker count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "meanforce/estimator.hpp"
#include "meanforce/noise.hpp"
#include "meanforce/quench.hpp"

namespace meanforce {

struct SamplerOptions {
    std::int64_t samples = 100000; // independent noise draws (streams)
    std::uint64_t seed = 1;
    bool antithetic = true;        // evaluate xi and -xi for every draw
    std::uint64_t stream_offset = 0;
    int threads = 0;               // 0 = auto
};

inline constexpr std::int64_t kChunkSize = 2048;

// 0 = auto: hardware concurrency, capped by MEANFORCE_THREADS when set and > 0.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("MEANFORCE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

namespace detail {

template <class Body>
void for_each_chunk(std::int64_t num_chunks, int threads, Body&& body) {
    threads = static_cast<int>(std::min<std::int64_t>(std::max(threads, 1), num_chunks));
    if (threads <= 1) {
        for (std::int64_t c = 0; c < num_chunks; ++c) body(c);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::int64_t c = next++; c < num_chunks; c = next++) {
                try {
                    body(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = num_chunks;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

inline DensityEstimate tree_merge(std::vector<DensityEstimate> parts) {
    while (parts.size() > 1) {
        std::vector<DensityEstimate> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
            next.push_back(merge(parts[i], parts[i + 1]));
        if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

} // namespace detail

struct DensityRun {
    DensityEstimate estimate;
    WeightDiagnostics weights;
};

// One antithetic-averaged (or plain) hermitized propagator per draw.
inline QuenchedSample sample_unit(const SystemModel& sys, const NoiseFactor& factor,
                                  RandomStream& rng, bool antithetic) {
    const double beta = factor.grid().beta();
    if (sys.commuting()) {
        const double x = sample_integrated_field(factor, rng);
        QuenchedSample u = commuting_propagator(sys, x, beta);
        if (antithetic)
            u.propagator = 0.5 * (u.propagator + commuting_propagator(sys, -x, beta).propagator);
        return u;
    }
    const NoisePath path = sample_path(factor, rng);
    QuenchedSample u = hermitize(propagate(sys, path));
    if (antithetic)
        u.propagator =
            0.5 * (u.propagator + hermitize(propagate(sys, antithetic_pair(path))).propagator);
    return u;
}

inline DensityRun sample_density(const SystemModel& sys, const NoiseFactor& factor,
                                 const SamplerOptions& opt) {
    if (opt.samples < 2) throw ContractViolation("sample_density: need at least two samples");
    const std::int64_t num_chunks = (opt.samples + kChunkSize - 1) / kChunkSize;
    std::vector<DensityEstimate> parts(static_cast<std::size_t>(num_chunks),
                                       DensityEstimate(sys.dim()));
    std::vector<std::vector<double>> weights(static_cast<std::size_t>(num_chunks));

    detail::for_each_chunk(num_chunks, resolve_threads(opt.threads), [&](std::int64_t c) {
        const std::int64_t begin = c * kChunkSize;
        const std::int64_t end = std::min(opt.samples, begin + kChunkSize);
        DensityEstimate est(sys.dim());
        std::vector<double>& w = weights[static_cast<std::size_t>(c)];
        w.reserve(static_cast<std::size_t>(end - begin));
        for (std::int64_t s = begin; s < end; ++s) {
            RandomStream rng(opt.seed, opt.stream_offset + static_cast<std::uint64_t>(s));
            const QuenchedSample u = sample_unit(sys, factor, rng, opt.antithetic);
            est.add(u.propagator);
            w.push_back(u.propagator.trace().real());
        }
        est.record_streams({opt.stream_offset + static_cast<std::uint64_t>(begin),
                            opt.stream_offset + static_cast<std::uint64_t>(end)});
        parts[static_cast<std::size_t>(c)] = std::move(est);
    });

    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(opt.samples));
    for (const auto& w : weights) all.insert(all.end(), w.begin(), w.end());
    return {detail::tree_merge(std::move(parts)), weight_diagnostics(std::move(all))};
}

// Statistics of X = int xi over sampled paths.
struct FieldVarianceRun {
    double variance = 0.0; // sample Var(X)
    double std_error = 0.0;   // standard error of the variance estimate
    double mean = 0.0;
    std::int64_t draws = 0;
    StreamRange streams;
};

// With antithetic pairing the sample mean is exactly zero and each draw
// contributes the unit X^2; otherwise the unbiased sample variance is used
// and the unit is (X - mean)^2.
inline FieldVarianceRun sample_field_variance(const NoiseFactor& factor, const SamplerOptions& opt) {
    if (opt.samples < 2) throw ContractViolation("sample_field_variance: need >= 2 samples");
    const std::int64_t num_chunks = (opt.samples + kChunkSize - 1) / kChunkSize;
    std::vector<double> xs(static_cast<std::size_t>(opt.samples));
    detail::for_each_chunk(num_chunks, resolve_threads(opt.threads), [&](std::int64_t c) {
        const std::int64_t begin = c * kChunkSize;
        const std::int64_t end = std::min(opt.samples, begin + kChunkSize);
        for (std::int64_t s = begin; s < end; ++s) {
            RandomStream rng(opt.seed, opt.stream_offset + static_cast<std::uint64_t>(s));
            xs[static_cast<std::size_t>(s)] = integrated_field(sample_path(factor, rng));
        }
    });

    FieldVarianceRun out;
    out.draws = opt.samples;
    out.streams = {opt.stream_offset, opt.stream_offset + static_cast<std::uint64_t>(opt.samples)};
    const double n = static_cast<double>(opt.samples);
    double mean = 0.0;
    if (!opt.antithetic) {
        for (double x : xs) mean += x;
        mean /= n;
    }
    double unit_mean = 0.0, unit_m2 = 0.0;
    std::int64_t k = 0;
    for (double x : xs) {
        const double unit = (x - mean) * (x - mean);
        ++k;
        const double delta = unit - unit_mean;
        unit_mean += delta / static_cast<double>(k);
        unit_m2 += delta * (unit - unit_mean);
    }
    out.mean = mean;
    out.variance = opt.antithetic ? unit_mean : unit_mean * n / (n - 1.0);
    out.std_error = std::sqrt(unit_m2 / (n - 1.0) / n);
    return out;
}

} // namespace meanforce
