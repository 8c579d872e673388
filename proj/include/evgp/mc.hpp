#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "evgp/architecture.hpp"
#include "evgp/errors.hpp"
#include "evgp/net.hpp"
#include "evgp/rng.hpp"

namespace evgp {

// Power sums (count, sum x, sum x^2, sum x^3, sum x^4) per tracked quantity.
// Merge is componentwise addition: associative and commutative, equal to a
// single pass up to floating-point associativity.
struct SufficientStats {
    std::int64_t count = 0;
    std::vector<std::array<double, 4>> sums;  // per quantity

    explicit SufficientStats(std::size_t n_quantities = 0)
        : sums(n_quantities, std::array<double, 4>{0, 0, 0, 0}) {}

    void add(std::span<const double> obs) {
        ++count;
        for (std::size_t i = 0; i < sums.size(); ++i) {
            const double x = obs[i];
            const double x2 = x * x;
            sums[i][0] += x;
            sums[i][1] += x2;
            sums[i][2] += x2 * x;
            sums[i][3] += x2 * x2;
        }
    }

    double mean(std::size_t i) const { return sums[i][0] / count; }
};

inline SufficientStats merge(const SufficientStats& a, const SufficientStats& b) {
    if (a.sums.size() != b.sums.size())
        throw ConfigError("cannot merge sufficient stats tracking different quantities");
    SufficientStats out(a.sums.size());
    out.count = a.count + b.count;
    for (std::size_t i = 0; i < a.sums.size(); ++i)
        for (int c = 0; c < 4; ++c) out.sums[i][c] = a.sums[i][c] + b.sums[i][c];
    return out;
}

enum class EstimatorMethod { PlainMean, MedianOfMeans };

inline const char* to_string(EstimatorMethod m) {
    return m == EstimatorMethod::PlainMean ? "plain_mean" : "median_of_means";
}

// An estimated moment with uncertainty and provenance.
struct MomentResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    EstimatorMethod method = EstimatorMethod::PlainMean;
    std::string target;

    // Heavy-tail diagnostics: when the sample kurtosis of the observations
    // blows past the threshold, the plain mean is flagged and a median-of-
    // means estimate is reported alongside it.
    bool heavy_tail_flagged = false;
    double sample_kurtosis = 0.0;
    double mom_estimate = 0.0;
    double mom_std_error = 0.0;
};

struct McOptions {
    std::int64_t n_samples = 10000;
    std::uint64_t seed = 1;
    int workers = 1;
    std::int64_t block_size = 4096;  // fixed work unit; results never depend on workers
    int mom_blocks = 32;
    double kurtosis_flag_threshold = 1e3;
    // Optional per-sample dump: called as rows(sample_index, observations) in
    // strictly increasing index order after sampling finishes.
    std::function<void(std::int64_t, std::span<const double>)> dump;
};

namespace detail {

// Runs per_sample(i, out) for i in [0, n), accumulating stats in fixed-size
// blocks. Workers claim whole blocks; the final fold is in block order, so the
// result is byte-identical for any worker count.
template <class F>
inline std::vector<SufficientStats> run_blocked(std::int64_t n, std::size_t n_quantities,
                                                const McOptions& opts, F&& per_sample) {
    const std::int64_t bs = std::max<std::int64_t>(1, opts.block_size);
    const std::int64_t n_blocks = (n + bs - 1) / bs;
    std::vector<SufficientStats> blocks(static_cast<std::size_t>(n_blocks),
                                        SufficientStats(n_quantities));
    std::vector<std::vector<double>> dump_rows;
    if (opts.dump) dump_rows.resize(static_cast<std::size_t>(n));

    int workers = std::max(1, opts.workers);
    workers = std::min<std::int64_t>(workers, n_blocks);

    std::atomic<std::int64_t> next_block{0};
    auto work = [&]() {
        std::vector<double> obs(n_quantities);
        for (;;) {
            const std::int64_t b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            SufficientStats& stats = blocks[static_cast<std::size_t>(b)];
            const std::int64_t lo = b * bs;
            const std::int64_t hi = std::min(n, lo + bs);
            for (std::int64_t i = lo; i < hi; ++i) {
                per_sample(i, obs);
                stats.add(obs);
                if (opts.dump) dump_rows[static_cast<std::size_t>(i)] = obs;
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }

    if (opts.dump)
        for (std::int64_t i = 0; i < n; ++i)
            opts.dump(i, dump_rows[static_cast<std::size_t>(i)]);
    return blocks;
}

inline SufficientStats fold(const std::vector<SufficientStats>& blocks) {
    SufficientStats total(blocks.empty() ? 0 : blocks.front().sums.size());
    for (const auto& b : blocks) total = merge(total, b);
    return total;
}

inline MomentResult summarize(const std::vector<SufficientStats>& blocks, std::size_t i,
                              const McOptions& opts, std::string target) {
    const SufficientStats total = fold(blocks);
    const double n = static_cast<double>(total.count);
    const double m1 = total.sums[i][0] / n;
    const double m2 = total.sums[i][1] / n;
    const double m3 = total.sums[i][2] / n;
    const double m4 = total.sums[i][3] / n;

    MomentResult r;
    r.n_samples = total.count;
    r.target = std::move(target);
    r.estimate = m1;
    const double var = std::max(0.0, m2 - m1 * m1);
    r.std_error = std::sqrt(var / n);

    // central fourth moment from raw power sums
    const double c4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1 * m1 * m1 * m1;
    r.sample_kurtosis = var > 0.0 ? c4 / (var * var) : 0.0;

    if (r.sample_kurtosis > opts.kurtosis_flag_threshold && blocks.size() >= 2) {
        r.heavy_tail_flagged = true;
        // median of means over mom_blocks contiguous groups of blocks
        const int groups = std::min<int>(opts.mom_blocks, static_cast<int>(blocks.size()));
        std::vector<double> group_means;
        group_means.reserve(groups);
        const std::size_t per = (blocks.size() + groups - 1) / groups;
        for (std::size_t g = 0; g < blocks.size(); g += per) {
            double s = 0.0;
            std::int64_t c = 0;
            for (std::size_t b = g; b < std::min(blocks.size(), g + per); ++b) {
                s += blocks[b].sums[i][0];
                c += blocks[b].count;
            }
            if (c > 0) group_means.push_back(s / static_cast<double>(c));
        }
        std::vector<double> sorted = group_means;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t gn = sorted.size();
        r.mom_estimate = (gn % 2 == 1) ? sorted[gn / 2]
                                       : 0.5 * (sorted[gn / 2 - 1] + sorted[gn / 2]);
        double gm = 0.0;
        for (double v : group_means) gm += v;
        gm /= gn;
        double gvar = 0.0;
        for (double v : group_means) gvar += (v - gm) * (v - gm);
        gvar = gn > 1 ? gvar / (gn - 1) : 0.0;
        // rough scale: SE of a median of gn roughly-normal group means
        r.mom_std_error = 1.2533 * std::sqrt(gvar / static_cast<double>(gn));
    }
    return r;
}

inline void check_mc_preconditions(const Architecture& arch, const DistributionSpec& spec,
                                   std::span<const double> input, const McOptions& opts) {
    validate_spec(arch, spec);
    if (opts.n_samples < 2) throw ConfigError("Monte Carlo needs n_samples >= 2");
    if (static_cast<int>(input.size()) != arch.input_dim())
        throw ConfigError("input length does not match n_0");
    bool input_zero = true;
    for (double x : input)
        if (x != 0.0) input_zero = false;
    if (input_zero && spec.all_bias_zero())
        throw DegenerateInputError(
            "zero input with the zero-bias law: all gradients vanish identically");
}

inline std::uint64_t sample_seed(std::uint64_t seed, std::int64_t index) {
    return mix_key(seed, 0x5a3c1e, static_cast<std::uint64_t>(index));
}

}  // namespace detail

// MC estimates of E[Z^{2K}] for each K in k_list, at a fixed input. One sampled
// net is one observation of the statistic averaged over all n_0*n_d Jacobian
// entries (the entries are identically distributed; pooling them and treating
// the per-net average as the observation keeps the SE honest about their
// correlation). Deterministic for a fixed seed regardless of workers.
inline std::vector<MomentResult> estimate_moments(const Architecture& arch,
                                                  const DistributionSpec& spec,
                                                  std::span<const double> input,
                                                  std::span<const int> k_list,
                                                  const McOptions& opts) {
    detail::check_mc_preconditions(arch, spec, input, opts);
    for (int k : k_list)
        if (k < 1) throw ConfigError("moment order K must be >= 1");

    const std::size_t nq = k_list.size();
    auto per_sample = [&](std::int64_t i, std::vector<double>& obs) {
        const SampledNet net = instantiate(arch, spec, detail::sample_seed(opts.seed, i));
        const Matrix z = jacobian_backprop(net, input);
        std::fill(obs.begin(), obs.end(), 0.0);
        for (double v : z.data()) {
            const double z2 = v * v;
            for (std::size_t t = 0; t < nq; ++t) {
                double zp = z2;
                for (int e = 1; e < k_list[t]; ++e) zp *= z2;
                obs[t] += zp;
            }
        }
        const double m = static_cast<double>(z.data().size());
        for (double& o : obs) o /= m;
    };

    const auto blocks = detail::run_blocked(opts.n_samples, nq, opts, per_sample);
    std::vector<MomentResult> out;
    out.reserve(nq);
    for (std::size_t t = 0; t < nq; ++t)
        out.push_back(detail::summarize(blocks, t, opts,
                                        "E[Z^" + std::to_string(2 * k_list[t]) + "] arch=[" +
                                            arch.to_string() + "]"));
    return out;
}

// MC estimate of E[Var^[Z^2]]: per sampled net, the empirical variance of the
// squared entries over all M = n_0*n_d input-output pairs; mean over nets.
inline MomentResult estimate_empirical_variance(const Architecture& arch,
                                                const DistributionSpec& spec,
                                                std::span<const double> input,
                                                const McOptions& opts) {
    detail::check_mc_preconditions(arch, spec, input, opts);
    const std::int64_t m_pairs =
        static_cast<std::int64_t>(arch.input_dim()) * arch.output_dim();
    if (m_pairs < 2)
        throw ConfigError("empirical variance needs M = n_0*n_d >= 2 Jacobian entries");

    auto per_sample = [&](std::int64_t i, std::vector<double>& obs) {
        const SampledNet net = instantiate(arch, spec, detail::sample_seed(opts.seed, i));
        const Matrix z = jacobian_backprop(net, input);
        double mean_sq = 0.0;
        for (double v : z.data()) mean_sq += v * v;
        mean_sq /= static_cast<double>(z.data().size());
        double var = 0.0;
        for (double v : z.data()) {
            const double dlt = v * v - mean_sq;
            var += dlt * dlt;
        }
        obs[0] = var / static_cast<double>(z.data().size());  // >= 0 by construction
    };

    const auto blocks = detail::run_blocked(opts.n_samples, 1, opts, per_sample);
    return detail::summarize(blocks, 0, opts,
                             "E[Var^[Z^2]] arch=[" + arch.to_string() + "]");
}

// MC estimate of E[||J||_F^2] = E[sum_{p,q} Z^2]; equals n_d in expectation.
inline MomentResult estimate_frobenius(const Architecture& arch, const DistributionSpec& spec,
                                       std::span<const double> input, const McOptions& opts) {
    detail::check_mc_preconditions(arch, spec, input, opts);
    auto per_sample = [&](std::int64_t i, std::vector<double>& obs) {
        const SampledNet net = instantiate(arch, spec, detail::sample_seed(opts.seed, i));
        const Matrix z = jacobian_backprop(net, input);
        double s = 0.0;
        for (double v : z.data()) s += v * v;
        obs[0] = s;
    };
    const auto blocks = detail::run_blocked(opts.n_samples, 1, opts, per_sample);
    return detail::summarize(blocks, 0, opts,
                             "E[||J||_F^2] arch=[" + arch.to_string() + "]");
}

}  // namespace evgp
