#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "evgp/architecture.hpp"
#include "evgp/distributions.hpp"
#include "evgp/errors.hpp"
#include "evgp/rational.hpp"
#include "evgp/rng.hpp"

namespace evgp {

// ---------------------------------------------------------------------------
// Exact-rational path-collection oracle.
//
// E[prod_m Z_{p_m,q_m}^{2K_m}] = sum over ordered tuples of 2K paths (with the
// prescribed endpoints) of prod_j C_j, where per layer
//   C_j = (1/2)^{#distinct nodes at layer j} * prod_edges mu^{(j)}_{multiplicity}.
// Collections with any odd edge multiplicity contribute exactly 0 because the
// weight laws are symmetric. Everything is evaluated in exact rational
// arithmetic; the enumeration can be partitioned across workers and the merge
// is exact, so results are bit-identical for any worker count.
// ---------------------------------------------------------------------------

struct MixedTerm {
    int p = 1;  // input neuron, 1-based
    int q = 1;  // output neuron, 1-based
    int K = 1;  // contributes Z_{p,q}^{2K}
};

struct OracleOptions {
    double guard = 1e8;  // max path collections to evaluate
    int workers = 1;
};

namespace detail {

constexpr int kMaxOraclePaths = 12;  // 2K at most; the guard bites long before this

struct LayerCoeffCache {
    const WeightLaw* law = nullptr;
    std::unordered_map<std::uint64_t, Rational> table;

    // coefficient for a layer whose edge multiplicities (all even) sort to
    // `mults` and whose target layer has `distinct` occupied neurons
    const Rational& get(int distinct, std::span<const int> mults) {
        std::uint64_t key = static_cast<std::uint64_t>(distinct);
        for (int m : mults) key = (key << 4) | static_cast<std::uint64_t>(m);
        auto it = table.find(key);
        if (it != table.end()) return it->second;
        Rational v = rational_pow(frac(1, 2), static_cast<unsigned>(distinct));
        for (int m : mults) v *= law->moment(m);
        return table.emplace(key, std::move(v)).first->second;
    }
};

struct OracleProblem {
    const Architecture* arch;
    const DistributionSpec* spec;
    std::vector<int> start;  // per path, 0-based input neuron
    std::vector<int> end;    // per path, 0-based output neuron
    int n_paths = 0;

    double collections() const {
        double c = 1.0;
        for (std::size_t j = 1; j + 1 < arch->widths().size(); ++j)
            c *= std::pow(static_cast<double>(arch->width(j)), n_paths);
        return c;
    }
};

// Evaluates prod_j C_j for the collection whose hidden nodes are given by
// digits[k * (d-1) + (j-1)]; returns 0 early on the first odd multiplicity.
inline Rational collection_coefficient(const OracleProblem& prob,
                                       std::span<const int> digits,
                                       std::vector<LayerCoeffCache>& caches) {
    const std::size_t d = prob.arch->depth();
    const int n = prob.n_paths;
    std::array<int, kMaxOraclePaths> prev{}, cur{};
    std::array<int, kMaxOraclePaths> mults{};
    std::array<bool, kMaxOraclePaths> used{};

    for (int k = 0; k < n; ++k) cur[k] = prob.start[k];

    Rational out(1);
    for (std::size_t j = 1; j <= d; ++j) {
        for (int k = 0; k < n; ++k) {
            prev[k] = cur[k];
            cur[k] = (j == d) ? prob.end[k] : digits[static_cast<std::size_t>(k) * (d - 1) + (j - 1)];
        }
        // group identical edges, tracking multiplicities and distinct targets
        int n_edges = 0;
        int distinct_targets = 0;
        used.fill(false);
        for (int k = 0; k < n; ++k) {
            if (used[k]) continue;
            bool new_target = true;
            for (int t = 0; t < k; ++t)
                if (cur[t] == cur[k]) { new_target = false; break; }
            if (new_target) ++distinct_targets;
            int mult = 0;
            for (int t = k; t < n; ++t) {
                if (!used[t] && prev[t] == prev[k] && cur[t] == cur[k]) {
                    used[t] = true;
                    ++mult;
                }
            }
            if (mult & 1) return Rational(0);  // odd moment of a symmetric law
            mults[n_edges++] = mult;
        }
        std::sort(mults.begin(), mults.begin() + n_edges, std::greater<int>());
        out *= caches[j - 1].get(distinct_targets, std::span<const int>(mults.data(), n_edges));
        if (out == 0) return out;
    }
    return out;
}

inline Rational oracle_sum_range(const OracleProblem& prob, std::uint64_t begin,
                                 std::uint64_t end_index) {
    const std::size_t d = prob.arch->depth();
    const std::size_t n_digits = static_cast<std::size_t>(prob.n_paths) * (d - 1);

    std::vector<LayerCoeffCache> caches(d);
    for (std::size_t j = 1; j <= d; ++j) caches[j - 1].law = &prob.spec->weights(j);

    std::vector<int> radix(n_digits);
    for (int k = 0; k < prob.n_paths; ++k)
        for (std::size_t j = 1; j < d; ++j)
            radix[static_cast<std::size_t>(k) * (d - 1) + (j - 1)] = prob.arch->width(j);

    // position the odometer at `begin` (mixed-radix decode)
    std::vector<int> digits(n_digits, 0);
    std::uint64_t idx = begin;
    for (std::size_t i = 0; i < n_digits; ++i) {
        digits[i] = static_cast<int>(idx % radix[i]);
        idx /= radix[i];
    }

    Rational sum(0);
    for (std::uint64_t c = begin; c < end_index; ++c) {
        sum += collection_coefficient(prob, digits, caches);
        std::size_t i = 0;
        while (i < n_digits && ++digits[i] == radix[i]) digits[i++] = 0;
    }
    return sum;
}

inline Rational oracle_run(const OracleProblem& prob, const OracleOptions& opts) {
    const double cost = prob.collections();
    if (cost > opts.guard)
        throw GuardExceededError("oracle would enumerate " + std::to_string(cost) +
                                     " path collections, over the guard of " +
                                     std::to_string(opts.guard),
                                 cost);
    const std::uint64_t total = static_cast<std::uint64_t>(cost + 0.5);
    if (total == 0) return Rational(0);

    int workers = std::max(1, opts.workers);
    if (static_cast<std::uint64_t>(workers) > total) workers = static_cast<int>(total);
    if (workers == 1 || prob.arch->depth() == 1)
        return oracle_sum_range(prob, 0, total);

    std::vector<Rational> partial(workers, Rational(0));
    std::vector<std::thread> threads;
    const std::uint64_t chunk = total / workers;
    for (int w = 0; w < workers; ++w) {
        std::uint64_t b = chunk * w;
        std::uint64_t e = (w == workers - 1) ? total : chunk * (w + 1);
        threads.emplace_back(
            [&prob, &partial, w, b, e] { partial[w] = oracle_sum_range(prob, b, e); });
    }
    for (auto& t : threads) t.join();
    Rational sum(0);
    for (const auto& r : partial) sum += r;  // exact, so any merge order agrees
    return sum;
}

}  // namespace detail

// E[prod_m Z_{p_m,q_m}^{2K_m}] over ordered collections with exactly 2K_m
// paths from p_m to q_m, in exact rational arithmetic.
inline Rational oracle_mixed_moment(const Architecture& arch, const DistributionSpec& spec,
                                    std::span<const MixedTerm> terms,
                                    const OracleOptions& opts = {}) {
    validate_spec(arch, spec);
    detail::OracleProblem prob{&arch, &spec, {}, {}, 0};
    for (const MixedTerm& t : terms) {
        if (t.K < 0) throw ConfigError("mixed moment exponent K must be >= 0");
        if (t.p < 1 || t.p > arch.input_dim() || t.q < 1 || t.q > arch.output_dim())
            throw ConfigError("moment endpoint out of range");
        for (int i = 0; i < 2 * t.K; ++i) {
            prob.start.push_back(t.p - 1);
            prob.end.push_back(t.q - 1);
        }
    }
    prob.n_paths = static_cast<int>(prob.start.size());
    if (prob.n_paths == 0) return Rational(1);  // empty product
    if (prob.n_paths > detail::kMaxOraclePaths)
        throw ConfigError("total path count 2*sum(K_m) exceeds the oracle's supported size");
    return detail::oracle_run(prob, opts);
}

// E[Z_{p,q}^{2K}] via Theorem-style path enumeration.
inline Rational oracle_moment(const Architecture& arch, const DistributionSpec& spec, int p,
                              int q, int K, const OracleOptions& opts = {}) {
    if (K < 1) throw ConfigError("moment order K must be >= 1");
    MixedTerm t{p, q, K};
    return oracle_mixed_moment(arch, spec, std::span<const MixedTerm>(&t, 1), opts);
}

// E[Z_{p,q}^2] = 1/n_0 for every conforming spec: the two paths must coincide,
// and (1/2) * mu_2^{(j)} = 1/n_{j-1} telescopes against the path count.
inline Rational exact_second_moment(const Architecture& arch) {
    return frac(1, arch.input_dim());
}

// ---------------------------------------------------------------------------
// Transfer-matrix dynamic programs for fourth-order moments.
//
// A nonzero collection of 4 paths occupies each layer with even multiplicity,
// so per layer it is either collapsed onto one neuron or split 2-2 across two.
// Propagating that state layer by layer turns the path sum into a product of
// 2x2 transfers; the orderings factor A = 3^{#(2->1) transitions} is folded
// into the (2,1) coefficient. For mixed moments E[Z^2 Z^2] the split state
// additionally remembers whether the 2-2 pairing matches the endpoint pairing
// (paths of the first factor vs. paths of the second): a split with any other
// pairing can never reach a distinct-endpoint boundary. States:
//   C  - all four paths on one neuron
//   S1 - split 2-2 with the endpoint-consistent pairing
//   S2 - split 2-2 with either of the two other pairings (lumped)
// Hidden-layer neuron multiplicities: m(C) = n_j, m(S*) = n_j (n_j - 1).
// ---------------------------------------------------------------------------

struct DpValue {
    double log_value = 0.0;  // natural log of the (positive) moment
    double value() const { return std::exp(log_value); }
    double relative_to(double other) const { return std::abs(value() / other - 1.0); }
};

struct DpOptions {
    // Test hook: scales the transfer coefficients so verification harnesses
    // can prove they would catch a wrong reduction on any architecture.
    double coeff_perturbation = 0.0;
};

namespace detail {

struct LayerMoments {
    double mu2sq;  // (mu_2^{(j)})^2
    double mu4;    // mu_4^{(j)}
};

inline LayerMoments layer_moments(const DistributionSpec& spec, std::size_t j) {
    double mu2 = to_double(spec.weights(j).moment(2));
    double mu4 = to_double(spec.weights(j).moment(4));
    return {mu2 * mu2, mu4};
}

class LogScale {
  public:
    void accumulate(double log_term) {
        // Kahan-compensated so thousands of layers stay at full precision
        double y = log_term - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double total() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace detail

// E[Z_{p,q}^4], exact up to floating-point rounding of the transfer products,
// evaluated in log space. The value does not depend on (p, q).
// Per-layer coefficients: c(1,1) = mu4/2, c(2,1) = (3/2) mu2^2,
// c(1,2) = c(2,2) = mu2^2 / 4, with A(Gamma) = 3 per collapse folded into the
// (2,1) entry; hidden multiplicities n_j and n_j(n_j - 1).
inline DpValue dp_fourth_moment(const Architecture& arch, const DistributionSpec& spec,
                                int p = 1, int q = 1, const DpOptions& opts = {}) {
    validate_spec(arch, spec);
    if (p < 1 || p > arch.input_dim() || q < 1 || q > arch.output_dim())
        throw ConfigError("moment endpoint out of range");

    const double bug = 1.0 + opts.coeff_perturbation;
    double vc = 1.0, vs = 0.0;  // collapsed / split mass, s_0 = 1
    detail::LogScale scale;
    for (std::size_t j = 1; j + 1 <= arch.depth(); ++j) {
        const auto m = detail::layer_moments(spec, j);
        const double n = static_cast<double>(arch.width(j));
        const double c11 = m.mu4 / 2.0 * bug;
        const double c21 = 1.5 * m.mu2sq * bug;
        const double c12 = m.mu2sq / 4.0;
        const double nc = n * (c11 * vc + c21 * vs);
        const double ns = n * (n - 1.0) * (c12 * vc + c12 * vs);
        vc = nc;
        vs = ns;
        const double mx = std::max(vc, vs);
        vc /= mx;
        vs /= mx;
        scale.accumulate(std::log(mx));
    }
    const auto m = detail::layer_moments(spec, arch.depth());
    const double result = (m.mu4 / 2.0 * bug) * vc + 1.5 * m.mu2sq * bug * vs;
    return DpValue{scale.total() + std::log(result)};
}

// E[Z_{p1,q1}^2 Z_{p2,q2}^2] for (p1,q1) != (p2,q2), via the three-state DP
// with exact boundary vectors per endpoint case. Only the equality pattern of
// the endpoints matters. Validated against oracle_mixed_moment.
inline DpValue mixed_fourth_general(const Architecture& arch, const DistributionSpec& spec,
                                    int p1, int q1, int p2, int q2) {
    validate_spec(arch, spec);
    for (int p : {p1, p2})
        if (p < 1 || p > arch.input_dim()) throw ConfigError("input endpoint out of range");
    for (int q : {q1, q2})
        if (q < 1 || q > arch.output_dim()) throw ConfigError("output endpoint out of range");
    if (p1 == p2 && q1 == q2)
        throw ConfigError("mixed fourth moment needs two distinct (p, q) index pairs");

    const bool p_equal = (p1 == p2);
    const bool q_equal = (q1 == q2);

    // layer-0 boundary: collapsed when the paths share the input neuron,
    // otherwise split with the endpoint-consistent pairing
    double vc = p_equal ? 1.0 : 0.0;
    double vs1 = p_equal ? 0.0 : 1.0;
    double vs2 = 0.0;

    detail::LogScale scale;
    for (std::size_t j = 1; j + 1 <= arch.depth(); ++j) {
        const auto m = detail::layer_moments(spec, j);
        const double n = static_cast<double>(arch.width(j));
        const double c11 = m.mu4 / 2.0;
        const double q4 = m.mu2sq / 4.0;
        const double nc = n * (c11 * vc + 2.0 * q4 * (vs1 + vs2));
        const double ns1 = n * (n - 1.0) * q4 * (vc + vs1);
        const double ns2 = n * (n - 1.0) * q4 * (2.0 * vc + vs2);
        vc = nc;
        vs1 = ns1;
        vs2 = ns2;
        const double mx = std::max(vc, std::max(vs1, vs2));
        vc /= mx;
        vs1 /= mx;
        vs2 /= mx;
        scale.accumulate(std::log(mx));
    }

    const auto m = detail::layer_moments(spec, arch.depth());
    double result;
    if (q_equal) {
        // everything recollapses onto the shared output neuron
        result = (m.mu4 / 2.0) * vc + (m.mu2sq / 2.0) * (vs1 + vs2);
    } else {
        // the pairs must land on the two fixed distinct outputs; only the
        // endpoint-consistent pairing can do that
        result = (m.mu2sq / 4.0) * (vc + vs1);
    }
    return DpValue{scale.total() + std::log(result)};
}

// Same-output mixed moment E[Z_{p1,q}^2 Z_{p2,q}^2], p1 != p2 (needs n_0 >= 2).
inline DpValue mixed_fourth_same_output(const Architecture& arch, const DistributionSpec& spec) {
    if (arch.input_dim() < 2)
        throw ConfigError("same-output mixed moment needs n_0 >= 2 distinct input neurons");
    return mixed_fourth_general(arch, spec, 1, 1, 2, 1);
}

// ---------------------------------------------------------------------------
// Expected empirical variance of the squared Jacobian entries:
//   E[Var^[Z^2]] = (1/M^2) sum_{m1 != m2} (E[Z^4] - E[Z^2_{m1} Z^2_{m2}]),
// with the M(M-1) ordered pairs split by their endpoint-equality pattern.
// ---------------------------------------------------------------------------

struct EmpiricalVarianceExact {
    double value = 0.0;
    double log_value = 0.0;  // -inf when value == 0
    bool degenerate = false;
    std::string notice;
};

inline EmpiricalVarianceExact expected_empirical_variance_exact(const Architecture& arch,
                                                                const DistributionSpec& spec) {
    validate_spec(arch, spec);
    const double n0 = arch.input_dim();
    const double nd = arch.output_dim();
    const double m_pairs = n0 * nd;
    if (m_pairs < 2.0) {
        EmpiricalVarianceExact out;
        out.degenerate = true;
        out.log_value = -std::numeric_limits<double>::infinity();
        out.notice =
            "M = n_0 * n_d = 1: the empirical variance of a single Jacobian entry is "
            "identically 0";
        return out;
    }

    const double log_e4 = dp_fourth_moment(arch, spec).log_value;

    const double cnt_same_q = nd * n0 * (n0 - 1.0);
    const double cnt_same_p = n0 * nd * (nd - 1.0);
    const double cnt_distinct = n0 * (n0 - 1.0) * nd * (nd - 1.0);

    // assemble (1/M^2) * sum cnt * (E4 - Emix) at the shared scale e^{log_e4}
    double acc = 0.0;
    double lmax = log_e4;
    auto add_case = [&](double cnt, double log_mix) {
        if (cnt <= 0.0) return;
        acc += cnt * (std::exp(log_e4 - lmax) - std::exp(log_mix - lmax));
    };
    if (cnt_same_q > 0.0)
        add_case(cnt_same_q, mixed_fourth_general(arch, spec, 1, 1, 2, 1).log_value);
    if (cnt_same_p > 0.0)
        add_case(cnt_same_p, mixed_fourth_general(arch, spec, 1, 1, 1, 2).log_value);
    if (cnt_distinct > 0.0)
        add_case(cnt_distinct, mixed_fourth_general(arch, spec, 1, 1, 2, 2).log_value);

    EmpiricalVarianceExact out;
    out.log_value = lmax + std::log(acc / (m_pairs * m_pairs));
    out.value = std::exp(out.log_value);
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo check of the symmetry lemma the whole moment calculus rests on:
// for independent symmetric w_1..w_n, atomless symmetric X, psi = 1{t > 0} and
// even sum(k_j),   E[prod w_j^{k_j} psi(X + sum w_j a_j)] = (1/2) prod E[w_j^{k_j}].
// Test utility, not a user-facing computation.
// ---------------------------------------------------------------------------

struct LemmaCheckStats {
    int trials = 0;
    int passed = 0;
    double max_abs_z = 0.0;  // worst |estimate - expected| / SE
    bool all_passed() const { return passed == trials; }
};

inline LemmaCheckStats lemma_key_property_check(std::span<const WeightLaw> laws, int trials,
                                                std::uint64_t seed,
                                                std::int64_t samples_per_trial = 200000) {
    if (laws.empty()) throw ConfigError("lemma check needs at least one law");
    LemmaCheckStats stats;
    for (int t = 0; t < trials; ++t) {
        RngStream setup = RngStream::keyed(seed, 0xA11CE, t);
        const WeightLaw& law = laws[setup.next_u64() % laws.size()];
        const int n = 1 + static_cast<int>(setup.next_u64() % 3);
        std::vector<int> k(n);
        int ksum;
        do {
            ksum = 0;
            for (int i = 0; i < n; ++i) {
                k[i] = static_cast<int>(setup.next_u64() % 3);
                ksum += k[i];
            }
        } while (ksum % 2 != 0);
        std::vector<double> a(n);
        for (int i = 0; i < n; ++i) a[i] = setup.next_gaussian();

        Rational expected_r = frac(1, 2);
        for (int i = 0; i < n; ++i) expected_r *= law.moment(k[i]);
        const double expected = to_double(expected_r);

        double s1 = 0.0, s2 = 0.0;
        RngStream draw = RngStream::keyed(seed, 0xD3A1, t);
        for (std::int64_t s = 0; s < samples_per_trial; ++s) {
            double arg = draw.next_gaussian();  // X: atomless, symmetric
            double prod = 1.0;
            for (int i = 0; i < n; ++i) {
                double w = law.sample(draw);
                arg += w * a[i];
                for (int e = 0; e < k[i]; ++e) prod *= w;
            }
            const double v = arg > 0.0 ? prod : 0.0;
            s1 += v;
            s2 += v * v;
        }
        const double mean = s1 / samples_per_trial;
        const double var = std::max(0.0, s2 / samples_per_trial - mean * mean);
        const double se = std::sqrt(var / samples_per_trial);
        const double z = se > 0.0 ? std::abs(mean - expected) / se
                                  : (mean == expected ? 0.0 : 1e18);
        stats.trials++;
        if (z <= 4.0) stats.passed++;
        stats.max_abs_z = std::max(stats.max_abs_z, z);
    }
    return stats;
}

}  // namespace evgp
