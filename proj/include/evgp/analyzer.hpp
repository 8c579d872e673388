#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evgp/architecture.hpp"
#include "evgp/distributions.hpp"
#include "evgp/errors.hpp"
#include "evgp/exact.hpp"
#include "evgp/rational.hpp"

namespace evgp {

// beta = sum of reciprocals of the hidden layer widths; 0 when d = 1.
inline double beta(const Architecture& arch) { return arch.beta(); }

inline double normalized_moment_max(const Architecture& arch, const DistributionSpec& spec,
                                    int K) {
    double mx = 0.0;
    for (std::size_t j = 1; j <= arch.depth(); ++j)
        mx = std::max(mx, to_double(spec.weights(j).normalized_moment(K)));
    return mx;
}

// Fourth-moment bracket:
//   (2/n0^2) e^{beta/2}  <=  E[Z^4]  <=  (6 mu~4max / n0^2) e^{6 mu~4max beta}.
struct AnnealedBounds {
    double lower = 0.0, upper = 0.0;
    double log_lower = 0.0, log_upper = 0.0;
    double mu4_tilde_max = 0.0;
};

inline AnnealedBounds annealed_bounds_fourth(const Architecture& arch,
                                             const DistributionSpec& spec) {
    validate_spec(arch, spec);
    AnnealedBounds b;
    b.mu4_tilde_max = normalized_moment_max(arch, spec, 2);
    const double n0 = arch.input_dim();
    const double bt = arch.beta();
    b.log_lower = std::log(2.0) - 2.0 * std::log(n0) + 0.5 * bt;
    b.log_upper = std::log(6.0 * b.mu4_tilde_max) - 2.0 * std::log(n0) +
                  6.0 * b.mu4_tilde_max * bt;
    b.lower = std::exp(b.log_lower);
    b.upper = std::exp(b.log_upper);
    return b;
}

struct Bound2K {
    double upper = 0.0;
    double log_upper = 0.0;
    double constant = 0.0;  // C_{K,mu}, echoed for auditability
};

// Upper bound for E[Z^{2K}], valid under the hypothesis K < min hidden width:
//   (C_{K,mu} / n0^K) exp(C_{K,mu} beta),
// C_{K,mu} = 2^{K-1} (2K)!/K! * mu~_{2K,max}. The orderings factor 2^{K-1}(2K)!/K!
// counts path regroupings at a bunched layer; the moment factor dominates every
// bunching configuration because products of normalized moments with exponents
// summing to K are at most mu~_{2K} (moment log-convexity). An upper bound, not
// an estimate.
inline Bound2K annealed_bound_2k(const Architecture& arch, const DistributionSpec& spec,
                                 int K) {
    validate_spec(arch, spec);
    if (K < 1) throw ConfigError("bound order K must be >= 1");
    const int min_hidden = arch.min_hidden_width();
    if (min_hidden > 0 && K >= min_hidden)
        throw HypothesisViolatedError(
            "the 2K-moment bound requires K < min hidden width (K = " + std::to_string(K) +
            ", min hidden width = " + std::to_string(min_hidden) + ")");
    double orderings = std::pow(2.0, K - 1);
    for (int i = K + 1; i <= 2 * K; ++i) orderings *= i;  // (2K)!/K!
    Bound2K b;
    b.constant = orderings * normalized_moment_max(arch, spec, K);
    b.log_upper = std::log(b.constant) - K * std::log(static_cast<double>(arch.input_dim())) +
                  b.constant * arch.beta();
    b.upper = std::exp(b.log_upper);
    return b;
}

// Bracket for E[Var^[Z^2]]. The theorem statement and the final display of its
// proof disagree on the lower-bound prefactor (eta and 1-eta swap roles), so
// both variants are computed and labeled; classification uses the proof
// variant, and bracket checks use min(lower variants).
struct QuenchedBounds {
    double lower_statement = 0.0;
    double lower_proof = 0.0;
    double upper = 0.0;
    double log_upper = 0.0;
    Rational eta;         // (n0 - 1) / (n0 n_d - 1), exact
    std::int64_t m_pairs = 0;
    double mu4_tilde_max = 0.0;
    double mu4_tilde_first = 0.0;

    double lower_min() const { return std::min(lower_statement, lower_proof); }
};

inline QuenchedBounds quenched_bounds(const Architecture& arch, const DistributionSpec& spec) {
    validate_spec(arch, spec);
    QuenchedBounds b;
    b.m_pairs = static_cast<std::int64_t>(arch.input_dim()) * arch.output_dim();
    if (b.m_pairs < 2)
        throw ConfigError(
            "quenched bounds need M = n_0*n_d >= 2 (with one Jacobian entry the empirical "
            "variance is identically 0)");
    const double n0 = arch.input_dim();
    const double n1 = arch.width(1);
    const double bt = arch.beta();
    const double m = static_cast<double>(b.m_pairs);
    b.eta = frac(arch.input_dim() - 1,
                 arch.input_dim() * static_cast<long>(arch.output_dim()) - 1);
    const double eta = to_double(b.eta);
    b.mu4_tilde_max = normalized_moment_max(arch, spec, 2);
    b.mu4_tilde_first = to_double(spec.weights(1).normalized_moment(2));

    const double decayed = (4.0 / n1) * (b.mu4_tilde_first - 1.0) * std::exp(-1.0 / n1);
    const double common = (1.0 - 1.0 / m) / (n0 * n0) * std::exp(0.5 * bt);
    b.lower_statement = common * ((1.0 - eta) + eta * decayed);
    b.lower_proof = common * (eta + (1.0 - eta) * decayed);
    b.log_upper = std::log(1.0 - 1.0 / m) + std::log(6.0 * b.mu4_tilde_max) -
                  2.0 * std::log(n0) + 6.0 * b.mu4_tilde_max * bt;
    b.upper = std::exp(b.log_upper);
    return b;
}

// Mean-field order parameter per layer: chi_1 = n_{j-1} * Var[mu^{(j)}] * 1/2
// (the Gaussian integral of ReLU' squared is 1/2). Exactly 1 for every
// fan-in-normalized law; anything else means off the edge of chaos.
inline std::vector<double> chi1(const Architecture& arch, const DistributionSpec& spec) {
    validate_spec(arch, spec);
    std::vector<double> out;
    out.reserve(arch.depth());
    for (std::size_t j = 1; j <= arch.depth(); ++j) {
        Rational c = Rational(arch.width(j - 1)) * spec.weights(j).moment(2) * frac(1, 2);
        out.push_back(to_double(c));
    }
    return out;
}

// E[sum_{p,q} Z^2] = n_0*n_d * (1/n_0) = n_d: the trace identity behind the
// unit average singular value.
inline Rational frobenius_expectation(const Architecture& arch) {
    return Rational(arch.output_dim());
}

// ---------------------------------------------------------------------------
// Width families and their asymptotic classification.
// ---------------------------------------------------------------------------

struct WidthFamily {
    enum class Kind { ExplicitList, Constant, Polynomial, Geometric } kind;
    std::vector<int> list;  // ExplicitList
    double c = 1.0;         // Constant: n_j = c; Polynomial: n_j = c j^p; Geometric: n_j = c r^j
    double p = 1.0;
    double r = 2.0;

    static WidthFamily explicit_list(std::vector<int> widths) {
        return {Kind::ExplicitList, std::move(widths), 0, 0, 0};
    }
    static WidthFamily constant(int n) { return {Kind::Constant, {}, double(n), 0, 0}; }
    static WidthFamily polynomial(double c, double p) { return {Kind::Polynomial, {}, c, p, 0}; }
    static WidthFamily geometric(double c, double r) { return {Kind::Geometric, {}, c, 1, r}; }

    int width_at(int j) const {  // j >= 1
        double w = 1.0;
        switch (kind) {
            case Kind::ExplicitList:
                if (j < 1 || j > static_cast<int>(list.size()))
                    throw ConfigError("explicit width list exhausted at j = " + std::to_string(j));
                return list[j - 1];
            case Kind::Constant: w = c; break;
            case Kind::Polynomial: w = c * std::pow(double(j), p); break;
            case Kind::Geometric: w = c * std::pow(r, double(j)); break;
        }
        return std::max(1, static_cast<int>(std::llround(w)));
    }
};

struct FamilyVerdict {
    bool has_asymptotic_verdict = false;
    bool avoids = false;  // sum 1/n_j < infinity
    std::string annealed;
    std::string quenched;
    std::string rationale;
    double beta_horizon = 0.0;  // partial sum over the inspected horizon
};

// Whether sum 1/n_j converges decides both senses at once: the second moment
// is exactly 1/n_0 always, and the fourth-moment and empirical-variance
// brackets are exponential in the same beta from both sides.
inline FamilyVerdict classify_family(const WidthFamily& family, int horizon) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    FamilyVerdict v;
    double bh = 0.0;
    const int hmax = family.kind == WidthFamily::Kind::ExplicitList
                         ? std::min(horizon, static_cast<int>(family.list.size()))
                         : horizon;
    for (int j = 1; j <= hmax; ++j) bh += 1.0 / family.width_at(j);
    v.beta_horizon = bh;

    switch (family.kind) {
        case WidthFamily::Kind::ExplicitList:
            v.has_asymptotic_verdict = false;
            v.annealed = v.quenched =
                "no asymptotic verdict for a finite explicit list; beta over the list = " +
                std::to_string(bh);
            v.rationale = "the avoidance criterion is about infinite width families";
            return v;
        case WidthFamily::Kind::Constant:
            v.has_asymptotic_verdict = true;
            v.avoids = false;
            v.rationale = "constant width: beta_d = (d-1)/n diverges linearly";
            break;
        case WidthFamily::Kind::Polynomial:
            v.has_asymptotic_verdict = true;
            v.avoids = family.p > 1.0;
            v.rationale = family.p > 1.0
                              ? "p-series with exponent > 1 converges"
                              : "p-series with exponent <= 1 diverges";
            break;
        case WidthFamily::Kind::Geometric:
            v.has_asymptotic_verdict = true;
            v.avoids = family.r > 1.0;
            v.rationale = family.r > 1.0 ? "geometric growth: sum of reciprocals converges"
                                         : "non-growing geometric widths: sum diverges";
            break;
    }
    const char* verdict = v.avoids ? "avoids the EVGP" : "suffers the EVGP";
    v.annealed = std::string(verdict) + " in the annealed sense (" + v.rationale + ")";
    v.quenched = std::string(verdict) + " in the quenched sense (same criterion)";
    return v;
}

// ---------------------------------------------------------------------------
// Architecture advisor: equal hidden widths minimize beta for a fixed budget
// (power-mean inequality; equality exactly at equal widths).
// ---------------------------------------------------------------------------

enum class BudgetKind { Neurons, Parameters };

struct AdviseRequest {
    BudgetKind kind = BudgetKind::Neurons;
    std::int64_t budget = 0;
    int depth = 2;       // d; the net has depth-1 hidden layers
    int input_dim = 0;   // required for a parameters budget
    int output_dim = 0;
    std::vector<std::vector<int>> alternatives;  // user layouts to score against
};

struct Advice {
    std::vector<int> hidden;
    double beta = 0.0;
    std::int64_t budget_used = 0;
    std::vector<std::pair<std::vector<int>, double>> alternative_betas;
};

namespace detail {
inline double beta_of_hidden(const std::vector<int>& hidden) {
    double b = 0.0;
    for (int w : hidden) b += 1.0 / w;
    return b;
}
}  // namespace detail

inline Advice advise(const AdviseRequest& req) {
    if (req.depth < 2) throw ConfigError("advising needs depth >= 2 (at least one hidden layer)");
    const int h = req.depth - 1;
    Advice out;

    if (req.kind == BudgetKind::Neurons) {
        if (req.budget < h)
            throw ConfigError("infeasible: " + std::to_string(req.budget) +
                              " hidden neurons cannot fill " + std::to_string(h) + " layers");
        const std::int64_t base = req.budget / h;
        const int extra = static_cast<int>(req.budget % h);
        for (int i = 0; i < h; ++i)
            out.hidden.push_back(static_cast<int>(base) + (i < extra ? 1 : 0));
        out.budget_used = req.budget;
    } else {
        if (req.input_dim < 1 || req.output_dim < 1)
            throw ConfigError("a parameters budget needs input and output dimensions");
        auto params_for = [&](std::int64_t n) {
            // widths (n_0, n, ..., n, n_d): sum_j n_j (n_{j-1} + 1)
            std::int64_t total = n * (req.input_dim + 1);
            total += static_cast<std::int64_t>(req.depth - 2) * n * (n + 1);
            total += static_cast<std::int64_t>(req.output_dim) * (n + 1);
            return total;
        };
        if (params_for(1) > req.budget)
            throw ConfigError("infeasible: even width-1 hidden layers exceed the budget of " +
                              std::to_string(req.budget) + " parameters");
        std::int64_t n = 1;
        while (params_for(n + 1) <= req.budget) ++n;
        out.hidden.assign(h, static_cast<int>(n));
        out.budget_used = params_for(n);
    }

    out.beta = detail::beta_of_hidden(out.hidden);
    for (const auto& alt : req.alternatives) {
        for (int w : alt)
            if (w < 1) throw ConfigError("alternative layouts need widths >= 1");
        out.alternative_betas.emplace_back(alt, detail::beta_of_hidden(alt));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full architecture report.
// ---------------------------------------------------------------------------

struct EvgpReport {
    std::vector<int> widths;
    double beta = 0.0;
    Rational second_moment;            // exactly 1/n_0
    DpValue fourth_exact;              // transfer-matrix value
    AnnealedBounds annealed;
    std::map<int, Bound2K> k_upper;    // K -> bound, where the hypothesis holds
    std::vector<int> k_skipped;        // K violating the hypothesis
    bool has_quenched = false;
    QuenchedBounds quenched;
    EmpiricalVarianceExact empirical_variance;
    std::vector<double> chi1_per_layer;
    bool chi1_all_unit = true;
    std::string annealed_summary;
    std::string quenched_summary;
    std::vector<std::string> warnings;
};

inline EvgpReport analyze(const Architecture& arch, const DistributionSpec& spec,
                          std::span<const int> k_list = {}) {
    validate_spec(arch, spec);
    EvgpReport r;
    r.widths = arch.widths();
    r.beta = arch.beta();
    r.second_moment = exact_second_moment(arch);
    r.fourth_exact = dp_fourth_moment(arch, spec);
    r.annealed = annealed_bounds_fourth(arch, spec);

    static constexpr int kDefaultKs[] = {3, 4, 5};
    std::span<const int> ks = k_list.empty() ? std::span<const int>(kDefaultKs) : k_list;
    for (int k : ks) {
        try {
            r.k_upper.emplace(k, annealed_bound_2k(arch, spec, k));
        } catch (const HypothesisViolatedError&) {
            r.k_skipped.push_back(k);
        }
    }

    if (static_cast<std::int64_t>(arch.input_dim()) * arch.output_dim() >= 2) {
        r.has_quenched = true;
        r.quenched = quenched_bounds(arch, spec);
        r.empirical_variance = expected_empirical_variance_exact(arch, spec);
    } else {
        r.empirical_variance = expected_empirical_variance_exact(arch, spec);
        r.warnings.push_back(r.empirical_variance.notice);
    }

    r.chi1_per_layer = chi1(arch, spec);
    for (double c : r.chi1_per_layer)
        if (std::abs(c - 1.0) > 1e-12) r.chi1_all_unit = false;
    if (!r.chi1_all_unit)
        r.warnings.push_back(
            "chi_1 != 1 on some layer: the initialization is off the edge of chaos");
    if (!spec.all_bias_atomless())
        r.warnings.push_back(
            "zero (atomic) bias law in use: the exact moment formulas assume atomless "
            "biases and only hold when the depth stays well below exp(sum of widths)");

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "beta = %.6g; E[Z^2] = %s exactly; E[Z^4] = %.6g in [%.6g, %.6g] "
                  "(exponential in beta; finite architecture, so no asymptotic claim)",
                  r.beta, to_fraction_string(r.second_moment).c_str(), r.fourth_exact.value(),
                  r.annealed.lower, r.annealed.upper);
    r.annealed_summary = buf;
    if (r.has_quenched) {
        std::snprintf(buf, sizeof(buf),
                      "E[Var^[Z^2]] = %.6g in [%.6g, %.6g] (lower: proof variant %.6g, "
                      "statement variant %.6g; eta = %s)",
                      r.empirical_variance.value, r.quenched.lower_min(), r.quenched.upper,
                      r.quenched.lower_proof, r.quenched.lower_statement,
                      to_fraction_string(r.quenched.eta).c_str());
        r.quenched_summary = buf;
    } else {
        r.quenched_summary = "M = 1: empirical variance identically 0, quenched bracket not applicable";
    }
    return r;
}

}  // namespace evgp
