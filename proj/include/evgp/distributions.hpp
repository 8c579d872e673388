#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "evgp/errors.hpp"
#include "evgp/rational.hpp"
#include "evgp/rng.hpp"

namespace evgp {

enum class WeightKind { Gaussian, SignedBernoulli, Uniform, Custom };

inline const char* to_string(WeightKind k) {
    switch (k) {
        case WeightKind::Gaussian: return "gaussian";
        case WeightKind::SignedBernoulli: return "signed_bernoulli";
        case WeightKind::Uniform: return "uniform";
        case WeightKind::Custom: return "custom";
    }
    return "?";
}

// A per-layer weight distribution: symmetric around 0 with second moment
// exactly 2/fan_in. The three built-in laws all have closed-form rational
// even moments, which is what the exact oracle runs on. Custom laws supply a
// moment table (mu_0, mu_2, mu_4, ...) plus a sampler; they are allowed to
// break fan-in normalization for diagnostic use.
class WeightLaw {
  public:
    using Sampler = std::function<double(RngStream&)>;

    static WeightLaw gaussian(int fan_in) { return WeightLaw(WeightKind::Gaussian, fan_in); }
    static WeightLaw signed_bernoulli(int fan_in) {
        return WeightLaw(WeightKind::SignedBernoulli, fan_in);
    }
    static WeightLaw uniform(int fan_in) { return WeightLaw(WeightKind::Uniform, fan_in); }

    static WeightLaw custom(int fan_in, std::vector<Rational> even_moments, Sampler sampler) {
        WeightLaw law(WeightKind::Custom, fan_in);
        if (even_moments.size() < 2 || even_moments[0] != 1)
            throw ConfigError("custom law needs a moment table starting at mu_0 = 1");
        law.custom_even_moments_ = std::make_shared<std::vector<Rational>>(std::move(even_moments));
        law.custom_sampler_ = std::move(sampler);
        return law;
    }

    WeightKind kind() const { return kind_; }
    int fan_in() const { return fan_in_; }

    // Exact r-th moment. Odd r is exactly 0 by symmetry.
    Rational moment(int r) const {
        if (r < 0) throw ConfigError("moment order must be nonnegative");
        if (r % 2 == 1) return Rational(0);
        unsigned k = static_cast<unsigned>(r / 2);
        switch (kind_) {
            case WeightKind::Gaussian:
                // mu_{2k} = (2k-1)!! sigma^{2k}, sigma^2 = 2/fan_in
                return double_factorial_odd(k) * rational_pow(frac(2, fan_in_), k);
            case WeightKind::SignedBernoulli:
                // values +-sqrt(2/fan_in), so x^{2k} = (2/fan_in)^k surely
                return rational_pow(frac(2, fan_in_), k);
            case WeightKind::Uniform:
                // on [-a, a] with a^2 = 6/fan_in: mu_{2k} = a^{2k}/(2k+1)
                return rational_pow(frac(6, fan_in_), k) / Rational(2 * k + 1);
            case WeightKind::Custom:
                if (k >= custom_even_moments_->size())
                    throw ConfigError("custom law moment table too short for requested order");
                return (*custom_even_moments_)[k];
        }
        throw ConfigError("unknown weight law");
    }

    // mu~_{2K} = mu_{2K} / (mu_2)^K; scale-free, independent of fan_in.
    Rational normalized_moment(int K) const {
        if (K < 1) throw ConfigError("normalized moment needs K >= 1");
        return moment(2 * K) / rational_pow(moment(2), static_cast<unsigned>(K));
    }

    double sample(RngStream& stream) const {
        switch (kind_) {
            case WeightKind::Gaussian:
                return std::sqrt(2.0 / fan_in_) * stream.next_gaussian();
            case WeightKind::SignedBernoulli:
                return (stream.next_u64() & 1u) ? std::sqrt(2.0 / fan_in_)
                                                : -std::sqrt(2.0 / fan_in_);
            case WeightKind::Uniform:
                return std::sqrt(6.0 / fan_in_) * (2.0 * stream.next_unit() - 1.0);
            case WeightKind::Custom:
                return custom_sampler_(stream);
        }
        return 0.0;
    }

    bool fan_in_normalized() const { return moment(2) == frac(2, fan_in_); }

  private:
    WeightLaw(WeightKind kind, int fan_in) : kind_(kind), fan_in_(fan_in) {
        if (fan_in < 1) throw ConfigError("weight law fan_in must be >= 1");
    }

    WeightKind kind_;
    int fan_in_;
    std::shared_ptr<std::vector<Rational>> custom_even_moments_;
    Sampler custom_sampler_;
};

enum class BiasKind { Gaussian, Uniform, Zero };

inline const char* to_string(BiasKind k) {
    switch (k) {
        case BiasKind::Gaussian: return "gaussian";
        case BiasKind::Uniform: return "uniform";
        case BiasKind::Zero: return "zero";
    }
    return "?";
}

// Symmetric bias law. The theorems need it atomless; the zero bias is an atom
// and must be requested explicitly (valid in practice when the depth is small
// next to exp(sum of widths); the analyzer warns about it).
class BiasLaw {
  public:
    static BiasLaw gaussian(double scale) { return BiasLaw(BiasKind::Gaussian, scale); }
    static BiasLaw uniform(double scale) { return BiasLaw(BiasKind::Uniform, scale); }
    static BiasLaw zero(bool acknowledge_atom) {
        if (!acknowledge_atom)
            throw ConfigError(
                "zero bias is an atom at 0; construct it with BiasLaw::zero(true) to "
                "acknowledge the non-conforming initialization");
        BiasLaw law(BiasKind::Zero, 0.0);
        return law;
    }

    BiasKind kind() const { return kind_; }
    double scale() const { return scale_; }
    bool atomless() const { return kind_ != BiasKind::Zero; }

    double sample(RngStream& stream) const {
        switch (kind_) {
            case BiasKind::Gaussian: return scale_ * stream.next_gaussian();
            case BiasKind::Uniform: return scale_ * (2.0 * stream.next_unit() - 1.0);
            case BiasKind::Zero: return 0.0;
        }
        return 0.0;
    }

  private:
    BiasLaw(BiasKind kind, double scale) : kind_(kind), scale_(scale) {
        if (kind != BiasKind::Zero && !(scale > 0.0))
            throw ConfigError("bias scale must be > 0 for an atomless law");
    }

    BiasKind kind_;
    double scale_;
};

struct LayerLaws {
    WeightLaw weights;
    BiasLaw bias;
};

// One (WeightLaw, BiasLaw) pair per layer j = 1..d. Immutable value type.
class DistributionSpec {
  public:
    explicit DistributionSpec(std::vector<LayerLaws> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw ConfigError("distribution spec needs at least one layer");
    }

    std::size_t depth() const { return layers_.size(); }
    const LayerLaws& layer(std::size_t j) const { return layers_.at(j - 1); }  // j = 1..d
    const std::vector<LayerLaws>& layers() const { return layers_; }

    const WeightLaw& weights(std::size_t j) const { return layer(j).weights; }
    const BiasLaw& bias(std::size_t j) const { return layer(j).bias; }

    bool all_bias_atomless() const {
        for (const auto& l : layers_)
            if (!l.bias.atomless()) return false;
        return true;
    }

    bool all_bias_zero() const {
        for (const auto& l : layers_)
            if (l.bias.kind() != BiasKind::Zero) return false;
        return true;
    }

  private:
    std::vector<LayerLaws> layers_;
};

}  // namespace evgp
