#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "evgp/distributions.hpp"
#include "evgp/errors.hpp"

namespace evgp {

// Width vector (n_0, ..., n_d). Layer 0 is the input, layer d the output,
// layers 1..d-1 are hidden.
class Architecture {
  public:
    explicit Architecture(std::vector<int> widths) : widths_(std::move(widths)) {
        if (widths_.size() < 2)
            throw ConfigError("architecture needs at least an input and an output layer");
        for (int w : widths_)
            if (w < 1) throw ConfigError("all layer widths must be >= 1");
    }

    const std::vector<int>& widths() const { return widths_; }
    int width(std::size_t j) const { return widths_.at(j); }
    std::size_t depth() const { return widths_.size() - 1; }  // d
    int input_dim() const { return widths_.front(); }         // n_0
    int output_dim() const { return widths_.back(); }         // n_d

    std::size_t hidden_layer_count() const { return depth() - 1; }
    int min_hidden_width() const {
        int m = 0;
        for (std::size_t j = 1; j + 1 < widths_.size(); ++j)
            if (m == 0 || widths_[j] < m) m = widths_[j];
        return m;  // 0 when there are no hidden layers
    }

    // beta = sum over hidden layers of 1/n_j; the architecture statistic the
    // gradient fluctuation bounds are exponential in.
    double beta() const {
        double sum = 0.0, comp = 0.0;
        for (std::size_t j = 1; j + 1 < widths_.size(); ++j) {
            double term = 1.0 / widths_[j] - comp;
            double next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        return sum;
    }

    std::int64_t trainable_parameter_count() const {
        std::int64_t total = 0;
        for (std::size_t j = 1; j < widths_.size(); ++j)
            total += static_cast<std::int64_t>(widths_[j]) * (widths_[j - 1] + 1);
        return total;
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < widths_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(widths_[i]);
        }
        return s;
    }

    bool operator==(const Architecture& o) const { return widths_ == o.widths_; }

  private:
    std::vector<int> widths_;
};

// Same weight kind and bias law at every layer, fan_in taken from the widths.
inline DistributionSpec make_spec(const Architecture& arch, WeightKind weights, BiasLaw bias) {
    std::vector<LayerLaws> layers;
    layers.reserve(arch.depth());
    for (std::size_t j = 1; j <= arch.depth(); ++j) {
        int fan_in = arch.width(j - 1);
        switch (weights) {
            case WeightKind::Gaussian:
                layers.push_back({WeightLaw::gaussian(fan_in), bias});
                break;
            case WeightKind::SignedBernoulli:
                layers.push_back({WeightLaw::signed_bernoulli(fan_in), bias});
                break;
            case WeightKind::Uniform:
                layers.push_back({WeightLaw::uniform(fan_in), bias});
                break;
            case WeightKind::Custom:
                throw ConfigError("custom laws must be assembled per layer");
        }
    }
    return DistributionSpec(std::move(layers));
}

// Spec default: Gaussian weights, Gaussian bias with scale 0.1. Any atomless
// symmetric bias works; the Jacobian moments do not depend on it.
inline DistributionSpec default_spec(const Architecture& arch) {
    return make_spec(arch, WeightKind::Gaussian, BiasLaw::gaussian(0.1));
}

inline void validate_spec(const Architecture& arch, const DistributionSpec& spec) {
    if (spec.depth() != arch.depth())
        throw ConfigError("distribution spec depth " + std::to_string(spec.depth()) +
                          " does not match architecture depth " + std::to_string(arch.depth()));
    for (std::size_t j = 1; j <= arch.depth(); ++j) {
        if (spec.weights(j).fan_in() != arch.width(j - 1))
            throw ConfigError("layer " + std::to_string(j) + " weight law fan_in " +
                              std::to_string(spec.weights(j).fan_in()) +
                              " does not match preceding width " +
                              std::to_string(arch.width(j - 1)));
    }
}

}  // namespace evgp
