#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evgp/architecture.hpp"
#include "evgp/errors.hpp"
#include "evgp/matrix.hpp"
#include "evgp/rng.hpp"

namespace evgp {

// One realization of all weights and biases. weights[j-1] is W^(j) with shape
// n_{j-1} x n_j (rows = source neuron, cols = target neuron).
struct SampledNet {
    Architecture arch;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

namespace detail {
constexpr std::uint64_t kWeightTag = 0x01ULL << 56;
constexpr std::uint64_t kBiasTag = 0x02ULL << 56;
}  // namespace detail

// Deterministic function of (arch, spec, seed): every entry is drawn from its
// own counter-based stream keyed by (seed, layer, row, column), so neither
// instantiation order nor worker count changes the realized net.
inline SampledNet instantiate(const Architecture& arch, const DistributionSpec& spec,
                              std::uint64_t seed) {
    validate_spec(arch, spec);
    SampledNet net{arch, {}, {}};
    net.weights.reserve(arch.depth());
    net.biases.reserve(arch.depth());
    for (std::size_t j = 1; j <= arch.depth(); ++j) {
        const std::size_t rows = static_cast<std::size_t>(arch.width(j - 1));
        const std::size_t cols = static_cast<std::size_t>(arch.width(j));
        Matrix w(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                RngStream s = RngStream::keyed(seed, detail::kWeightTag | j, r, c);
                w(r, c) = spec.weights(j).sample(s);
            }
        std::vector<double> b(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            RngStream s = RngStream::keyed(seed, detail::kBiasTag | j, c);
            b[c] = spec.bias(j).sample(s);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

// Pre- and post-activation vectors for every layer; activations[0] is the
// input, preactivations[0] stays empty. has_kink marks an exact-zero
// preactivation whose upstream locally varies with the input: there the ReLU
// gate genuinely switches and the Jacobian does not exist. An exact zero fed
// only by locally-constant neurons (dead upstream with zero bias) is safe:
// the function is constant around the input and the derivative is 0.
struct ForwardTrace {
    std::vector<std::vector<double>> preactivations;
    std::vector<std::vector<double>> activations;
    bool has_kink = false;
    std::size_t kink_layer = 0;
    std::size_t kink_neuron = 0;
};

inline ForwardTrace forward(const SampledNet& net, std::span<const double> input) {
    const Architecture& arch = net.arch;
    if (static_cast<int>(input.size()) != arch.input_dim())
        throw ConfigError("input length " + std::to_string(input.size()) +
                          " does not match n_0 = " + std::to_string(arch.input_dim()));
    ForwardTrace trace;
    trace.preactivations.resize(arch.depth() + 1);
    trace.activations.resize(arch.depth() + 1);
    trace.activations[0].assign(input.begin(), input.end());
    std::vector<char> prev_varies(input.size(), 1);  // inputs are the variables
    for (std::size_t j = 1; j <= arch.depth(); ++j) {
        const Matrix& w = net.weights[j - 1];
        const std::vector<double>& prev = trace.activations[j - 1];
        std::vector<double> pre(net.biases[j - 1]);
        for (std::size_t a = 0; a < w.rows(); ++a) {
            const double x = prev[a];
            if (x == 0.0) continue;
            for (std::size_t b = 0; b < w.cols(); ++b) pre[b] += x * w(a, b);
        }
        std::vector<double> act(pre.size());
        std::vector<char> varies(pre.size(), 0);
        for (std::size_t b = 0; b < pre.size(); ++b) {
            bool upstream = false;
            for (std::size_t a = 0; a < w.rows(); ++a)
                if (prev_varies[a] && w(a, b) != 0.0) {
                    upstream = true;
                    break;
                }
            if (pre[b] > 0.0) {
                varies[b] = upstream ? 1 : 0;
            } else if (pre[b] == 0.0 && upstream && !trace.has_kink) {
                trace.has_kink = true;
                trace.kink_layer = j;
                trace.kink_neuron = b;
            }
            act[b] = pre[b] > 0.0 ? pre[b] : 0.0;
        }
        trace.preactivations[j] = std::move(pre);
        trace.activations[j] = std::move(act);
        prev_varies = std::move(varies);
    }
    return trace;
}

namespace detail {

inline void require_off_kink(const ForwardTrace& trace) {
    if (trace.has_kink)
        throw ZeroPreactivationError(
            "preactivation is exactly 0 at layer " + std::to_string(trace.kink_layer) +
            ", neuron " + std::to_string(trace.kink_neuron) +
            ": the input lies on a ReLU kink and the Jacobian is undefined there");
}

inline void require_nondegenerate(const SampledNet& net, std::span<const double> input) {
    bool input_zero = true;
    for (double x : input)
        if (x != 0.0) input_zero = false;
    if (!input_zero) return;
    for (const auto& b : net.biases)
        for (double v : b)
            if (v != 0.0) return;
    throw DegenerateInputError(
        "zero input with all-zero biases: every activation and every gradient vanishes "
        "identically; evaluate at a nonzero input");
}

}  // namespace detail

// Input-output Jacobian by reverse accumulation: Z = prod_{j=d..1} D^(j) W^(j)T
// with D^(j) = diag(1{act^(j) > 0}). Returned matrix has shape n_d x n_0 and
// entry (q, p) = dZ of output q w.r.t. input p. The ReLU derivative at 0 is
// taken as 0, and an exact-zero preactivation is reported as an error.
inline Matrix jacobian_backprop(const SampledNet& net, std::span<const double> input) {
    detail::require_nondegenerate(net, input);
    ForwardTrace trace = forward(net, input);
    detail::require_off_kink(trace);

    const Architecture& arch = net.arch;
    const std::size_t nd = static_cast<std::size_t>(arch.output_dim());
    Matrix g(nd, nd);
    for (std::size_t i = 0; i < nd; ++i) g(i, i) = 1.0;

    for (std::size_t j = arch.depth(); j >= 1; --j) {
        const Matrix& w = net.weights[j - 1];
        const std::vector<double>& pre = trace.preactivations[j];
        Matrix next(nd, w.rows());
        for (std::size_t q = 0; q < nd; ++q)
            for (std::size_t b = 0; b < w.cols(); ++b) {
                if (pre[b] <= 0.0) continue;
                const double gv = g(q, b);
                if (gv == 0.0) continue;
                for (std::size_t a = 0; a < w.rows(); ++a) next(q, a) += gv * w(a, b);
            }
        g = std::move(next);
    }
    return g;
}

// Same Jacobian by direct evaluation of the chain-rule path sum: for each
// (p, q), sum over all neuron paths of the product of traversed weights and
// activity indicators. Exponential cost; guarded.
inline Matrix jacobian_pathsum(const SampledNet& net, std::span<const double> input,
                               double guard = 1e7) {
    detail::require_nondegenerate(net, input);
    ForwardTrace trace = forward(net, input);
    detail::require_off_kink(trace);

    const Architecture& arch = net.arch;
    double total_paths = 1.0;
    for (int w : arch.widths()) total_paths *= w;
    if (total_paths > guard)
        throw GuardExceededError("path sum would evaluate " + std::to_string(total_paths) +
                                     " paths, over the guard of " + std::to_string(guard),
                                 total_paths);

    const std::size_t d = arch.depth();
    const std::size_t n0 = static_cast<std::size_t>(arch.input_dim());
    const std::size_t nd = static_cast<std::size_t>(arch.output_dim());
    Matrix z(nd, n0);

    // Odometer over the hidden indices gamma(1..d-1); endpoints are fixed per
    // entry. Activity indicators come from the single forward trace.
    std::vector<std::size_t> gamma(d + 1, 0);
    for (std::size_t p = 0; p < n0; ++p)
        for (std::size_t q = 0; q < nd; ++q) {
            gamma.assign(d + 1, 0);
            gamma[0] = p;
            gamma[d] = q;
            double sum = 0.0;
            while (true) {
                double prod = 1.0;
                for (std::size_t j = 1; j <= d; ++j) {
                    if (!(trace.preactivations[j][gamma[j]] > 0.0)) {
                        prod = 0.0;
                        break;
                    }
                    prod *= net.weights[j - 1](gamma[j - 1], gamma[j]);
                }
                sum += prod;
                std::size_t j = 1;
                while (j < d && ++gamma[j] == static_cast<std::size_t>(arch.width(j))) {
                    gamma[j] = 0;
                    ++j;
                }
                if (j == d) break;
            }
            z(q, p) = sum;
        }
    return z;
}

inline std::vector<double> ones_input(const Architecture& arch) {
    return std::vector<double>(static_cast<std::size_t>(arch.input_dim()), 1.0);
}

}  // namespace evgp
