#pragma once

#include <cmath>
#include <cstdint>

namespace evgp {

// SplitMix64 finalizer. Bijective, cheap, and good enough to decorrelate
// structured keys (seed, layer, row, column).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                             std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (a * 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ (b * 0xa0761d6478bd642fULL));
    h = mix64(h ^ (c * 0xe7037ed1a0b428dbULL));
    return h;
}

// Counter-based stream: state advances by a fixed odd increment and each
// output is a SplitMix64 hash of the counter. Streams keyed by distinct
// (seed, a, b, c) tuples never share outputs in practice, and the draw for a
// given key never depends on instantiation order or worker count.
class RngStream {
  public:
    static RngStream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0) {
        return RngStream(mix_key(seed, a, b, c));
    }

    explicit RngStream(std::uint64_t key) : counter_(key) {}

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix64(counter_);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (cosine branch only, keeps the stream
    // consumption fixed at two words per draw).
    double next_gaussian() {
        double u1 = next_unit_open();
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

  private:
    std::uint64_t counter_;
};

}  // namespace evgp
