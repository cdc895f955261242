#pragma once

#include <cstdint>
#include <limits>

namespace mmwint::sim {

// SplitMix64: a tiny counter-style generator. Every random quantity in a
// realization is drawn from its own stream keyed by what it belongs to (a cell,
// a directed AP pair, a link to the receiver), so results do not depend on the
// order in which the simulator visits things or on how work is split.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

enum class StreamDomain : std::uint64_t {
    ap_cell = 1,
    ap_pair = 2,
    rx_link = 3,
    blockage_cell = 4,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t realization, StreamDomain domain,
                                   std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = SplitMix64::mix(seed ^ 0x6a09e667f3bcc909ULL);
    h = SplitMix64::mix(h ^ realization);
    h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(domain));
    h = SplitMix64::mix(h ^ a);
    h = SplitMix64::mix(h ^ (b + 0x3c6ef372fe94f82bULL));
    return h;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(SplitMix64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

} // namespace mmwint::sim
