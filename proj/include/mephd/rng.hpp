// Seeded splittable PRNG for reproducible simulation. SplitMix64 core; each
// (seed, size, replication) triple hashes to an independent stream, so
// replications can run in any order or thread and still draw identical
// samples. Normal variates use Box-Muller and consume exactly two uniforms.

#ifndef MEPHD_RNG_HPP
#define MEPHD_RNG_HPP

#include <cmath>
#include <cstdint>

namespace mephd {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on (0, 1]; never 0, so log() below is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    std::uint64_t state_;
};

// Stream seed for one replication: a short SplitMix64 chain over the inputs.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t size,
                                 std::uint64_t rep_index) {
    SplitMix64 h(seed);
    std::uint64_t s = h.next_u64();
    s ^= 0x9E3779B97F4A7C15ull * (size + 1);
    SplitMix64 h2(s);
    s = h2.next_u64() ^ (0xBF58476D1CE4E5B9ull * (rep_index + 1));
    SplitMix64 h3(s);
    return h3.next_u64();
}

} // namespace mephd

#endif
