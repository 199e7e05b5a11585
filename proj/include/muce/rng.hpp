#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string_view>

namespace muce {

// FNV-1a 64-bit hash, used for stream tags and file content hashes.
uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 14695981039346656037ull);
uint64_t fnv1a64(std::string_view s);

// splitmix64 (Vigna, public domain). Used only to expand seeds and derive streams.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t s) : state(s) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

// Derivation of per-purpose substreams from one root seed:
//   h  = fnv1a64(tag)
//   a  = SplitMix64(root ^ h).next()
//   s' = SplitMix64(a ^ index).next()
// Every consumer of randomness in the repository names its stream this way, so
// runs are reproducible from the root seed alone.
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0);

// xoshiro256++ 1.0 (Blackman & Vigna, public domain), state seeded via splitmix64.
class Rng {
public:
    explicit Rng(uint64_t seed);
    static Rng derive(uint64_t root, std::string_view tag, uint64_t index = 0) {
        return Rng(derive_seed(root, tag, index));
    }

    uint64_t next_u64();

    // 53-bit uniform in [0, 1): (next_u64() >> 11) * 2^-53
    double uniform01();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n) by 128-bit multiply-shift; consumes one u64.
    uint64_t below(uint64_t n);

    // Standard normal via Box-Muller. Deviates are produced in pairs; each pair
    // consumes exactly two u64 (u1 for the radius with log(1-u1), u2 for the angle).
    double normal();

    // CN(0,1): (z0 + i*z1)/sqrt(2) from one fresh Box-Muller pair.
    std::complex<double> cnormal();

private:
    std::array<uint64_t, 4> s_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace muce
