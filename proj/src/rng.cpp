#include "muce/rng.hpp"

#include <cmath>

#include "muce/errors.hpp"

namespace muce {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index) {
    uint64_t h = fnv1a64(tag);
    uint64_t a = SplitMix64(root ^ h).next();
    return SplitMix64(a ^ index).next();
}

namespace {
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}

Rng::Rng(uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi)) throw DomainError("uniform: need lo < hi");
    return lo + uniform01() * (hi - lo);
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw DomainError("below: n must be positive");
    return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u1 is in (0, 1], so the log is finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::complex<double> Rng::cnormal() {
    has_spare_ = false;  // always a fresh pair, keeps the draw count predictable
    double z0 = normal();
    double z1 = normal();
    return {z0 * M_SQRT1_2, z1 * M_SQRT1_2};
}

}  // namespace muce
