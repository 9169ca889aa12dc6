#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace vpnext {

/// Deterministic splitmix64 generator. Self-contained so that runs are
/// bit-reproducible across standard libraries and platforms. Streams for
/// parallel work are derived with fork(), never by sharing state.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// integer in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// standard normal via Box-Muller (one spare cached)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return next_double() < p; }

    /// Independent child stream; forking is a pure function of (original
    /// seed, stream id), so fork order does not matter.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a, used for naming-stable parameter init streams and file checksums.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace vpnext
