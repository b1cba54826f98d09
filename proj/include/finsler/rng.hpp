#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace finsler {

/// SplitMix64: the 64-bit counter-based generator used for all sampling.
/// Named and seedable so that reports reproduce across runs and across
/// implementations; uniform doubles come from the top 53 bits.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform direction on the unit sphere, by rejection from the cube
    /// (no transcendentals, so the stream is bit-stable across libms).
    std::vector<double> unit_vector(int n) {
        std::vector<double> v(static_cast<size_t>(n));
        for (;;) {
            double norm2 = 0.0;
            for (auto& x : v) {
                x = uniform(-1.0, 1.0);
                norm2 += x * x;
            }
            if (norm2 > 1e-2 && norm2 <= 1.0) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (auto& x : v) x *= inv;
                return v;
            }
        }
    }

private:
    std::uint64_t state_;
};

} // namespace finsler
