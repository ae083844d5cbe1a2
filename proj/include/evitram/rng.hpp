#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace evitram {

// Deterministic pseudorandom generator built on SplitMix64 (Steele, Lea &
// Flood's 64-bit variant of the splittable generator family). Integer-only
// state transitions, so a given seed yields the same stream on every
// platform. Distribution sampling (uniform doubles, Box-Muller normals,
// Lemire integer reduction) is implemented here rather than through
// <random>, whose distributions are not portable across standard libraries.
//
// `child(tag)` derives an independent stream from the construction seed and
// a caller-chosen tag. Children depend only on (seed, tag), never on how
// much of the parent stream has been consumed, which lets a harness add new
// derived streams without perturbing existing ones.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return finalize(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform over [0, n). Lemire multiply-shift reduction; the residual
    // bias is O(n / 2^64) and irrelevant at any width used here.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; the sine twin is discarded so every
    // draw consumes exactly two uniforms.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(uniform_int(static_cast<std::uint64_t>(i) + 1));
            std::swap(p[i], p[j]);
        }
        return p;
    }

    Rng child(std::uint64_t tag) const { return Rng(derive_seed(tag)); }

    std::uint64_t derive_seed(std::uint64_t tag) const {
        return finalize(seed_ + 0x9E3779B97F4A7C15ULL * (tag + 1));
    }

private:
    static std::uint64_t finalize(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace evitram
