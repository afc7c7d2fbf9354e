#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace foldcraft {

// SplitMix64 seed mixer; used to derive independent sub-seeds from one master.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the standard;
// the distributions here are hand-rolled so sampled sequences are identical on
// every platform and toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. n is tiny relative to 2^64 so the
    // modulo bias is unobservable.
    int uniform_int(int n) {
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    bool coin() { return (gen_() & 1u) != 0; }

    // Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = kTau * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr double kTau = 6.283185307179586476925286766559;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace foldcraft
