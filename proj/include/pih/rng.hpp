#pragma once

#include <cstdint>

namespace pih {

/// Minimal splitmix64 generator. Used everywhere instead of <random> so that
/// results are bit-identical across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  private:
    std::uint64_t state_;
};

/// Mixes several integers into one seed. Deterministic stream derivation:
/// independent consumers hash (seed, tag, index...) instead of sharing state.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
    Rng r(a * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL);
    std::uint64_t h = r.next_u64() ^ (b + 0x2545f4914f6cdd1dULL);
    Rng r2(h);
    h = r2.next_u64() ^ (c * 0xff51afd7ed558ccdULL + 1);
    Rng r3(h);
    return r3.next_u64() ^ (d * 0xc4ceb9fe1a85ec53ULL + 2);
}

}  // namespace pih
