// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_RNG_HPP
#define OPIR_RNG_HPP

#include <cstdint>

namespace opir {

/// Deterministic 64-bit generator (splitmix64). The integer and uniform
/// streams depend only on the seed, not on platform or standard library,
/// so seeded pipelines replay bit-identically.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Child generator decorrelated from this one by `salt`. Forking does
    /// not advance this generator's stream, so record k of a dataset gets
    /// the same values no matter how many records precede it.
    Rng fork(std::uint64_t salt) const {
        Rng child(state_ ^ (0xD1B54A32D192ED03ULL + salt * 0x9E3779B97F4A7C15ULL));
        child.next_u64();
        return child;
    }

    std::uint64_t state() const { return state_; }
    void restore(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

} // namespace opir

#endif
