// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.

#ifndef RELAY_PRNG_HPP
#define RELAY_PRNG_HPP

#include <cstdint>

namespace relay {

/// SplitMix64 generator (Steele, Lea & Flood mixing constants).
///
/// Every random draw in the workload generator goes through this class so
/// that a (seed, thread) pair reproduces the exact same stream on any
/// platform. All derived draws are pure integer arithmetic; no libm calls.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform value in [0, bound). bound == 0 yields 0.
    /// Plain modulo reduction: the tiny bias is irrelevant here and the
    /// reduction is trivially reproducible in any language.
    uint64_t bounded(uint64_t bound) {
        return bound == 0 ? 0 : next() % bound;
    }

    /// Uniform integer in [mean - jitter, mean + jitter], clamped at 0.
    int64_t jittered(int64_t mean, int64_t jitter) {
        if (jitter <= 0) return mean < 0 ? 0 : mean;
        int64_t v = mean - jitter + static_cast<int64_t>(bounded(static_cast<uint64_t>(2 * jitter + 1)));
        return v < 0 ? 0 : v;
    }

    /// True with probability permille/1000.
    bool chance_permille(uint32_t permille) {
        return bounded(1000) < permille;
    }

    /// Stable stream-splitting: derive an independent child seed.
    static uint64_t mix(uint64_t a, uint64_t b) {
        SplitMix64 m(a ^ (b * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
        m.next();
        return m.next();
    }

private:
    uint64_t state_;
};

} // namespace relay

#endif // RELAY_PRNG_HPP
