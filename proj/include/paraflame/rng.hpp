#pragma once

#include <cstdint>
#include <vector>

namespace paraflame {

// Counter-based generator (splitmix64 finalizer over seed+index). Every draw is
// a pure function of (seed, index), so records and weight inits are reproducible
// bit-for-bit on any platform regardless of draw order.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t at(std::uint64_t index) const {
        std::uint64_t z = seed_ + (index + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01_at(std::uint64_t index) const {
        return static_cast<double>(at(index) >> 11) * 0x1.0p-53;
    }

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
};

/// Sequential stream over a CounterRng.
class StreamRng {
  public:
    explicit StreamRng(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t next_u64() { return rng_.at(counter_++); }

    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n) via Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (0ull - n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

  private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

// Fisher-Yates with our own bounded draw; std::shuffle output is
// implementation-defined and would break cross-toolchain reproducibility.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, StreamRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Mixes a label into a seed to derive independent sub-streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
    return CounterRng(seed).at(0x5EED0000u + label);
}

}  // namespace paraflame
