#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace wipin {

/// Seedable random source that yields the same stream on every platform.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random>, since libstdc++, libc++ and MSVC disagree on those:
///   uniform  53 high bits of one draw scaled into [0, 1)
///   normal   Box-Muller, the second variate is cached
///   poisson  Knuth multiplication method
///   below    rejection sampling on the top bits
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    unsigned poisson(double mean);
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a master seed and two indices,
/// e.g. (master, subject, session) or (master, k, draw).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace wipin
