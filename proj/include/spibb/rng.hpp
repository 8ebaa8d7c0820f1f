#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace spibb {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed derivation: the same (master, keys...) always gives the
/// same stream seed, independent of how work is scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ mix64(a + 0x1000));
    s = mix64(s ^ mix64(b + 0x2000));
    s = mix64(s ^ mix64(c + 0x3000));
    return s;
}

/// Random source with platform-independent transforms. The engine is
/// std::mt19937_64 (fully specified by the standard); we avoid the std::
/// distributions whose algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Standard exponential via inversion.
    double exponential();

    /// Index sampled from an (unnormalized) non-negative weight vector.
    int categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

} // namespace spibb
