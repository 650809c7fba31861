#ifndef CSIMG_RNG_HPP
#define CSIMG_RNG_HPP

#include <cstdint>
#include <complex>
#include <random>

namespace csimg {

namespace detail {

// splitmix64, used for seed derivation only
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x6a09e667f3bcc909ULL));
}

}  // namespace detail

/// Seedable random source with deterministic substreams. Splitting derives a
/// child stream from the stored seed, not from consumed engine state, so
/// substream k of a given generator is the same no matter how much the parent
/// has already drawn.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : seed_(seed), engine_(detail::splitmix64(seed)) {}

    /// Deterministic child stream; split(i, j) == split(i, j) always.
    [[nodiscard]] Rng split(std::uint64_t i, std::uint64_t j = 0) const {
        return Rng(detail::mix(detail::mix(seed_, i), j));
    }

    std::uint64_t seed() const { return seed_; }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    double gaussian(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    /// Complex Gaussian with variance `var`: Re and Im independent real
    /// Gaussians with variance var/2 each.
    std::complex<double> complex_gaussian(double var) {
        const double s = std::sqrt(var / 2.0);
        return {gaussian(0.0, s), gaussian(0.0, s)};
    }

    /// Uniform phase on the complex unit circle (Steinhaus variable).
    std::complex<double> steinhaus() {
        const double phi = uniform(0.0, 2.0 * 3.14159265358979323846);
        return {std::cos(phi), std::sin(phi)};
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace csimg

#endif  // CSIMG_RNG_HPP
