#ifndef UWOC_RNG_HPP
#define UWOC_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>

namespace uwoc {

/// SplitMix64 step; used for seeding and for stable seed derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Order-sensitive 64-bit hash of a list of words.
std::uint64_t hash_seed(std::initializer_list<std::uint64_t> words) noexcept;

/// xoshiro256** generator with explicit, portable distributions.
///
/// The standard library distributions are implementation-defined, so every
/// variate used by the simulator is produced here to keep datasets
/// byte-identical across toolchains.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }
    result_type next() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform in (0, 1].
    double uniform_pos() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal (Marsaglia polar method).
    double normal() noexcept;
    /// Gamma(shape, scale) via Marsaglia-Tsang squeeze-rejection.
    double gamma(double shape, double scale);

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace uwoc

#endif
