#ifndef UWOC_SIGNAL_HPP
#define UWOC_SIGNAL_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uwoc {

using cdouble = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

enum class Modulation : std::uint8_t { QAM8 = 0, QAM16 = 1, QAM32 = 2, QAM64 = 3 };

inline constexpr std::array<Modulation, 4> all_modulations{
    Modulation::QAM8, Modulation::QAM16, Modulation::QAM32, Modulation::QAM64};

/// Modulation format with its class index (0..3 in the order 8, 16, 32, 64).
struct ModulationFormat {
    Modulation kind = Modulation::QAM16;

    constexpr int order() const noexcept { return 1 << bits_per_symbol(); }
    constexpr int bits_per_symbol() const noexcept { return 3 + static_cast<int>(kind); }
    constexpr int index() const noexcept { return static_cast<int>(kind); }
    std::array<std::uint8_t, 4> one_hot() const noexcept;
    std::string name() const;

    static ModulationFormat from_index(int index);
    static ModulationFormat from_name(std::string_view name);

    friend constexpr bool operator==(ModulationFormat, ModulationFormat) = default;
};

/// A frame of complex baseband symbols.
struct IQFrame {
    ModulationFormat format;
    std::vector<cdouble> symbols;

    std::size_t length() const noexcept { return symbols.size(); }
};

/// Deterministic pseudo-random bit source (xoshiro256** stream).
Bits generate_prbs(std::uint64_t seed, std::size_t n_bits);

/// Unit-mean-power alphabet, indexed by the bit label of each point.
///
/// 16/64-QAM are square grids and 8-QAM a 4x2 rectangle, all Gray labelled
/// per axis. 32-QAM is the 6x6 cross (corners removed) labelled in
/// row-major order, which is not Gray across every edge.
const std::vector<cdouble>& constellation_points(ModulationFormat format);

/// Maps bits (MSB first per symbol) onto the alphabet.
IQFrame map_symbols(std::span<const std::uint8_t> bits, ModulationFormat format);

/// Nearest-point hard decision back to bits.
Bits demap_symbols(const IQFrame& frame);

} // namespace uwoc

#endif
