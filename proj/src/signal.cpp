#include "uwoc/signal.hpp"

#include "uwoc/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace uwoc {

namespace {

int gray_decode(int g) {
    int b = 0;
    for (; g != 0; g >>= 1) b ^= g;
    return b;
}

// Level for an axis of n = 2^bits Gray-labelled amplitudes -(n-1)..(n-1).
double gray_level(int label, int n) {
    return 2.0 * gray_decode(label) - (n - 1);
}

std::vector<cdouble> normalized(std::vector<cdouble> pts) {
    double power = 0.0;
    for (auto p : pts) power += std::norm(p);
    const double g = 1.0 / std::sqrt(power / static_cast<double>(pts.size()));
    for (auto& p : pts) p *= g;
    return pts;
}

std::vector<cdouble> rectangular(int i_bits, int q_bits) {
    const int ni = 1 << i_bits;
    const int nq = 1 << q_bits;
    std::vector<cdouble> pts(static_cast<std::size_t>(ni * nq));
    for (int label = 0; label < ni * nq; ++label) {
        const int li = label >> q_bits;
        const int lq = label & (nq - 1);
        pts[static_cast<std::size_t>(label)] = {gray_level(li, ni), gray_level(lq, nq)};
    }
    return normalized(std::move(pts));
}

std::vector<cdouble> cross32() {
    std::vector<cdouble> pts;
    pts.reserve(32);
    for (int row = 0; row < 6; ++row) {
        for (int col = 0; col < 6; ++col) {
            const bool corner = (row == 0 || row == 5) && (col == 0 || col == 5);
            if (corner) continue;
            pts.emplace_back(2.0 * col - 5.0, 5.0 - 2.0 * row);
        }
    }
    return normalized(std::move(pts));
}

} // namespace

std::array<std::uint8_t, 4> ModulationFormat::one_hot() const noexcept {
    std::array<std::uint8_t, 4> v{};
    v[static_cast<std::size_t>(index())] = 1;
    return v;
}

std::string ModulationFormat::name() const {
    return std::to_string(order()) + "QAM";
}

ModulationFormat ModulationFormat::from_index(int index) {
    if (index < 0 || index > 3) throw std::invalid_argument("modulation index out of range: " + std::to_string(index));
    return ModulationFormat{static_cast<Modulation>(index)};
}

ModulationFormat ModulationFormat::from_name(std::string_view name) {
    for (auto m : all_modulations) {
        ModulationFormat f{m};
        if (name == f.name() || name == std::to_string(f.order())) return f;
    }
    throw std::invalid_argument("unknown modulation format: " + std::string(name));
}

Bits generate_prbs(std::uint64_t seed, std::size_t n_bits) {
    if (n_bits == 0) throw std::invalid_argument("generate_prbs: n_bits must be positive");
    Rng rng(seed);
    Bits bits(n_bits);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n_bits; ++i) {
        if (i % 64 == 0) word = rng.next();
        bits[i] = static_cast<std::uint8_t>((word >> (63 - i % 64)) & 1U);
    }
    return bits;
}

const std::vector<cdouble>& constellation_points(ModulationFormat format) {
    static const std::array<std::vector<cdouble>, 4> table{
        rectangular(2, 1), rectangular(2, 2), cross32(), rectangular(3, 3)};
    return table[static_cast<std::size_t>(format.index())];
}

IQFrame map_symbols(std::span<const std::uint8_t> bits, ModulationFormat format) {
    const auto bps = static_cast<std::size_t>(format.bits_per_symbol());
    if (bits.size() % bps != 0)
        throw std::invalid_argument("map_symbols: bit count is not a multiple of bits per symbol");
    const auto& alphabet = constellation_points(format);
    IQFrame frame{format, {}};
    frame.symbols.reserve(bits.size() / bps);
    for (std::size_t i = 0; i < bits.size(); i += bps) {
        std::size_t label = 0;
        for (std::size_t b = 0; b < bps; ++b) {
            if (bits[i + b] > 1) throw std::invalid_argument("map_symbols: bits must be 0 or 1");
            label = (label << 1) | bits[i + b];
        }
        frame.symbols.push_back(alphabet[label]);
    }
    return frame;
}

Bits demap_symbols(const IQFrame& frame) {
    const auto& alphabet = constellation_points(frame.format);
    const int bps = frame.format.bits_per_symbol();
    Bits bits;
    bits.reserve(frame.length() * static_cast<std::size_t>(bps));
    for (auto s : frame.symbols) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < alphabet.size(); ++k) {
            const double d = std::norm(s - alphabet[k]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        for (int b = bps - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((best >> b) & 1U));
    }
    return bits;
}

} // namespace uwoc
