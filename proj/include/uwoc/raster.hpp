#ifndef UWOC_RASTER_HPP
#define UWOC_RASTER_HPP

#include "uwoc/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace uwoc {

inline constexpr int render_resolution = 656;

/// True for 16, 28, 32, 64 and the 656 render size.
bool is_allowed_resolution(int resolution) noexcept;
/// True for the network input sizes 16, 28, 32, 64.
bool is_training_resolution(int resolution) noexcept;

struct RenderStyle {
    double extent = 3.0;          // plot half-width in normalized amplitude units
    int marker_radius = 2;        // px, filled disc
    int marker_intensity = 64;    // added per stamp, saturates at 255
};

struct RgbImage {
    int resolution = 0;
    std::vector<std::uint8_t> rgb;   // row-major, 3 bytes per pixel
    std::size_t clipped = 0;         // symbols outside the plot extent
};

/// Square 8-bit gray image, row 0 at the top.
struct ConstellationImage {
    int resolution = 0;
    double extent = 3.0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row * resolution + col)]; }
};

/// Pixel centre of a symbol: linear map of [-extent, extent] onto [0, res-1],
/// Q axis pointing up, rounded half away from zero.
std::pair<int, int> symbol_pixel(cdouble symbol, int resolution, double extent);

RgbImage render(const IQFrame& frame, int resolution = render_resolution, const RenderStyle& style = {});

/// Luma Y = round(0.299 R + 0.587 G + 0.114 B), in exact integer arithmetic.
ConstellationImage to_grayscale(const RgbImage& image, double extent = 3.0);

/// Area-average resampling with fractional footprints.
ConstellationImage downsample(const ConstellationImage& image, int target);

/// render -> grayscale -> downsample -> scale to [0, 1].
std::vector<double> preprocess(const IQFrame& frame, int resolution, const RenderStyle& style = {});
/// Gray image at the given resolution (the integer stage of preprocess).
ConstellationImage rasterize(const IQFrame& frame, int resolution, const RenderStyle& style = {});
std::vector<double> normalize_pixels(const ConstellationImage& image);

/// Binary PGM ("P5", maxval 255).
void write_pgm(const std::filesystem::path& path, const ConstellationImage& image);
ConstellationImage read_pgm(const std::filesystem::path& path);

} // namespace uwoc

#endif
