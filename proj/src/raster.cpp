#include "uwoc/raster.hpp"

#include "uwoc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace uwoc {

namespace {

struct Tap {
    int index;
    double weight;
};

// taps[j] = source indices and fractional-area weights of output cell j
std::vector<std::vector<Tap>> box_taps(int source, int target) {
    const double scale = static_cast<double>(source) / target;
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(target));
    for (int j = 0; j < target; ++j) {
        const double lo = j * scale;
        const double hi = (j + 1) * scale;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(source - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int i = first; i <= last; ++i) {
            const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (overlap > 0.0) taps[static_cast<std::size_t>(j)].push_back({i, overlap / scale});
        }
    }
    return taps;
}

} // namespace

bool is_allowed_resolution(int r) noexcept {
    return is_training_resolution(r) || r == render_resolution;
}

bool is_training_resolution(int r) noexcept {
    return r == 16 || r == 28 || r == 32 || r == 64;
}

std::pair<int, int> symbol_pixel(cdouble symbol, int resolution, double extent) {
    const double span = resolution - 1;
    const double i = std::clamp(symbol.real(), -extent, extent);
    const double q = std::clamp(symbol.imag(), -extent, extent);
    const auto col = static_cast<int>(std::lround((i + extent) / (2.0 * extent) * span));
    const auto row = static_cast<int>(std::lround((extent - q) / (2.0 * extent) * span));
    return {row, col};
}

RgbImage render(const IQFrame& frame, int resolution, const RenderStyle& style) {
    if (frame.symbols.empty()) throw std::invalid_argument("render: empty frame");
    if (resolution <= 0) throw std::invalid_argument("render: resolution must be positive");
    if (!(style.extent > 0.0)) throw std::invalid_argument("render: extent must be positive");

    const auto n = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    std::vector<int> acc(n, 0);
    const int r = style.marker_radius;
    std::size_t clipped = 0;
    for (auto s : frame.symbols) {
        if (std::abs(s.real()) > style.extent || std::abs(s.imag()) > style.extent || !std::isfinite(std::abs(s)))
            ++clipped;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) continue;
        const auto [row, col] = symbol_pixel(s, resolution, style.extent);
        for (int dy = -r; dy <= r; ++dy) {
            const int y = row + dy;
            if (y < 0 || y >= resolution) continue;
            for (int dx = -r; dx <= r; ++dx) {
                const int x = col + dx;
                if (x < 0 || x >= resolution || dx * dx + dy * dy > r * r) continue;
                int& cell = acc[static_cast<std::size_t>(y * resolution + x)];
                cell = std::min(255, cell + style.marker_intensity);
            }
        }
    }
    RgbImage img{resolution, std::vector<std::uint8_t>(3 * n), clipped};
    for (std::size_t p = 0; p < n; ++p) {
        const auto v = static_cast<std::uint8_t>(acc[p]);
        img.rgb[3 * p] = img.rgb[3 * p + 1] = img.rgb[3 * p + 2] = v;
    }
    return img;
}

ConstellationImage to_grayscale(const RgbImage& image, double extent) {
    const auto n = static_cast<std::size_t>(image.resolution) * static_cast<std::size_t>(image.resolution);
    if (image.rgb.size() != 3 * n) throw std::invalid_argument("to_grayscale: pixel buffer does not match resolution");
    ConstellationImage out{image.resolution, extent, std::vector<std::uint8_t>(n)};
    for (std::size_t p = 0; p < n; ++p) {
        const int y = 299 * image.rgb[3 * p] + 587 * image.rgb[3 * p + 1] + 114 * image.rgb[3 * p + 2];
        out.pixels[p] = static_cast<std::uint8_t>((y + 500) / 1000);
    }
    return out;
}

ConstellationImage downsample(const ConstellationImage& image, int target) {
    const int src = image.resolution;
    if (target <= 0) throw std::invalid_argument("downsample: target must be positive");
    if (target > src) throw std::invalid_argument("downsample: target larger than source");
    if (image.pixels.size() != static_cast<std::size_t>(src) * static_cast<std::size_t>(src))
        throw std::invalid_argument("downsample: pixel buffer does not match resolution");
    if (target == src) return image;

    const auto taps = box_taps(src, target);
    // columns first: src rows x target cols
    std::vector<double> partial(static_cast<std::size_t>(src) * static_cast<std::size_t>(target), 0.0);
    for (int y = 0; y < src; ++y) {
        const std::uint8_t* row = image.pixels.data() + static_cast<std::size_t>(y) * src;
        for (int j = 0; j < target; ++j) {
            double sum = 0.0;
            for (const auto& t : taps[static_cast<std::size_t>(j)]) sum += t.weight * row[t.index];
            partial[static_cast<std::size_t>(y) * target + j] = sum;
        }
    }
    ConstellationImage out{target, image.extent,
                           std::vector<std::uint8_t>(static_cast<std::size_t>(target) * target)};
    for (int i = 0; i < target; ++i) {
        for (int j = 0; j < target; ++j) {
            double sum = 0.0;
            for (const auto& t : taps[static_cast<std::size_t>(i)])
                sum += t.weight * partial[static_cast<std::size_t>(t.index) * target + j];
            out.pixels[static_cast<std::size_t>(i) * target + j] =
                static_cast<std::uint8_t>(std::clamp(std::lround(sum), 0L, 255L));
        }
    }
    return out;
}

ConstellationImage rasterize(const IQFrame& frame, int resolution, const RenderStyle& style) {
    if (!is_allowed_resolution(resolution)) throw std::invalid_argument("unsupported resolution " + std::to_string(resolution));
    const auto gray = to_grayscale(render(frame, render_resolution, style), style.extent);
    return downsample(gray, resolution);
}

std::vector<double> normalize_pixels(const ConstellationImage& image) {
    std::vector<double> out(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), out.begin(),
                   [](std::uint8_t v) { return v / 255.0; });
    return out;
}

std::vector<double> preprocess(const IQFrame& frame, int resolution, const RenderStyle& style) {
    return normalize_pixels(rasterize(frame, resolution, style));
}

void write_pgm(const std::filesystem::path& path, const ConstellationImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P5\n" << image.resolution << ' ' << image.resolution << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

ConstellationImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path.string());
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    if (token() != "P5") throw ParseError("not a binary PGM: " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw ParseError("malformed PGM header: " + path.string());
    }
    if (w <= 0 || w != h) throw ParseError("PGM must be square: " + path.string());
    if (maxval != 255) throw ParseError("PGM maxval must be 255: " + path.string());
    ConstellationImage img{w, 3.0, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw ParseError("truncated PGM: " + path.string());
    return img;
}

} // namespace uwoc
