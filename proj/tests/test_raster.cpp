#include "uwoc/raster.hpp"

#include "uwoc/channel.hpp"
#include "uwoc/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <fstream>
#include <queue>

using namespace uwoc;

namespace {

IQFrame frame_of(std::vector<cdouble> symbols) {
    return IQFrame{ModulationFormat{Modulation::QAM16}, std::move(symbols)};
}

// 4-connected components of non-zero pixels
int count_blobs(const ConstellationImage& img) {
    const int n = img.resolution;
    std::vector<int> seen(static_cast<std::size_t>(n * n), 0);
    int blobs = 0;
    for (int start = 0; start < n * n; ++start) {
        if (img.pixels[static_cast<std::size_t>(start)] == 0 || seen[static_cast<std::size_t>(start)]) continue;
        ++blobs;
        std::queue<int> q;
        q.push(start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!q.empty()) {
            const int p = q.front();
            q.pop();
            const int r = p / n, c = p % n;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& v : nb) {
                if (v[0] < 0 || v[0] >= n || v[1] < 0 || v[1] >= n) continue;
                const int idx = v[0] * n + v[1];
                if (img.pixels[static_cast<std::size_t>(idx)] != 0 && !seen[static_cast<std::size_t>(idx)]) {
                    seen[static_cast<std::size_t>(idx)] = 1;
                    q.push(idx);
                }
            }
        }
    }
    return blobs;
}

std::pair<double, double> centroid(const ConstellationImage& img) {
    double sx = 0, sy = 0, m = 0;
    for (int r = 0; r < img.resolution; ++r)
        for (int c = 0; c < img.resolution; ++c) {
            const double v = img.at(r, c);
            sx += v * c;
            sy += v * r;
            m += v;
        }
    return {sx / m, sy / m};
}

// Fractional-area box filter: every source pixel's 2-D overlap with the output cell.
std::vector<double> brute_force_box(const ConstellationImage& img, int target) {
    const int src = img.resolution;
    const double scale = static_cast<double>(src) / target;
    auto overlap = [](double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); };
    std::vector<double> out(static_cast<std::size_t>(target * target));
    for (int i = 0; i < target; ++i)
        for (int j = 0; j < target; ++j) {
            double s = 0;
            for (int y = 0; y < src; ++y)
                for (int x = 0; x < src; ++x)
                    s += img.at(y, x) * overlap(y, y + 1, i * scale, (i + 1) * scale) *
                         overlap(x, x + 1, j * scale, (j + 1) * scale);
            out[static_cast<std::size_t>(i * target + j)] = s / (scale * scale);
        }
    return out;
}

} // namespace

TEST_CASE("symbol at the origin lands at the documented centre pixel") {
    CHECK(symbol_pixel({0.0, 0.0}, 656, 3.0) == std::pair{328, 328});
    const auto img = to_grayscale(render(frame_of({{0.0, 0.0}})));
    CHECK(img.at(328, 328) > 0);
    CHECK(img.at(328, 330) > 0);
    CHECK(img.at(328, 331) == 0);
    CHECK(img.at(330, 330) == 0);   // outside the radius-2 disc
    const auto total = std::accumulate(img.pixels.begin(), img.pixels.end(), 0);
    CHECK(total == 13 * RenderStyle{}.marker_intensity);
}

TEST_CASE("Q axis points up, I axis points right") {
    const auto up = symbol_pixel({0.0, 1.0}, 656, 3.0);
    const auto right = symbol_pixel({1.0, 0.0}, 656, 3.0);
    CHECK(up.first < 328);
    CHECK(up.second == 328);
    CHECK(right.second > 328);
}

TEST_CASE("ideal 16QAM renders 16 separate stamp clusters with nothing clipped") {
    const auto frame = map_symbols(generate_prbs(5, 4000), ModulationFormat{Modulation::QAM16});
    const auto rgb = render(frame);
    CHECK(rgb.clipped == 0);
    CHECK(count_blobs(to_grayscale(rgb)) == 16);
}

TEST_CASE("out-of-extent symbols are clipped to the border and counted") {
    const auto rgb = render(frame_of({{5.0, 0.0}, {0.0, -4.0}, {0.1, 0.1}}));
    CHECK(rgb.clipped == 2);
    const auto img = to_grayscale(rgb);
    CHECK(img.at(328, 655) > 0);
    CHECK(img.at(655, 328) > 0);
}

TEST_CASE("stamps saturate at 255") {
    std::vector<cdouble> many(20, {0.0, 0.0});
    const auto img = to_grayscale(render(frame_of(many)));
    CHECK(img.at(328, 328) == 255);
}

TEST_CASE("render rejects empty frames") {
    CHECK_THROWS_AS(render(frame_of({})), std::invalid_argument);
}

TEST_CASE("grayscale luma") {
    RgbImage rgb{2, {255, 255, 255, 0, 0, 0, 100, 100, 100, 10, 200, 30}, 0};
    const auto g = to_grayscale(rgb);
    REQUIRE(g.pixels.size() == 4);
    CHECK(int(g.pixels[0]) == 255);
    CHECK(int(g.pixels[1]) == 0);
    CHECK(int(g.pixels[2]) == 100);
    CHECK(int(g.pixels[3]) == 124);   // 2.99 + 117.4 + 3.42 = 123.81
}

TEST_CASE("downsample: constants, aligned blocks and errors") {
    ConstellationImage c{656, 3.0, std::vector<std::uint8_t>(656 * 656, 200)};
    for (int t : {16, 28, 32, 64}) {
        const auto d = downsample(c, t);
        CHECK(d.resolution == t);
        for (auto v : d.pixels) CHECK(v == 200);
    }
    ConstellationImage blocks{4, 3.0, {0, 0, 255, 255, 0, 0, 255, 255, 255, 255, 0, 0, 255, 255, 0, 0}};
    CHECK(downsample(blocks, 2).pixels == std::vector<std::uint8_t>{0, 255, 255, 0});
    CHECK_THROWS_AS(downsample(blocks, 8), std::invalid_argument);
}

TEST_CASE("downsample matches a brute-force fractional-area oracle") {
    ConstellationImage img{41, 3.0, std::vector<std::uint8_t>(41 * 41)};
    Rng rng(8);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.below(256));
    for (int t : {4, 7, 16}) {
        const auto d = downsample(img, t);
        const auto ref = brute_force_box(img, t);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(d.pixels[i] - ref[i]) <= 0.5 + 1e-9);
    }
}

TEST_CASE("downsample preserves intensity mass within half a level per output pixel") {
    const auto frame = map_symbols(generate_prbs(3, 6000), ModulationFormat{Modulation::QAM64});
    Rng rng(4);
    const auto noisy = apply_channel(frame, std::nullopt, NoiseSpec{18.0, 10.0, PhaseModel::Tikhonov}, rng);
    const auto gray = to_grayscale(render(noisy));
    const double mass_in = std::accumulate(gray.pixels.begin(), gray.pixels.end(), 0.0);
    for (int t : {16, 28, 32, 64}) {
        const auto d = downsample(gray, t);
        const double area = (656.0 / t) * (656.0 / t);
        const double mass_out = std::accumulate(d.pixels.begin(), d.pixels.end(), 0.0) * area;
        CHECK(std::abs(mass_out - mass_in) <= 0.5 * t * t * area);
    }
}

TEST_CASE("translating symbols shifts the rendered centroid proportionally") {
    const auto frame = map_symbols(generate_prbs(6, 4000), ModulationFormat{Modulation::QAM16});
    auto shifted = frame;
    for (auto& s : shifted.symbols) s += cdouble(0.5, 0.0);
    for (int res : {64, 656}) {
        const auto a = centroid(rasterize(frame, res));
        const auto b = centroid(rasterize(shifted, res));
        CHECK(std::abs((b.first - a.first) - 0.5 / 6.0 * res) <= 1.0);
        CHECK(std::abs(b.second - a.second) <= 1.0);
    }
}

TEST_CASE("preprocess is normalized and deterministic") {
    const auto frame = map_symbols(generate_prbs(6, 4000), ModulationFormat{Modulation::QAM16});
    const auto x = preprocess(frame, 64);
    CHECK(x.size() == 64 * 64);
    for (double v : x) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(preprocess(frame, 64) == x);
    ConstellationImage black{64, 3.0, std::vector<std::uint8_t>(64 * 64, 0)};
    for (double v : normalize_pixels(black)) CHECK(v == 0.0);
    CHECK_THROWS_AS(preprocess(frame, 48), std::invalid_argument);
}

TEST_CASE("PGM round trip and malformed files") {
    const auto dir = std::filesystem::temp_directory_path() / "uwoc_test_raster";
    std::filesystem::create_directories(dir);
    const auto frame = map_symbols(generate_prbs(6, 4000), ModulationFormat{Modulation::QAM16});
    const auto img = rasterize(frame, 32);
    write_pgm(dir / "a.pgm", img);
    const auto back = read_pgm(dir / "a.pgm");
    CHECK(back.resolution == 32);
    CHECK(back.pixels == img.pixels);
    {
        std::ofstream bad(dir / "bad.pgm", std::ios::binary);
        bad << "P6\n2 2\n255\n";
    }
    CHECK_THROWS_AS(read_pgm(dir / "bad.pgm"), ParseError);
    {
        std::ofstream trunc(dir / "trunc.pgm", std::ios::binary);
        trunc << "P5\n4 4\n255\nabc";
    }
    CHECK_THROWS_AS(read_pgm(dir / "trunc.pgm"), ParseError);
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), IoError);
}
