// Test-only reference implementations, independent of the optimized layer code.
#ifndef UWOC_TEST_CNN_ORACLES_HPP
#define UWOC_TEST_CNN_ORACLES_HPP

#include "uwoc/cnn.hpp"
#include "uwoc/rng.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using uwoc::cnn::Tensor;

// Direct six-loop cross-correlation: out[n][y][x] = b[n] + sum_c sum_i sum_j in[c][y+i][x+j] k[n][c][i][j]
inline Tensor conv2d(const Tensor& in, const Tensor& k, const Tensor& b) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), N = k.dim(0), K = k.dim(2);
    Tensor out({N, H - K + 1, W - K + 1});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t y = 0; y + K <= H; ++y)
            for (std::size_t x = 0; x + K <= W; ++x) {
                double s = b[n];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < K; ++i)
                        for (std::size_t j = 0; j < K; ++j)
                            s += in[(c * H + y + i) * W + x + j] * k[((n * C + c) * K + i) * K + j];
                out[(n * (H - K + 1) + y) * (W - K + 1) + x] = s;
            }
    return out;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, uwoc::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = lo + (hi - lo) * rng.uniform();
    return t;
}

// Cross-entropy computed in probability space (no log-sum-exp).
inline double naive_cross_entropy(const std::vector<double>& logits, int label) {
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    return -std::log(std::exp(logits[static_cast<std::size_t>(label)]) / z);
}

} // namespace oracle

#endif
