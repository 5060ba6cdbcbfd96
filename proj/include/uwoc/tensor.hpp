#ifndef UWOC_TENSOR_HPP
#define UWOC_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace uwoc::cnn {

/// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims)
        : shape(std::move(dims)), data(element_count(shape), 0.0) {}

    static std::size_t element_count(const std::vector<std::size_t>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    bool same_shape(const Tensor& o) const noexcept { return shape == o.shape; }
};

} // namespace uwoc::cnn

#endif
