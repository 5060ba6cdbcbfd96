#ifndef UWOC_CNN_HPP
#define UWOC_CNN_HPP

#include "uwoc/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace uwoc::cnn {

// ---------------------------------------------------------------------------
// Layer primitives. Feature maps are (channels, height, width); kernels are
// (out_channels, in_channels, k, k).
// ---------------------------------------------------------------------------

/// Valid (unpadded) stride-1 cross-correlation plus per-channel bias.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

/// Accumulates kernel and bias gradients; writes the input gradient when requested.
void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                     Tensor& grad_kernels, Tensor& grad_bias, Tensor* grad_input);

Tensor relu(const Tensor& x);

struct PoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;   // flat input index per output element
};

/// 2x2 max pooling, stride 2. Ties go to the first maximum in row-major order.
PoolResult maxpool2(const Tensor& input);
Tensor maxpool2_backward(const PoolResult& pool, const Tensor& grad_output,
                         const std::vector<std::size_t>& input_shape);

/// Softmax with max subtraction.
std::vector<double> softmax(std::span<const double> logits);
/// -log softmax(logits)[label], via log-sum-exp.
double cross_entropy(std::span<const double> logits, int label);

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// conv(k) -> relu -> pool -> conv(k) -> relu -> pool -> fc -> relu -> three heads.
struct Architecture {
    int input = 64;
    int kernel = 5;
    int conv1_channels = 6;
    int conv2_channels = 12;
    int hidden = 192;
    int osnr_classes = 16;
    int format_classes = 4;
    int phase_classes = 5;

    int conv1_size() const noexcept { return input - kernel + 1; }
    int pool1_size() const noexcept { return conv1_size() / 2; }
    int conv2_size() const noexcept { return pool1_size() - kernel + 1; }
    int pool2_size() const noexcept { return conv2_size() / 2; }
    int flatten_size() const noexcept { return conv2_channels * pool2_size() * pool2_size(); }

    /// Throws std::invalid_argument if the shape chain does not close.
    void validate() const;

    static Architecture for_resolution(int resolution);
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Labels {
    int osnr = 0;
    int format = 0;
    int phase = 0;
    friend bool operator==(const Labels&, const Labels&) = default;
};

struct Logits {
    std::vector<double> osnr;
    std::vector<double> format;
    std::vector<double> phase;

    Labels argmax() const;
};

/// Sum of the three head cross-entropies, equal weights.
double loss(const Logits& logits, const Labels& labels);

inline constexpr std::size_t parameter_count = 12;
inline constexpr std::array<std::string_view, parameter_count> parameter_names{
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc.w", "fc.b",
    "head_osnr.w", "head_osnr.b", "head_format.w", "head_format.b", "head_phase.w", "head_phase.b"};

/// All learnable tensors, in weight-file order. Dense weights are (in, out).
struct Parameters {
    std::array<Tensor, parameter_count> tensors;

    Parameters() = default;
    explicit Parameters(const Architecture& arch);

    Tensor& conv1_w() { return tensors[0]; }
    Tensor& conv1_b() { return tensors[1]; }
    Tensor& conv2_w() { return tensors[2]; }
    Tensor& conv2_b() { return tensors[3]; }
    Tensor& fc_w() { return tensors[4]; }
    Tensor& fc_b() { return tensors[5]; }
    const Tensor& conv1_w() const { return tensors[0]; }
    const Tensor& conv1_b() const { return tensors[1]; }
    const Tensor& conv2_w() const { return tensors[2]; }
    const Tensor& conv2_b() const { return tensors[3]; }
    const Tensor& fc_w() const { return tensors[4]; }
    const Tensor& fc_b() const { return tensors[5]; }
    const Tensor& head_w(int head) const { return tensors[6 + 2 * static_cast<std::size_t>(head)]; }
    const Tensor& head_b(int head) const { return tensors[7 + 2 * static_cast<std::size_t>(head)]; }
    Tensor& head_w(int head) { return tensors[6 + 2 * static_cast<std::size_t>(head)]; }
    Tensor& head_b(int head) { return tensors[7 + 2 * static_cast<std::size_t>(head)]; }

    void zero();
    /// this += scale * other
    void add_scaled(const Parameters& other, double scale);
    bool same_shape(const Parameters& other) const;
    std::size_t scalar_count() const;
};

/// Intermediate activations kept by forward() for backward().
struct ForwardCache {
    Tensor input;
    Tensor conv1;        // post-ReLU
    PoolResult pool1;
    Tensor conv2;        // post-ReLU
    PoolResult pool2;
    std::vector<double> hidden;   // post-ReLU
    Logits logits;
};

class Network {
public:
    explicit Network(const Architecture& arch);

    /// He-style uniform init U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
    static Network initialized(const Architecture& arch, std::uint64_t seed);

    const Architecture& architecture() const noexcept { return arch_; }
    Parameters& parameters() noexcept { return params_; }
    const Parameters& parameters() const noexcept { return params_; }

    Logits forward(std::span<const double> input) const;
    Logits forward(std::span<const double> input, ForwardCache& cache) const;

    /// Adds d loss / d params for the cached sample into grad.
    void backward(const ForwardCache& cache, const Labels& labels, Parameters& grad) const;

private:
    Architecture arch_;
    Parameters params_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam with per-parameter first/second moments.
class Adam {
public:
    Adam(const Parameters& shape_like, AdamConfig config = {});

    void step(Parameters& params, const Parameters& grad);

    long step_count() const noexcept { return steps_; }
    const Parameters& first_moment() const noexcept { return m_; }
    const Parameters& second_moment() const noexcept { return v_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    Parameters m_;
    Parameters v_;
    long steps_ = 0;
};

// Weight file: magic "UWOCNN\0", u32 version, u32 input resolution, then each
// parameter as u32 rank, u32 dims..., little-endian f64 data.
inline constexpr std::uint32_t weight_format_version = 1;

void save_weights(const std::filesystem::path& path, const Network& net);
Network load_weights(const std::filesystem::path& path);

} // namespace uwoc::cnn

#endif
