#include "uwoc/cnn.hpp"

#include "uwoc/errors.hpp"
#include "uwoc/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace uwoc::cnn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// out[j] = bias[j] + sum_i x[i] w[i][j], w is (in, out); zero inputs skipped.
void dense_forward(std::span<const double> x, const Tensor& w, const Tensor& b, std::vector<double>& out) {
    const std::size_t n_out = b.size();
    out.assign(b.data.begin(), b.data.end());
    double* o = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* row = w.data.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) o[j] += xi * row[j];
    }
}

// Accumulates dW, db and writes dx (if non-null) for the affine map above.
void dense_backward(std::span<const double> x, const Tensor& w, std::span<const double> grad_out,
                    Tensor& grad_w, Tensor& grad_b, double* grad_x) {
    const std::size_t n_out = grad_out.size();
    for (std::size_t j = 0; j < n_out; ++j) grad_b[j] += grad_out[j];
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double* row = w.data.data() + i * n_out;
        if (grad_x != nullptr) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_out; ++j) s += row[j] * grad_out[j];
            grad_x[i] = s;
        }
        if (xi == 0.0) continue;
        double* grow = grad_w.data.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) grow[j] += xi * grad_out[j];
    }
}

void relu_inplace(Tensor& t) {
    for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
}

// Zeroes gradient entries where the post-ReLU activation is not positive.
void relu_mask(const Tensor& activation, Tensor& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(activation[i] > 0.0)) grad[i] = 0.0;
}

std::vector<double> softmax_minus_onehot(std::span<const double> logits, int label) {
    auto p = softmax(logits);
    p[static_cast<std::size_t>(label)] -= 1.0;
    return p;
}

std::size_t head_width(const Architecture& a, int head) {
    return static_cast<std::size_t>(head == 0 ? a.osnr_classes : head == 1 ? a.format_classes : a.phase_classes);
}

std::vector<double>& head_logits(Logits& l, int head) {
    return head == 0 ? l.osnr : head == 1 ? l.format : l.phase;
}

int head_label(const Labels& l, int head) {
    return head == 0 ? l.osnr : head == 1 ? l.format : l.phase;
}

int argmax_of(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

} // namespace

// ---------------------------------------------------------------------------
// Layer primitives
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require(input.rank() == 3 && kernels.rank() == 4 && bias.rank() == 1, "conv2d: bad tensor ranks");
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t n = kernels.dim(0), k = kernels.dim(2);
    require(kernels.dim(1) == c_in, "conv2d: kernel channel count does not match input");
    require(kernels.dim(3) == k, "conv2d: kernels must be square");
    require(bias.dim(0) == n, "conv2d: bias length does not match kernel count");
    require(h >= k && w >= k, "conv2d: input smaller than kernel");
    const std::size_t ho = h - k + 1, wo = w - k + 1;

    Tensor out({n, ho, wo});
    for (std::size_t o = 0; o < n; ++o) {
        double* dst = out.data.data() + o * ho * wo;
        std::fill(dst, dst + ho * wo, bias[o]);
        for (std::size_t c = 0; c < c_in; ++c) {
            const double* src = input.data.data() + c * h * w;
            const double* ker = kernels.data.data() + (o * c_in + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wt = ker[ky * k + kx];
                    for (std::size_t y = 0; y < ho; ++y) {
                        const double* s = src + (y + ky) * w + kx;
                        double* d = dst + y * wo;
                        for (std::size_t x = 0; x < wo; ++x) d[x] += wt * s[x];
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                     Tensor& grad_kernels, Tensor& grad_bias, Tensor* grad_input) {
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t n = kernels.dim(0), k = kernels.dim(2);
    const std::size_t ho = h - k + 1, wo = w - k + 1;
    require(grad_output.rank() == 3 && grad_output.dim(0) == n && grad_output.dim(1) == ho && grad_output.dim(2) == wo,
            "conv2d_backward: gradient shape mismatch");
    require(grad_kernels.same_shape(kernels) && grad_bias.size() == n, "conv2d_backward: accumulator shape mismatch");
    if (grad_input != nullptr) {
        if (!grad_input->same_shape(input)) *grad_input = Tensor(input.shape);
        else grad_input->fill(0.0);
    }

    for (std::size_t o = 0; o < n; ++o) {
        const double* g = grad_output.data.data() + o * ho * wo;
        double gb = 0.0;
        for (std::size_t i = 0; i < ho * wo; ++i) gb += g[i];
        grad_bias[o] += gb;
        for (std::size_t c = 0; c < c_in; ++c) {
            const double* src = input.data.data() + c * h * w;
            const double* ker = kernels.data.data() + (o * c_in + c) * k * k;
            double* gk = grad_kernels.data.data() + (o * c_in + c) * k * k;
            double* gin = grad_input ? grad_input->data.data() + c * h * w : nullptr;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    double acc = 0.0;
                    const double wt = ker[ky * k + kx];
                    for (std::size_t y = 0; y < ho; ++y) {
                        const double* s = src + (y + ky) * w + kx;
                        const double* gr = g + y * wo;
                        for (std::size_t x = 0; x < wo; ++x) acc += gr[x] * s[x];
                        if (gin != nullptr) {
                            double* d = gin + (y + ky) * w + kx;
                            for (std::size_t x = 0; x < wo; ++x) d[x] += wt * gr[x];
                        }
                    }
                    gk[ky * k + kx] += acc;
                }
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    relu_inplace(out);
    return out;
}

PoolResult maxpool2(const Tensor& input) {
    require(input.rank() == 3, "maxpool2: expected (channels, height, width)");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    require(h % 2 == 0 && w % 2 == 0, "maxpool2: height and width must be even");
    const std::size_t ho = h / 2, wo = w / 2;
    PoolResult r{Tensor({c, ho, wo}), std::vector<std::uint32_t>(c * ho * wo)};
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                const std::size_t base = ch * h * w + 2 * y * w + 2 * x;
                const std::array<std::size_t, 4> idx{base, base + 1, base + w, base + w + 1};
                std::size_t best = idx[0];
                for (std::size_t q = 1; q < 4; ++q)
                    if (input[idx[q]] > input[best]) best = idx[q];
                const std::size_t o = (ch * ho + y) * wo + x;
                r.output[o] = input[best];
                r.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return r;
}

Tensor maxpool2_backward(const PoolResult& pool, const Tensor& grad_output,
                         const std::vector<std::size_t>& input_shape) {
    require(grad_output.same_shape(pool.output), "maxpool2_backward: gradient shape mismatch");
    Tensor grad(input_shape);
    for (std::size_t o = 0; o < grad_output.size(); ++o) grad[pool.argmax[o]] += grad_output[o];
    return grad;
}

std::vector<double> softmax(std::span<const double> logits) {
    require(!logits.empty(), "softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
    for (auto& v : p) v /= z;
    return p;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    return m + std::log(z) - logits[static_cast<std::size_t>(label)];
}

// ---------------------------------------------------------------------------
// Architecture / parameters
// ---------------------------------------------------------------------------

void Architecture::validate() const {
    require(input > 0 && kernel > 0 && conv1_channels > 0 && conv2_channels > 0 && hidden > 0,
            "architecture: sizes must be positive");
    require(osnr_classes > 0 && format_classes > 0 && phase_classes > 0, "architecture: head widths must be positive");
    require(conv1_size() > 0 && conv1_size() % 2 == 0, "architecture: first convolution output must be even");
    require(conv2_size() > 0 && conv2_size() % 2 == 0, "architecture: second convolution output must be even");
}

Architecture Architecture::for_resolution(int resolution) {
    Architecture a;
    a.input = resolution;
    a.validate();
    return a;
}

Parameters::Parameters(const Architecture& a) {
    a.validate();
    const auto c1 = static_cast<std::size_t>(a.conv1_channels);
    const auto c2 = static_cast<std::size_t>(a.conv2_channels);
    const auto k = static_cast<std::size_t>(a.kernel);
    const auto hid = static_cast<std::size_t>(a.hidden);
    tensors[0] = Tensor({c1, 1, k, k});
    tensors[1] = Tensor({c1});
    tensors[2] = Tensor({c2, c1, k, k});
    tensors[3] = Tensor({c2});
    tensors[4] = Tensor({static_cast<std::size_t>(a.flatten_size()), hid});
    tensors[5] = Tensor({hid});
    for (int head = 0; head < 3; ++head) {
        head_w(head) = Tensor({hid, head_width(a, head)});
        head_b(head) = Tensor({head_width(a, head)});
    }
}

void Parameters::zero() {
    for (auto& t : tensors) t.fill(0.0);
}

void Parameters::add_scaled(const Parameters& other, double scale) {
    for (std::size_t p = 0; p < parameter_count; ++p) {
        auto& dst = tensors[p].data;
        const auto& src = other.tensors[p].data;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
}

bool Parameters::same_shape(const Parameters& other) const {
    for (std::size_t p = 0; p < parameter_count; ++p)
        if (!tensors[p].same_shape(other.tensors[p])) return false;
    return true;
}

std::size_t Parameters::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Labels Logits::argmax() const {
    return {argmax_of(osnr), argmax_of(format), argmax_of(phase)};
}

double loss(const Logits& logits, const Labels& labels) {
    return cross_entropy(logits.osnr, labels.osnr) + cross_entropy(logits.format, labels.format) +
           cross_entropy(logits.phase, labels.phase);
}

Network::Network(const Architecture& arch) : arch_(arch), params_(arch) {}

Network Network::initialized(const Architecture& arch, std::uint64_t seed) {
    Network net(arch);
    Rng rng(seed);
    const int k2 = arch.kernel * arch.kernel;
    auto init = [&](Tensor& t, int fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        for (auto& v : t.data) v = bound * (2.0 * rng.uniform() - 1.0);
    };
    auto& p = net.params_;
    init(p.conv1_w(), k2);
    init(p.conv2_w(), k2 * arch.conv1_channels);
    init(p.fc_w(), arch.flatten_size());
    for (int head = 0; head < 3; ++head) init(p.head_w(head), arch.hidden);
    return net;
}

Logits Network::forward(std::span<const double> input) const {
    ForwardCache cache;
    return forward(input, cache);
}

Logits Network::forward(std::span<const double> input, ForwardCache& c) const {
    const auto side = static_cast<std::size_t>(arch_.input);
    if (input.size() != side * side)
        throw std::invalid_argument("forward: input size does not match network resolution " + std::to_string(arch_.input));

    c.input = Tensor({1, side, side});
    std::copy(input.begin(), input.end(), c.input.data.begin());

    c.conv1 = conv2d(c.input, params_.conv1_w(), params_.conv1_b());
    relu_inplace(c.conv1);
    c.pool1 = maxpool2(c.conv1);
    c.conv2 = conv2d(c.pool1.output, params_.conv2_w(), params_.conv2_b());
    relu_inplace(c.conv2);
    c.pool2 = maxpool2(c.conv2);

    dense_forward(c.pool2.output.data, params_.fc_w(), params_.fc_b(), c.hidden);
    for (auto& v : c.hidden) v = v > 0.0 ? v : 0.0;
    for (int head = 0; head < 3; ++head)
        dense_forward(c.hidden, params_.head_w(head), params_.head_b(head), head_logits(c.logits, head));
    return c.logits;
}

void Network::backward(const ForwardCache& c, const Labels& labels, Parameters& grad) const {
    if (!grad.same_shape(params_)) throw std::invalid_argument("backward: gradient accumulator shape mismatch");
    if (c.input.size() != static_cast<std::size_t>(arch_.input) * static_cast<std::size_t>(arch_.input) ||
        c.hidden.size() != static_cast<std::size_t>(arch_.hidden))
        throw std::invalid_argument("backward: cache does not belong to this network");

    std::vector<double> d_hidden(c.hidden.size(), 0.0);
    std::vector<double> d_tmp(c.hidden.size());
    for (int head = 0; head < 3; ++head) {
        const auto& logits = head == 0 ? c.logits.osnr : head == 1 ? c.logits.format : c.logits.phase;
        const int label = head_label(labels, head);
        if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
            throw std::invalid_argument("backward: label out of range");
        const auto d_logits = softmax_minus_onehot(logits, label);
        dense_backward(c.hidden, params_.head_w(head), d_logits, grad.head_w(head), grad.head_b(head), d_tmp.data());
        for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] += d_tmp[i];
    }
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
        if (!(c.hidden[i] > 0.0)) d_hidden[i] = 0.0;

    Tensor d_pool2(c.pool2.output.shape);
    dense_backward(c.pool2.output.data, params_.fc_w(), d_hidden, grad.fc_w(), grad.fc_b(), d_pool2.data.data());

    Tensor d_conv2 = maxpool2_backward(c.pool2, d_pool2, c.conv2.shape);
    relu_mask(c.conv2, d_conv2);
    Tensor d_pool1;
    conv2d_backward(c.pool1.output, params_.conv2_w(), d_conv2, grad.conv2_w(), grad.conv2_b(), &d_pool1);

    Tensor d_conv1 = maxpool2_backward(c.pool1, d_pool1, c.conv1.shape);
    relu_mask(c.conv1, d_conv1);
    conv2d_backward(c.input, params_.conv1_w(), d_conv1, grad.conv1_w(), grad.conv1_b(), nullptr);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(const Parameters& shape_like, AdamConfig config) : config_(config), m_(shape_like), v_(shape_like) {
    m_.zero();
    v_.zero();
}

void Adam::step(Parameters& params, const Parameters& grad) {
    if (!params.same_shape(m_) || !grad.same_shape(m_)) throw std::invalid_argument("adam: shape mismatch");
    ++steps_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t p = 0; p < parameter_count; ++p) {
        auto& w = params.tensors[p].data;
        auto& m = m_.tensors[p].data;
        auto& v = v_.tensors[p].data;
        const auto& g = grad.tensors[p].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Weight file
// ---------------------------------------------------------------------------

namespace {

constexpr char weight_magic[7] = {'U', 'W', 'O', 'C', 'N', 'N', '\0'};

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

void put_u32(std::ostream& out, std::uint32_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("truncated weight file: " + path);
    return to_little(v);
}

} // namespace

void save_weights(const std::filesystem::path& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(weight_magic, sizeof weight_magic);
    put_u32(out, weight_format_version);
    put_u32(out, static_cast<std::uint32_t>(net.architecture().input));
    for (const auto& t : net.parameters().tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data) {
            const double le = to_little(v);
            out.write(reinterpret_cast<const char*>(&le), sizeof le);
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Network load_weights(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weight file: " + name);
    char magic[sizeof weight_magic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, weight_magic, sizeof magic) != 0)
        throw ParseError("bad weight file magic: " + name);
    if (const auto version = get_u32(in, name); version != weight_format_version)
        throw ParseError("unsupported weight file version " + std::to_string(version));
    const auto resolution = static_cast<int>(get_u32(in, name));

    std::array<Tensor, parameter_count> tensors;
    for (auto& t : tensors) {
        const auto rank = get_u32(in, name);
        if (rank == 0 || rank > 4) throw ParseError("bad tensor rank in " + name);
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = get_u32(in, name);
        t = Tensor(dims);
        for (auto& v : t.data) {
            double raw = 0.0;
            if (!in.read(reinterpret_cast<char*>(&raw), sizeof raw)) throw ParseError("truncated weight file: " + name);
            v = to_little(raw);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes in weight file: " + name);

    Architecture arch;
    try {
        arch.input = resolution;
        arch.conv1_channels = static_cast<int>(tensors[0].dim(0));
        arch.kernel = static_cast<int>(tensors[0].dim(2));
        arch.conv2_channels = static_cast<int>(tensors[2].dim(0));
        arch.hidden = static_cast<int>(tensors[4].dim(1));
        arch.osnr_classes = static_cast<int>(tensors[6].dim(1));
        arch.format_classes = static_cast<int>(tensors[8].dim(1));
        arch.phase_classes = static_cast<int>(tensors[10].dim(1));
        arch.validate();
    } catch (const std::exception& e) {
        throw ParseError("inconsistent weight file " + name + ": " + e.what());
    }
    Network net(arch);
    for (std::size_t p = 0; p < parameter_count; ++p) {
        if (!tensors[p].same_shape(net.parameters().tensors[p]))
            throw ParseError("tensor " + std::string(parameter_names[p]) + " has unexpected shape in " + name);
        net.parameters().tensors[p] = std::move(tensors[p]);
    }
    return net;
}

} // namespace uwoc::cnn
