#include "uwoc/cnn.hpp"

#include "cnn_oracles.hpp"
#include "uwoc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace uwoc;
using namespace uwoc::cnn;

namespace {

Architecture tiny_architecture() {
    Architecture a;
    a.input = 14;
    a.kernel = 3;
    a.conv1_channels = 2;
    a.conv2_channels = 3;
    a.hidden = 6;
    a.osnr_classes = 4;
    a.format_classes = 3;
    a.phase_classes = 5;
    return a;
}

std::vector<double> random_input(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform();
    return x;
}

double sample_loss(const Network& net, const std::vector<double>& x, const Labels& l) {
    return loss(net.forward(x), l);
}

} // namespace

TEST_CASE("conv2d output shape for the network's first layer") {
    Rng rng(1);
    const auto out = conv2d(oracle::random_tensor({1, 64, 64}, rng), oracle::random_tensor({6, 1, 5, 5}, rng), Tensor({6}));
    CHECK(out.shape == std::vector<std::size_t>{6, 60, 60});
}

TEST_CASE("conv2d with a centred unit kernel crops the interior") {
    Rng rng(2);
    const auto in = oracle::random_tensor({1, 9, 9}, rng);
    Tensor k({1, 1, 5, 5});
    k[12] = 1.0;
    const auto out = conv2d(in, k, Tensor({1}));
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) CHECK(out[y * 5 + x] == in[(y + 2) * 9 + x + 2]);
}

TEST_CASE("conv2d equals the brute-force reference") {
    Rng rng(3);
    const auto in = oracle::random_tensor({2, 8, 8}, rng);
    const auto k = oracle::random_tensor({3, 2, 3, 3}, rng);
    const auto b = oracle::random_tensor({3}, rng);
    const auto fast = conv2d(in, k, b);
    const auto ref = oracle::conv2d(in, k, b);
    REQUIRE(fast.shape == ref.shape);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(fast[i] - ref[i]) <= 1e-12);
}

TEST_CASE("conv2d rejects mismatched shapes") {
    CHECK_THROWS_AS(conv2d(Tensor({2, 8, 8}), Tensor({3, 1, 3, 3}), Tensor({3})), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4}), Tensor({3, 1, 5, 5}), Tensor({3})), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(Tensor({1, 8, 8}), Tensor({3, 1, 3, 3}), Tensor({2})), std::invalid_argument);
}

TEST_CASE("conv2d_backward matches the brute-force reference's finite differences") {
    Rng rng(4);
    auto in = oracle::random_tensor({2, 6, 6}, rng);
    auto k = oracle::random_tensor({2, 2, 3, 3}, rng);
    const auto b = oracle::random_tensor({2}, rng);
    const auto g = oracle::random_tensor({2, 4, 4}, rng);
    auto objective = [&](const Tensor& input, const Tensor& kern) {
        const auto out = oracle::conv2d(input, kern, b);
        double s = 0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * g[i];
        return s;
    };
    Tensor gk(k.shape), gb({2}), gin;
    conv2d_backward(in, k, g, gk, gb, &gin);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < k.size(); ++i) {
        auto kp = k, km = k;
        kp[i] += eps;
        km[i] -= eps;
        CHECK(gk[i] == doctest::Approx((objective(in, kp) - objective(in, km)) / (2 * eps)).epsilon(1e-7));
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
        auto ip = in, im = in;
        ip[i] += eps;
        im[i] -= eps;
        CHECK(gin[i] == doctest::Approx((objective(ip, k) - objective(im, k)) / (2 * eps)).epsilon(1e-7));
    }
}

TEST_CASE("relu") {
    Tensor t({3});
    t.data = {-1.0, 0.0, 2.0};
    CHECK(relu(t).data == std::vector<double>{0.0, 0.0, 2.0});
    t.data = {-3.0, -0.5, -1e-300};
    CHECK(relu(t).data == std::vector<double>{0.0, 0.0, 0.0});
    t.data = {0.0, 4.0, 1e-300};
    CHECK(relu(t).data == t.data);
}

TEST_CASE("maxpool2 values, shapes and tie-break") {
    Tensor block({1, 2, 2});
    block.data = {1, 2, 3, 4};
    auto p = maxpool2(block);
    CHECK(p.output[0] == 4.0);
    CHECK(p.argmax[0] == 3);

    Rng rng(5);
    CHECK(maxpool2(oracle::random_tensor({6, 60, 60}, rng)).output.shape == std::vector<std::size_t>{6, 30, 30});

    Tensor flat({2, 4, 4});
    flat.fill(7.0);
    auto q = maxpool2(flat);
    for (double v : q.output.data) CHECK(v == 7.0);
    // first element of each window in row-major order
    CHECK(q.argmax == std::vector<std::uint32_t>{0, 2, 8, 10, 16, 18, 24, 26});
    Tensor g(q.output.shape);
    g.fill(1.0);
    const auto back = maxpool2_backward(q, g, flat.shape);
    CHECK(back[0] == 1.0);
    CHECK(back[1] == 0.0);
    CHECK(back[4] == 0.0);

    CHECK_THROWS_AS(maxpool2(Tensor({1, 3, 4})), std::invalid_argument);
}

TEST_CASE("maxpool2 matches the direct definition on random data") {
    Rng rng(6);
    const auto in = oracle::random_tensor({3, 10, 8}, rng);
    const auto p = maxpool2(in);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 4; ++x) {
                const auto at = [&](std::size_t yy, std::size_t xx) { return in[(c * 10 + yy) * 8 + xx]; };
                const double m = std::max({at(2 * y, 2 * x), at(2 * y, 2 * x + 1), at(2 * y + 1, 2 * x), at(2 * y + 1, 2 * x + 1)});
                CHECK(p.output[(c * 5 + y) * 4 + x] == m);
            }
}

TEST_CASE("architecture shape chains per resolution") {
    CHECK(Architecture::for_resolution(64).flatten_size() == 2028);
    CHECK(Architecture::for_resolution(64).conv1_size() == 60);
    CHECK(Architecture::for_resolution(64).pool1_size() == 30);
    CHECK(Architecture::for_resolution(64).conv2_size() == 26);
    CHECK(Architecture::for_resolution(64).pool2_size() == 13);
    CHECK(Architecture::for_resolution(32).flatten_size() == 300);
    CHECK(Architecture::for_resolution(28).flatten_size() == 192);
    CHECK(Architecture::for_resolution(16).flatten_size() == 12);
    CHECK_THROWS_AS(Architecture::for_resolution(30), std::invalid_argument);

    const Parameters p(Architecture::for_resolution(64));
    CHECK(p.conv1_w().shape == std::vector<std::size_t>{6, 1, 5, 5});
    CHECK(p.conv2_w().shape == std::vector<std::size_t>{12, 6, 5, 5});
    CHECK(p.fc_w().shape == std::vector<std::size_t>{2028, 192});
    CHECK(p.head_w(0).shape == std::vector<std::size_t>{192, 16});
    CHECK(p.head_w(1).shape == std::vector<std::size_t>{192, 4});
    CHECK(p.head_w(2).shape == std::vector<std::size_t>{192, 5});
}

TEST_CASE("softmax and cross entropy") {
    const std::vector<double> logits{0.3, -1.2, 2.5, 0.0};
    const auto p = softmax(logits);
    double s = 0;
    for (double v : p) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-12);
    for (int l = 0; l < 4; ++l)
        CHECK(std::abs(cross_entropy(logits, l) - oracle::naive_cross_entropy(logits, l)) <= 1e-10);
    const std::vector<double> huge{1000.0, 0.0};
    CHECK(cross_entropy(huge, 0) == doctest::Approx(0.0));
    CHECK(std::isfinite(cross_entropy(huge, 1)));
    CHECK_THROWS_AS(cross_entropy(logits, 4), std::invalid_argument);
}

TEST_CASE("zero network gives uniform heads and the analytic loss") {
    const Network net(Architecture::for_resolution(64));
    const auto logits = net.forward(random_input(64 * 64, 1));
    for (double v : logits.osnr) CHECK(v == 0.0);
    const double expected = std::log(16.0) + std::log(4.0) + std::log(5.0);
    CHECK(expected == doctest::Approx(5.7683).epsilon(1e-4));
    CHECK(std::abs(loss(logits, {3, 1, 2}) - expected) < 1e-6);
    CHECK_THROWS_AS(loss(logits, {16, 0, 0}), std::invalid_argument);
}

TEST_CASE("forward: normalized heads, determinism, input validation") {
    const auto net = Network::initialized(Architecture::for_resolution(64), 42);
    const auto x = random_input(64 * 64, 2);
    const auto a = net.forward(x);
    const auto b = Network::initialized(Architecture::for_resolution(64), 42).forward(x);
    CHECK(a.osnr == b.osnr);
    CHECK(a.format == b.format);
    CHECK(a.phase == b.phase);
    for (const auto* head : {&a.osnr, &a.format, &a.phase}) {
        double s = 0;
        for (double v : softmax(*head)) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK(a.osnr.size() == 16);
    CHECK(a.format.size() == 4);
    CHECK(a.phase.size() == 5);
    CHECK_THROWS_AS(net.forward(random_input(32 * 32, 1)), std::invalid_argument);
}

TEST_CASE("analytic gradients agree with central finite differences on a downsized network") {
    const auto arch = tiny_architecture();
    auto net = Network::initialized(arch, 7);
    const auto x = random_input(14 * 14, 8);
    const Labels labels{2, 1, 4};

    ForwardCache cache;
    net.forward(x, cache);
    Parameters grad(arch);
    grad.zero();
    net.backward(cache, labels, grad);

    const double eps = 1e-5;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t p = 0; p < parameter_count; ++p) {
        auto& t = net.parameters().tensors[p];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            t[i] = orig + eps;
            const double up = sample_loss(net, x, labels);
            t[i] = orig - eps;
            const double down = sample_loss(net, x, labels);
            t[i] = orig;
            const double numeric = (up - down) / (2 * eps);
            const double analytic = grad.tensors[p][i];
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
            INFO(parameter_names[p] << "[" << i << "] analytic " << analytic << " numeric " << numeric);
            CHECK(rel < 1e-5);
            ++checked;
        }
    }
    CHECK(checked == grad.scalar_count());
    MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("a saturated correct prediction has exactly zero gradient") {
    const auto arch = tiny_architecture();
    Network net(arch);
    const Labels labels{1, 2, 3};
    net.parameters().head_b(0)[1] = 1000.0;
    net.parameters().head_b(1)[2] = 1000.0;
    net.parameters().head_b(2)[3] = 1000.0;
    ForwardCache cache;
    const auto logits = net.forward(random_input(14 * 14, 3), cache);
    CHECK(loss(logits, labels) == 0.0);
    Parameters grad(arch);
    net.backward(cache, labels, grad);
    for (const auto& t : grad.tensors)
        for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("backward rejects a cache from another network") {
    const auto big = Network::initialized(Architecture::for_resolution(16), 1);
    const auto small = Network::initialized(tiny_architecture(), 1);
    ForwardCache cache;
    big.forward(random_input(16 * 16, 1), cache);
    Parameters grad(tiny_architecture());
    CHECK_THROWS_AS(small.backward(cache, {0, 0, 0}, grad), std::invalid_argument);
}

TEST_CASE("adam: first step, zero gradient, constant gradient") {
    Architecture a = tiny_architecture();
    Parameters params(a), grad(a);
    params.zero();
    grad.zero();
    grad.conv1_b()[0] = 0.3;
    grad.conv1_b()[1] = -2e-9;
    Adam adam(params);
    adam.step(params, grad);
    // m_hat = g, v_hat = g^2 after one bias-corrected step
    CHECK(params.conv1_b()[0] == doctest::Approx(-1e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
    CHECK(params.conv1_b()[1] == doctest::Approx(1e-3 * 2e-9 / (2e-9 + 1e-8)).epsilon(1e-12));
    CHECK(params.fc_w()[0] == 0.0);
    CHECK(adam.step_count() == 1);

    const double m1 = adam.first_moment().conv1_b()[0];
    const auto before = params;
    Parameters zero(a);
    adam.step(params, zero);
    CHECK(adam.first_moment().conv1_b()[0] == doctest::Approx(0.9 * m1));
    CHECK(params.fc_w()[0] == before.fc_w()[0]);

    Parameters p2(a), g2(a);
    g2.fc_b()[0] = 0.05;
    Adam constant(p2);
    double last = 0.0;
    for (int i = 0; i < 3000; ++i) {
        const double prev = p2.fc_b()[0];
        constant.step(p2, g2);
        last = p2.fc_b()[0] - prev;
    }
    CHECK(std::abs(last) == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(last < 0.0);

    Parameters wrong(Architecture::for_resolution(16));
    CHECK_THROWS_AS(constant.step(wrong, g2), std::invalid_argument);
}

TEST_CASE("weight file round trip and validation") {
    const auto dir = std::filesystem::temp_directory_path() / "uwoc_test_cnn";
    std::filesystem::create_directories(dir);
    const auto net = Network::initialized(Architecture::for_resolution(32), 11);
    save_weights(dir / "w.bin", net);
    const auto back = load_weights(dir / "w.bin");
    CHECK(back.architecture() == net.architecture());
    for (std::size_t p = 0; p < parameter_count; ++p)
        CHECK(back.parameters().tensors[p].data == net.parameters().tensors[p].data);

    {
        std::ifstream in(dir / "w.bin", std::ios::binary);
        char magic[7];
        in.read(magic, 7);
        CHECK(std::string(magic, 6) == "UWOCNN");
        CHECK(magic[6] == '\0');
    }
    const auto size = std::filesystem::file_size(dir / "w.bin");
    std::filesystem::copy_file(dir / "w.bin", dir / "trunc.bin", std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(dir / "trunc.bin", size - 5);
    CHECK_THROWS_AS(load_weights(dir / "trunc.bin"), ParseError);
    {
        std::ofstream bad(dir / "bad.bin", std::ios::binary);
        bad << "NOTAWEIGHTFILE";
    }
    CHECK_THROWS_AS(load_weights(dir / "bad.bin"), ParseError);
    CHECK_THROWS_AS(load_weights(dir / "nope.bin"), IoError);
}
