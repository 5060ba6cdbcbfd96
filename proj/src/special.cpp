#include "uwoc/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace uwoc::special {

namespace {

constexpr std::array<double, 8> kronrod_x{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kronrod_w{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd Kronrod nodes (1, 3, 5, 7).
constexpr std::array<double, 4> gauss_w{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double value;
    double error;
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = fc * kronrod_w[7];
    double gauss = fc * gauss_w[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = h * kronrod_x[j];
        const double pair = f(c - dx) + f(c + dx);
        kronrod += kronrod_w[j] * pair;
        if (j % 2 == 1) gauss += gauss_w[j / 2] * pair;
    }
    return {kronrod * h, std::abs((kronrod - gauss) * h)};
}

double asymptotic_i_scaled(double nu, double x) {
    // e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(2.0 * M_PI * x);
}

double series_i(int order, double x) {
    const double q = 0.25 * x * x;
    double term = (order == 0) ? 1.0 : 0.5 * x;
    double sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * (k + order));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

constexpr double series_cutoff = 15.0;

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_tol) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, rel_tol, abs_tol);
    // Global adaptive bisection: always split the segment with the largest error estimate.
    struct Piece {
        double lo, hi;
        Segment s;
    };
    auto worse = [](const Piece& x, const Piece& y) { return x.s.error < y.s.error; };
    constexpr int initial = 8;
    constexpr std::size_t max_pieces = 4000;
    std::vector<Piece> heap;
    heap.reserve(max_pieces + 2);
    double value = 0.0, error = 0.0, magnitude = 0.0;
    for (int i = 0; i < initial; ++i) {
        const double lo = a + (b - a) * i / initial;
        const double hi = (i + 1 == initial) ? b : a + (b - a) * (i + 1) / initial;
        heap.push_back({lo, hi, gk15(f, lo, hi)});
        value += heap.back().s.value;
        error += heap.back().s.error;
        magnitude += std::abs(heap.back().s.value);
    }
    std::make_heap(heap.begin(), heap.end(), worse);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    while (heap.size() < max_pieces) {
        // Error estimates cannot drop below accumulated rounding.
        const double tol = std::max({abs_tol, rel_tol * std::abs(value), 50.0 * eps * magnitude});
        if (error <= tol) break;
        std::pop_heap(heap.begin(), heap.end(), worse);
        const Piece worst = heap.back();
        heap.pop_back();
        const double m = 0.5 * (worst.lo + worst.hi);
        if (m <= worst.lo || m >= worst.hi) {
            heap.push_back(worst);
            break;
        }
        const Piece left{worst.lo, m, gk15(f, worst.lo, m)};
        const Piece right{m, worst.hi, gk15(f, m, worst.hi)};
        value += left.s.value + right.s.value - worst.s.value;
        error += left.s.error + right.s.error - worst.s.error;
        magnitude += std::abs(left.s.value) + std::abs(right.s.value) - std::abs(worst.s.value);
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end(), worse);
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end(), worse);
    }
    // Re-sum to shed the drift of the running updates.
    double sum = 0.0;
    for (const auto& p : heap) sum += p.s.value;
    return sum;
}

double integrate_to_infinity(const std::function<double(double)>& f, double a, double rel_tol,
                             double abs_tol) {
    auto g = [&](double u) {
        if (u >= 1.0) return 0.0;
        const double one_minus = 1.0 - u;
        const double t = a + u / one_minus;
        const double v = f(t);
        return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
    };
    return integrate(g, 0.0, 1.0, rel_tol, abs_tol);
}

double bessel_i0_scaled(double x) {
    const double ax = std::abs(x);
    if (ax < series_cutoff) return series_i(0, ax) * std::exp(-ax);
    return asymptotic_i_scaled(0.0, ax);
}

double bessel_i1_scaled(double x) {
    const double ax = std::abs(x);
    const double v = ax < series_cutoff ? series_i(1, ax) * std::exp(-ax) : asymptotic_i_scaled(1.0, ax);
    return x < 0 ? -v : v;
}

double bessel_i0(double x) {
    const double ax = std::abs(x);
    if (ax < series_cutoff) return series_i(0, ax);
    return asymptotic_i_scaled(0.0, ax) * std::exp(ax);
}

double bessel_i1(double x) {
    const double ax = std::abs(x);
    const double v = ax < series_cutoff ? series_i(1, ax) : asymptotic_i_scaled(1.0, ax) * std::exp(ax);
    return x < 0 ? -v : v;
}

double bessel_k_scaled(double nu, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("bessel_k: x must be positive and finite");
    if (!std::isfinite(nu)) throw std::invalid_argument("bessel_k: order must be finite");
    nu = std::abs(nu);
    // log-integrand: -x (cosh t - 1) + log cosh(nu t)
    auto log_integrand = [=](double t) {
        const double nt = nu * t;
        const double log_cosh = nt + std::log1p(std::exp(-2.0 * nt)) - M_LN2;
        return -x * (std::cosh(t) - 1.0) + log_cosh;
    };
    const double t_peak = std::asinh(nu / x);
    const double log_peak = log_integrand(t_peak);
    double t_end = t_peak + 1.0;
    while (log_integrand(t_end) > log_peak - 60.0) t_end = t_end * 1.5 + 1.0;
    auto f = [=](double t) { return std::exp(log_integrand(t) - log_peak); };
    double sum = 0.0;
    if (t_peak > 0.0) sum += integrate(f, 0.0, t_peak, 1e-14);
    // Split the tail so the kernel resolves the fast decay.
    double lo = t_peak;
    double width = std::max(0.25, (t_end - t_peak) / 16.0);
    while (lo < t_end) {
        const double hi = std::min(t_end, lo + width);
        sum += integrate(f, lo, hi, 1e-14);
        lo = hi;
    }
    return sum * std::exp(log_peak);
}

double bessel_k(double nu, double x) {
    return bessel_k_scaled(nu, x) * std::exp(-x);
}

} // namespace uwoc::special
