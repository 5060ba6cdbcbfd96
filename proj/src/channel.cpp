#include "uwoc/channel.hpp"

#include "uwoc/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uwoc {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive and finite");
}

double wrap_pi(double phi) {
    phi = std::remainder(phi, 2.0 * M_PI);
    return phi;
}

// Best-Fisher rejection sampler for the von Mises law with mean 0.
double sample_von_mises(double kappa, Rng& rng) {
    if (kappa < 1e-8) return M_PI * (2.0 * rng.uniform() - 1.0);
    if (kappa > 1e6) return wrap_pi(rng.normal() / std::sqrt(kappa));
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double s = (1.0 + rho * rho) / (2.0 * rho);
    double w;
    for (;;) {
        const double z = std::cos(M_PI * rng.uniform());
        w = (1.0 + s * z) / (s + z);
        const double y = kappa * (s - w);
        const double v = rng.uniform_pos();
        if (y * (2.0 - y) - v >= 0.0) break;
        if (std::log(y / v) + 1.0 - y >= 0.0) break;
    }
    const double phi = std::acos(std::clamp(w, -1.0, 1.0));
    return rng.uniform() < 0.5 ? -phi : phi;
}

} // namespace

TurbulenceParams TurbulenceParams::from_path(double cn2, double wavelength, double distance) {
    TurbulenceParams t;
    t.cn2 = cn2;
    t.wavelength = wavelength;
    t.distance = distance;
    t.scintillation_index = rytov_variance(cn2, wavelength, distance);
    const auto shape = gg_params(t.scintillation_index);
    t.alpha = shape.alpha;
    t.beta = shape.beta;
    return t;
}

double LinkBudget::received_power() const {
    return tx_power * std::exp(-path_loss_coeff * distance);
}

double rytov_variance(double cn2, double wavelength, double distance) {
    require_positive(cn2, "cn2");
    require_positive(wavelength, "wavelength");
    require_positive(distance, "distance");
    const double k = 2.0 * M_PI / wavelength;
    return 1.23 * cn2 * std::pow(k, 7.0 / 6.0) * std::pow(distance, 11.0 / 6.0);
}

GammaGammaShape gg_params(double si) {
    require_positive(si, "scintillation index");
    const double s125 = std::pow(si, 12.0 / 5.0);
    const double xa = 0.54 * si / std::pow(1.0 + 1.22 * s125, 7.0 / 6.0);
    const double xb = 0.509 * si / std::pow(1.0 + 0.69 * s125, 5.0 / 6.0);
    return {1.0 / std::expm1(xa), 1.0 / std::expm1(xb)};
}

double gg_pdf(double h, double alpha, double beta) {
    require_positive(h, "h");
    require_positive(alpha, "alpha");
    require_positive(beta, "beta");
    const double ab = alpha * beta;
    const double half = 0.5 * (alpha + beta);
    const double z = 2.0 * std::sqrt(ab * h);
    const double log_k = std::log(special::bessel_k_scaled(alpha - beta, z)) - z;
    const double log_f = M_LN2 + half * std::log(ab) - std::lgamma(alpha) - std::lgamma(beta) +
                         (half - 1.0) * std::log(h) + log_k;
    return std::exp(log_f);
}

double sample_fading(double alpha, double beta, Rng& rng) {
    require_positive(alpha, "alpha");
    require_positive(beta, "beta");
    const double x = rng.gamma(alpha, 1.0 / alpha);
    const double y = rng.gamma(beta, 1.0 / beta);
    return x * y;
}

double sample_phase_noise(double sigma_rad, PhaseModel model, Rng& rng) {
    if (!(sigma_rad >= 0.0) || !std::isfinite(sigma_rad))
        throw std::invalid_argument("phase noise deviation must be non-negative");
    if (sigma_rad == 0.0) return 0.0;
    if (model == PhaseModel::WrappedGaussian) return wrap_pi(sigma_rad * rng.normal());
    return sample_von_mises(1.0 / (sigma_rad * sigma_rad), rng);
}

double tikhonov_pdf(double phi, double sigma_rad) {
    require_positive(sigma_rad, "sigma");
    if (std::abs(phi) > M_PI) return 0.0;
    const double kappa = 1.0 / (sigma_rad * sigma_rad);
    // exp(kappa cos phi) / I0(kappa) = exp(kappa (cos phi - 1)) / (e^-kappa I0(kappa))
    return std::exp(kappa * (std::cos(phi) - 1.0)) / (2.0 * M_PI * special::bessel_i0_scaled(kappa));
}

double awgn_sigma(double osnr_db, double symbol_energy) {
    require_positive(symbol_energy, "symbol energy");
    const double noise_power = symbol_energy * std::pow(10.0, -osnr_db / 10.0);
    return std::sqrt(0.5 * noise_power);
}

IQFrame apply_channel(const IQFrame& frame, const std::optional<TurbulenceParams>& turbulence,
                      const NoiseSpec& noise, Rng& rng) {
    if (!(noise.phase_std_deg >= 0.0)) throw std::invalid_argument("phase_std_deg must be non-negative");
    const double h = turbulence ? sample_fading(turbulence->alpha, turbulence->beta, rng) : 1.0;
    const double sigma_phi = noise.phase_std_deg * M_PI / 180.0;
    const double sigma_n = awgn_sigma(noise.osnr_db);
    IQFrame out{frame.format, {}};
    out.symbols.reserve(frame.length());
    for (auto s : frame.symbols) {
        cdouble r = h * s;
        if (sigma_phi > 0.0) r *= std::polar(1.0, sample_phase_noise(sigma_phi, noise.phase_model, rng));
        if (sigma_n > 0.0) {
            const double ni = rng.normal();
            const double nq = rng.normal();
            r += cdouble(sigma_n * ni, sigma_n * nq);
        }
        out.symbols.push_back(r);
    }
    return out;
}

double link_budget_osnr(const LinkBudget& b) {
    require_positive(b.tx_power, "tx_power");
    require_positive(b.path_loss_coeff, "path_loss_coeff");
    require_positive(b.responsivity, "responsivity");
    require_positive(b.noise_bandwidth, "noise_bandwidth");
    require_positive(b.bandwidth_factor, "bandwidth_factor");
    require_positive(b.tia_noise_current, "tia_noise_current");
    require_positive(b.distance, "distance");
    const double current = b.responsivity * b.received_power();
    const double b_eff = b.bandwidth_factor * b.noise_bandwidth;
    const double shot = 2.0 * electron_charge * current * b_eff;
    const double thermal = b.tia_noise_current * b.tia_noise_current * b_eff;
    return 10.0 * std::log10(current * current / (shot + thermal));
}

double distance_for_osnr(LinkBudget budget, double target_db) {
    double lo = 1e-6;
    double hi = 1.0;
    budget.distance = lo;
    if (link_budget_osnr(budget) < target_db)
        throw std::invalid_argument("target OSNR unreachable with this link budget");
    budget.distance = hi;
    while (link_budget_osnr(budget) > target_db) {
        hi *= 2.0;
        if (hi > 1e7) throw std::invalid_argument("target OSNR not reached within 10^7 m");
        budget.distance = hi;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        budget.distance = mid;
        (link_budget_osnr(budget) > target_db ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace uwoc
