#ifndef UWOC_CHANNEL_HPP
#define UWOC_CHANNEL_HPP

#include "uwoc/rng.hpp"
#include "uwoc/signal.hpp"

#include <limits>
#include <optional>

namespace uwoc {

inline constexpr double electron_charge = 1.602176634e-19;

/// Gamma-gamma turbulence parameters; the fading mean is normalized to 1.
struct TurbulenceParams {
    double cn2 = 5e-14;           // m^(-2/3)
    double wavelength = 450e-9;   // m
    double distance = 10.0;       // m
    double alpha = 1.0;
    double beta = 1.0;
    double scintillation_index = 0.0;

    /// Derives the scintillation index and (alpha, beta) from cn2, wavelength and distance.
    static TurbulenceParams from_path(double cn2, double wavelength, double distance);
};

enum class PhaseModel { Tikhonov, WrappedGaussian };

struct NoiseSpec {
    double osnr_db = std::numeric_limits<double>::infinity();
    double phase_std_deg = 0.0;
    PhaseModel phase_model = PhaseModel::Tikhonov;
};

/// Simplified receiver link budget: Beer-Lambert path loss, shot and TIA noise.
struct LinkBudget {
    double tx_power = 0.1;              // W
    double path_loss_coeff = 0.15;      // 1/m
    double responsivity = 0.5;          // A/W
    double noise_bandwidth = 50e6;      // Hz
    double bandwidth_factor = 0.562;
    double tia_noise_current = 5e-12;   // A/sqrt(Hz)
    double distance = 10.0;             // m

    double received_power() const;
};

/// Scintillation index 1.23 Cn^2 k^(7/6) L^(11/6), k = 2 pi / lambda.
double rytov_variance(double cn2, double wavelength, double distance);

struct GammaGammaShape {
    double alpha;
    double beta;
};

/// Plane-wave alpha/beta from the scintillation index.
GammaGammaShape gg_params(double scintillation_index);

/// Gamma-gamma density of the unit-mean fading coefficient.
double gg_pdf(double h, double alpha, double beta);

/// h = X Y with X ~ Gamma(alpha, 1/alpha), Y ~ Gamma(beta, 1/beta).
double sample_fading(double alpha, double beta, Rng& rng);

/// Phase jitter in [-pi, pi]. Tikhonov: von Mises with kappa = 1/sigma^2.
double sample_phase_noise(double sigma_rad, PhaseModel model, Rng& rng);

/// Tikhonov density exp(cos(phi)/sigma^2) / (2 pi I0(1/sigma^2)).
double tikhonov_pdf(double phi, double sigma_rad);

/// Per-quadrature noise deviation for a symbol-energy-to-noise ratio in dB.
double awgn_sigma(double osnr_db, double symbol_energy = 1.0);

/// r = h s e^{j phi} + n, one fading draw per frame, i.i.d. phase and noise per symbol.
IQFrame apply_channel(const IQFrame& frame, const std::optional<TurbulenceParams>& turbulence,
                      const NoiseSpec& noise, Rng& rng);

/// Electrical SNR (dB) at the receiver implied by the link budget.
double link_budget_osnr(const LinkBudget& budget);

/// Distance at which link_budget_osnr equals target_db (bisection; OSNR falls with distance).
double distance_for_osnr(LinkBudget budget, double target_db);

} // namespace uwoc

#endif
