#pragma once

#include <numbers>
#include <string_view>

namespace mmwint {

// Which tangent the interference Laplace transform uses for the beam triangle.
// `half_angle` uses tan(φ/2), matching the blockage geometry; `as_printed` uses tan(φ).
enum class BeamGeometry { half_angle, as_printed };

// How the contention radius is obtained from the sensing threshold.
// `threshold_inversion` inverts Pr{q r^{-α} h / φ² ≥ σ} = ε for an aligned pair;
// `as_printed` evaluates (1/4π²)·(q F̄⁻¹(ε) φ^{2α-2} / σ)^{1/α} literally.
enum class ContentionRule { threshold_inversion, as_printed };

std::string_view to_string(BeamGeometry g);
std::string_view to_string(ContentionRule r);
BeamGeometry beam_geometry_from_string(std::string_view s);
ContentionRule contention_rule_from_string(std::string_view s);

// Scalar model parameters, linear SI units throughout.
struct NetworkParams {
    double lambda_ap = 1e-2;   // AP density [1/m²]
    double rho_blk = 1e-3;     // blockage density [1/m²]
    double sigma_sense = 1e-6; // carrier-sense threshold [W]
    double q_int = 1.0;        // interferer transmit power [W]
    double q_srv = 1.0;        // serving AP transmit power [W]
    double alpha = 2.5;        // path-loss exponent
    double m_shape = 3.0;      // Nakagami shape
    double phi = 15.0 * std::numbers::pi / 180.0; // beamwidth [rad]
    double len_rx = 0.15;      // receiver length [m]
    double dist_srv = 5.0;     // serving distance [m]
    double noise_pow = 1.0 / (100.0 * 55.90169943749474); // AWGN power [W]; 20 dB SNR at the defaults
    double mod_c = 1.0;        // modulation constant (1 = BPSK)
    double eps_cont = 1e-3;    // contention-radius tail probability
    BeamGeometry beam_geom_mode = BeamGeometry::half_angle;
    ContentionRule contention_rule = ContentionRule::threshold_inversion;
    bool allow_zero_blockage = false; // permit rho_blk == 0 (blockage weights become 1)

    // Throws ValidationError naming the first offending field.
    void validate() const;

    // Mean received serving power q_srv·ℓ₀^{-α}.
    double serving_power() const;

    // Noise power that yields `snr_db` = 10 log10(serving_power / noise).
    double noise_for_snr(double snr_db) const;

    // Copy with noise_pow set from an SNR in dB.
    NetworkParams with_snr(double snr_db) const;

    bool operator==(const NetworkParams&) const = default;
};

} // namespace mmwint
