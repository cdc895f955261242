#pragma once

#include "mmwint/params.hpp"
#include "mmwint/quadrature.hpp"

#include <functional>

// Closed-form model chain: blockage probability, contention radius, neighborhood
// success probability, active AP density, interference Laplace transform and the
// average BER built on it.
namespace mmwint::analytic {

// Sectored antenna: gain 1/φ inside [-φ/2, φ/2] around boresight, 0 outside.
struct AntennaPattern {
    double phi;

    double gain_in_beam() const { return 1.0 / phi; }
    // Gain toward a direction `offset` radians away from boresight (any real, wrapped).
    double gain(double offset) const;
    bool covers(double offset) const;
};

// Wrap an angle onto (-π, π].
double wrap_angle(double a);

struct MacDerived {
    double r_cont = 0.0;        // contention radius [m]
    double area_cont = 0.0;     // π r_cont² [m²]
    double eta = 0.0;           // neighborhood success probability
    double lambda_active = 0.0; // density of concurrently transmitting APs [1/m²]
};

struct LaplaceEval {
    double s = 0.0;
    double kappa = 0.0;   // κ_m(s); +inf when blockage is disabled
    double deficit = 0.0; // bracket minus κ_m(s), computed directly for stability
    double value = 1.0;   // ℒ_I(s)
};

struct BerEval {
    double ber = 0.5;
    double error = 0.0;   // quadrature error bound carried into the BER
    bool clipped = false; // raw value fell outside [0, 1/2] by more than rounding
};

struct Numerics {
    specfun::QuadratureSpec inner{};                // ℓ-integrals (η, κ_m, deficit)
    specfun::QuadratureSpec outer{1e-13, 1e-11};    // the BER s-integral
};

// Probability that a link of length `ell` is not blocked (triangle geometry,
// always with the half-angle tangent).
double not_blocked_prob(const NetworkParams& p, double ell);

// Blockage weight used by the interference transform: like not_blocked_prob but
// with the tangent selected by p.beam_geom_mode.
double theorem_blockage_weight(const NetworkParams& p, double ell);

// Crossover distance L / (2t) of the theorem's blockage weight.
double theorem_threshold(const NetworkParams& p);

double contention_radius(const NetworkParams& p);

double neighborhood_success_prob(const NetworkParams& p, double r_cont, const specfun::QuadratureSpec& spec = {});

MacDerived active_density(const NetworkParams& p, const specfun::QuadratureSpec& spec = {});

// ∫₀^∞ ℓ·w(ℓ) dℓ in closed form, the constant inside the Laplace exponent.
double interference_bracket(const NetworkParams& p);

// Sum of the near and far κ_m panels (requires rho_blk > 0).
double kappa_m(const NetworkParams& p, double s, const specfun::QuadratureSpec& spec = {});

// ∫₀^∞ ℓ·w(ℓ)·(1 - (1 + s q ℓ^{-α}/(mφ²))^{-m}) dℓ = bracket - κ_m(s).
double laplace_deficit(const NetworkParams& p, double s, const specfun::QuadratureSpec& spec = {});

LaplaceEval laplace_interference(const NetworkParams& p, double lambda_active, double s,
                                 const specfun::QuadratureSpec& spec = {});

// Average BER with noise_pow derived from `snr_db`.
BerEval ber_average(const NetworkParams& p, double snr_db, const Numerics& num = {});

// Average BER with p.noise_pow as given and an arbitrary interference Laplace
// transform `laplace(s)`; used by the zero-interference oracle.
BerEval ber_average_with(const NetworkParams& p, const std::function<double(double)>& laplace,
                         const specfun::QuadratureSpec& outer);

} // namespace mmwint::analytic
