#include "mmwint/analytic.hpp"

#include "mmwint/errors.hpp"
#include "mmwint/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace mmwint::analytic {

using specfun::QuadratureSpec;

namespace {

constexpr double kPi = std::numbers::pi;

double theorem_tangent(const NetworkParams& p) {
    return p.beam_geom_mode == BeamGeometry::half_angle ? std::tan(0.5 * p.phi) : std::tan(p.phi);
}

// e^{-ρ t ℓ²} below L/(2t), e^{-ρ ℓ L/2} beyond.
double triangle_weight(double rho, double t, double len_rx, double ell) {
    if (rho == 0.0) return 1.0;
    const double threshold = len_rx / (2.0 * t);
    return ell < threshold ? std::exp(-rho * ell * ell * t) : std::exp(-rho * ell * len_rx / 2.0);
}

// Argument x of the Nakagami interference kernel (1 + x)^{-m}.
double kernel_arg(const NetworkParams& p, double s, double ell) {
    return s * p.q_int * std::pow(ell, -p.alpha) / (p.m_shape * p.phi * p.phi);
}

double kernel(const NetworkParams& p, double s, double ell) {
    return std::exp(-p.m_shape * std::log1p(kernel_arg(p, s, ell)));
}

double one_minus_kernel(const NetworkParams& p, double s, double ell) {
    return -std::expm1(-p.m_shape * std::log1p(kernel_arg(p, s, ell)));
}

void require_nonnegative(double v, const char* what) {
    if (!(v >= 0.0)) throw DomainError(what);
}

} // namespace

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

bool AntennaPattern::covers(double offset) const { return std::abs(wrap_angle(offset)) <= 0.5 * phi; }

double AntennaPattern::gain(double offset) const { return covers(offset) ? gain_in_beam() : 0.0; }

double not_blocked_prob(const NetworkParams& p, double ell) {
    require_nonnegative(ell, "not_blocked_prob: distance must be non-negative");
    return triangle_weight(p.rho_blk, std::tan(0.5 * p.phi), p.len_rx, ell);
}

double theorem_blockage_weight(const NetworkParams& p, double ell) {
    require_nonnegative(ell, "theorem_blockage_weight: distance must be non-negative");
    return triangle_weight(p.rho_blk, theorem_tangent(p), p.len_rx, ell);
}

double theorem_threshold(const NetworkParams& p) { return p.len_rx / (2.0 * theorem_tangent(p)); }

double contention_radius(const NetworkParams& p) {
    const double tail_gain = specfun::gamma_reg_upper_inv(p.m_shape, p.eps_cont);
    if (p.contention_rule == ContentionRule::as_printed) {
        const double inner = p.q_int * tail_gain * std::pow(p.phi, 2.0 * p.alpha - 2.0) / p.sigma_sense;
        return std::pow(inner, 1.0 / p.alpha) / (4.0 * kPi * kPi);
    }
    return std::pow(p.q_int * tail_gain / (p.sigma_sense * p.phi * p.phi), 1.0 / p.alpha);
}

double neighborhood_success_prob(const NetworkParams& p, double r_cont, const QuadratureSpec& spec) {
    if (!(r_cont > 0.0) || !std::isfinite(r_cont)) throw DomainError("neighborhood_success_prob: r_cont must be positive");
    const double scale = p.sigma_sense * p.phi * p.phi / p.q_int;
    const auto integrand = [&](double ell) {
        const double ccdf = specfun::gamma_reg_upper(p.m_shape, scale * std::pow(ell, p.alpha));
        return ccdf * not_blocked_prob(p, ell) * 2.0 * ell / (r_cont * r_cont);
    };
    const double crossover = p.len_rx / (2.0 * std::tan(0.5 * p.phi));
    std::vector<double> pts{0.0};
    if (crossover < r_cont) pts.push_back(crossover);
    pts.push_back(r_cont);
    const double alignment = p.phi * p.phi / (4.0 * kPi * kPi);
    return alignment * specfun::integrate_finite(integrand, pts, spec).value;
}

MacDerived active_density(const NetworkParams& p, const QuadratureSpec& spec) {
    MacDerived out;
    out.r_cont = contention_radius(p);
    out.area_cont = kPi * out.r_cont * out.r_cont;
    out.eta = neighborhood_success_prob(p, out.r_cont, spec);
    const double mean_neighbors = p.lambda_ap * out.area_cont * out.eta;
    if (mean_neighbors < 1e-8) {
        out.lambda_active = p.lambda_ap * (1.0 - 0.5 * mean_neighbors);
    } else {
        out.lambda_active = -std::expm1(-mean_neighbors) / (out.eta * out.area_cont);
    }
    return out;
}

double interference_bracket(const NetworkParams& p) {
    if (p.rho_blk == 0.0) return std::numeric_limits<double>::infinity();
    const double rho = p.rho_blk;
    const double t = theorem_tangent(p);
    const double len = p.len_rx;
    const double crossover_exp = std::exp(-rho * len * len / (4.0 * t));
    const double near_scale = 1.0 / (2.0 * rho * t);
    return near_scale + (4.0 / (rho * rho * len * len) + near_scale) * crossover_exp;
}

double kappa_m(const NetworkParams& p, double s, const QuadratureSpec& spec) {
    require_nonnegative(s, "kappa_m: s must be non-negative");
    if (p.rho_blk == 0.0) throw DomainError("kappa_m: diverges without blockage; use laplace_deficit");
    const double t = theorem_tangent(p);
    const double threshold = theorem_threshold(p);
    const double far_rate = p.rho_blk * p.len_rx / 2.0;

    const auto near = [&](double ell) { return ell * std::exp(-p.rho_blk * t * ell * ell) * kernel(p, s, ell); };
    const auto far = [&](double ell) { return ell * std::exp(-far_rate * ell) * kernel(p, s, ell); };
    const double near_part = specfun::integrate_finite(near, 0.0, threshold, spec).value;
    const double far_part = specfun::integrate_semi_infinite(far, threshold, spec, std::max(threshold, 1.0 / far_rate)).value;
    return near_part + far_part;
}

double laplace_deficit(const NetworkParams& p, double s, const QuadratureSpec& spec) {
    require_nonnegative(s, "laplace_deficit: s must be non-negative");
    if (s == 0.0) return 0.0;
    const double t = theorem_tangent(p);
    const double threshold = theorem_threshold(p);
    // Distance at which the kernel argument equals one.
    const double knee = std::pow(s * p.q_int / (p.m_shape * p.phi * p.phi), 1.0 / p.alpha);

    const auto integrand = [&](double ell) {
        return ell * triangle_weight(p.rho_blk, t, p.len_rx, ell) * one_minus_kernel(p, s, ell);
    };

    // Panels: [0, T] split at the knee, then geometric panels out to 8·knee so the
    // mass near the blockage decay scale is never hidden inside one huge panel.
    // Past `cap` the blockage weight has underflowed.
    const double far_rate = p.rho_blk * p.len_rx / 2.0;
    const double cap = far_rate > 0.0 ? threshold + 750.0 / far_rate : std::numeric_limits<double>::infinity();
    const double split = std::min(std::max(threshold, 8.0 * knee), cap);
    std::vector<double> pts{0.0};
    if (knee < threshold) pts.push_back(knee);
    pts.push_back(threshold);
    for (double x = threshold; x < split;) {
        const double next = std::min(4.0 * x, split);
        if (knee > x && knee < next) pts.push_back(knee);
        pts.push_back(next);
        x = next;
    }
    double total = specfun::integrate_finite(integrand, pts, spec).value;
    const double tail_scale = far_rate > 0.0 ? std::max(split, 1.0 / far_rate) : split;
    total += specfun::integrate_semi_infinite(integrand, split, spec, tail_scale).value;
    return total;
}

LaplaceEval laplace_interference(const NetworkParams& p, double lambda_active, double s, const QuadratureSpec& spec) {
    require_nonnegative(s, "laplace_interference: s must be non-negative");
    require_nonnegative(lambda_active, "laplace_interference: lambda_active must be non-negative");
    LaplaceEval out;
    out.s = s;
    out.deficit = laplace_deficit(p, s, spec);
    out.kappa = interference_bracket(p) - out.deficit;
    const double prefactor = lambda_active * p.phi * p.phi / (2.0 * kPi);
    out.value = std::exp(-prefactor * out.deficit);
    return out;
}

BerEval ber_average_with(const NetworkParams& p, const std::function<double(double)>& laplace,
                         const QuadratureSpec& outer) {
    const double m = p.m_shape;
    const double c = p.mod_c;
    const double omega = p.serving_power();
    const double noise_rate = m * p.noise_pow / omega;
    const double prefactor = std::sqrt(c) / kPi * std::exp(specfun::log_gamma(m + 0.5) - specfun::log_gamma(m));

    const auto integrand = [&](double s) {
        const double damping = std::exp(-noise_rate * s);
        if (damping == 0.0) return 0.0;
        return specfun::hyp1f1(m + 0.5, 1.5, -c * s) / std::sqrt(s) * laplace(m * s / omega) * damping;
    };
    double scale = 1.0 / c;
    if (noise_rate > 0.0) scale = std::min(scale, 1.0 / noise_rate);
    const auto q = specfun::integrate_semi_infinite(integrand, 0.0, outer, scale);

    BerEval out;
    const double raw = 0.5 - prefactor * q.value;
    out.error = prefactor * q.error;
    out.ber = std::clamp(raw, 0.0, 0.5);
    out.clipped = raw < 0.0 || raw > 0.5;
    return out;
}

BerEval ber_average(const NetworkParams& p, double snr_db, const Numerics& num) {
    if (std::isnan(snr_db)) throw DomainError("ber_average: snr_db is NaN");
    if (snr_db == -std::numeric_limits<double>::infinity()) return {0.5, 0.0, false};
    const NetworkParams q = p.with_snr(snr_db);
    q.validate();
    const MacDerived mac = active_density(q, num.inner);
    if (mac.lambda_active == 0.0) {
        return ber_average_with(q, [](double) { return 1.0; }, num.outer);
    }
    const auto laplace = [&](double s) { return laplace_interference(q, mac.lambda_active, s, num.inner).value; };
    return ber_average_with(q, laplace, num.outer);
}

} // namespace mmwint::analytic
