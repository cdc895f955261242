#include "mmwint/params.hpp"

#include "mmwint/errors.hpp"

#include <cmath>
#include <string>

namespace mmwint {

std::string_view to_string(BeamGeometry g) {
    return g == BeamGeometry::half_angle ? "half_angle" : "as_printed";
}

std::string_view to_string(ContentionRule r) {
    return r == ContentionRule::threshold_inversion ? "threshold_inversion" : "as_printed";
}

BeamGeometry beam_geometry_from_string(std::string_view s) {
    if (s == "half_angle") return BeamGeometry::half_angle;
    if (s == "as_printed") return BeamGeometry::as_printed;
    throw ValidationError("beam_geom_mode", "expected half_angle or as_printed, got '" + std::string(s) + "'");
}

ContentionRule contention_rule_from_string(std::string_view s) {
    if (s == "threshold_inversion") return ContentionRule::threshold_inversion;
    if (s == "as_printed") return ContentionRule::as_printed;
    throw ValidationError("contention_rule", "expected threshold_inversion or as_printed, got '" + std::string(s) + "'");
}

namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok) throw ValidationError(field, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

void NetworkParams::validate() const {
    require(std::isfinite(lambda_ap) && lambda_ap >= 0.0, "lambda_ap", "must be finite and non-negative");
    if (allow_zero_blockage) {
        require(std::isfinite(rho_blk) && rho_blk >= 0.0, "rho_blk", "must be finite and non-negative");
    } else {
        require(finite_positive(rho_blk), "rho_blk", "must be positive (set allow_zero_blockage to permit 0)");
    }
    require(finite_positive(sigma_sense), "sigma_sense", "must be positive");
    require(finite_positive(q_int), "q_int", "must be positive");
    require(finite_positive(q_srv), "q_srv", "must be positive");
    require(std::isfinite(alpha) && alpha > 2.0, "alpha", "must exceed 2");
    require(std::isfinite(m_shape) && m_shape >= 0.5, "m_shape", "must be at least 0.5");
    require(finite_positive(phi) && phi < std::numbers::pi, "phi", "must lie in (0, pi)");
    require(finite_positive(len_rx), "len_rx", "must be positive");
    require(finite_positive(dist_srv), "dist_srv", "must be positive");
    require(std::isfinite(noise_pow) && noise_pow >= 0.0, "noise_pow", "must be finite and non-negative");
    require(finite_positive(mod_c), "mod_c", "must be positive");
    require(finite_positive(eps_cont) && eps_cont < 1.0, "eps_cont", "must lie in (0, 1)");
}

double NetworkParams::serving_power() const { return q_srv * std::pow(dist_srv, -alpha); }

double NetworkParams::noise_for_snr(double snr_db) const {
    return serving_power() * std::pow(10.0, -snr_db / 10.0);
}

NetworkParams NetworkParams::with_snr(double snr_db) const {
    NetworkParams p = *this;
    p.noise_pow = noise_for_snr(snr_db);
    return p;
}

} // namespace mmwint
