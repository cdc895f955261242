#include "mmwint/specfun.hpp"

#include "mmwint/errors.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mmwint::specfun {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSeriesTerms = 100000;

bool is_nonpositive_integer(double v) { return v <= 0.0 && v == std::floor(v); }

// Lanczos approximation, g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_log_gamma(double x) {
    // x >= 0.5
    const double xm1 = x - 1.0;
    double acc = kLanczos[0];
    for (std::size_t i = 1; i < kLanczos.size(); ++i) acc += kLanczos[i] / (xm1 + static_cast<double>(i));
    const double t = xm1 + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (xm1 + 0.5) * std::log(t) - t + std::log(acc);
}

// exp(-y + m ln y - lnΓ(m)), the common prefactor of the incomplete gamma expansions.
double gamma_prefactor(double m, double y) {
    return std::exp(-y + m * std::log(y) - log_gamma(m));
}

double lower_series(double m, double y) {
    double term = 1.0 / m;
    double sum = term;
    for (int n = 1; n < kMaxSeriesTerms; ++n) {
        term *= y / (m + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps * 0.5) return sum * gamma_prefactor(m, y);
    }
    throw NonConvergenceError("gamma_reg_upper: lower series did not converge");
}

// Modified Lentz evaluation of the continued fraction for Q(m, y).
double upper_continued_fraction(double m, double y) {
    constexpr double tiny = 1e-300;
    double b = y + 1.0 - m;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxSeriesTerms; ++i) {
        const double an = -i * (i - m);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return gamma_prefactor(m, y) * h;
    }
    throw NonConvergenceError("gamma_reg_upper: continued fraction did not converge");
}

// Power series of ₁F₁(a; b; z), accumulated with a running scale so that e^{-z}·M
// stays representable past the exp() overflow threshold. Value = mantissa·e^{log_scale}.
struct ScaledSum {
    double mantissa;
    double log_scale;
};

ScaledSum kummer_series(double a, double b, double z) {
    constexpr double rescale_at = 1e200;
    double term = 1.0;
    double sum = 1.0;
    double log_scale = 0.0;
    for (int k = 0; k < kMaxSeriesTerms; ++k) {
        const double ratio = (a + k) / (b + k) * z / (k + 1);
        term *= ratio;
        sum += term;
        if (term == 0.0) return {sum, log_scale};
        if (std::abs(term) <= kEps * 0.25 * std::abs(sum) && std::abs(ratio) < 0.5) return {sum, log_scale};
        if (std::abs(sum) > rescale_at) {
            sum /= rescale_at;
            term /= rescale_at;
            log_scale += std::log(rescale_at);
        }
    }
    throw NonConvergenceError("hyp1f1: power series exceeded " + std::to_string(kMaxSeriesTerms) + " terms");
}

double log_abs_gamma(double v) {
    if (v > 0.0) return log_gamma(v);
    return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * v))) - log_gamma(1.0 - v);
}

double gamma_sign(double v) {
    if (v > 0.0) return 1.0;
    return (static_cast<long long>(std::floor(-v)) % 2 == 0) ? -1.0 : 1.0;
}

// Algebraic large-x expansion of ₁F₁(a; b; -x) (b - a not a non-positive integer).
// Returns NaN when the exponentially small companion term is not negligible or the
// divergent series cannot reach full precision before its terms start to grow.
double kummer_asymptotic_negative(double a, double b, double x) {
    const double companion_log = log_abs_gamma(b - a) - log_abs_gamma(a) - x + (2.0 * a - b) * std::log(x);
    if (is_nonpositive_integer(a) || companion_log > std::log(kEps) - 2.0) return std::numeric_limits<double>::quiet_NaN();

    double term = 1.0;
    double sum = 1.0;
    for (int s = 0; s < 1000; ++s) {
        const double next = term * (a + s) * (a - b + 1.0 + s) / ((s + 1.0) * x);
        if (std::abs(next) > std::abs(term)) return std::numeric_limits<double>::quiet_NaN();
        term = next;
        sum += term;
        if (std::abs(term) <= kEps * 0.25 * std::abs(sum)) {
            const double log_lead = log_abs_gamma(b) - log_abs_gamma(b - a) - a * std::log(x);
            return gamma_sign(b) * gamma_sign(b - a) * std::exp(log_lead) * sum;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: argument must be positive and finite");
    if (x < 0.5) {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - lanczos_log_gamma(1.0 - x);
    }
    return lanczos_log_gamma(x);
}

double gamma_reg_upper(double m, double x) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("gamma_reg_upper: shape must be positive");
    if (!(x >= 0.0)) throw DomainError("gamma_reg_upper: argument must be non-negative");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double y = m * x;
    if (y < m + 1.0) return std::max(0.0, 1.0 - lower_series(m, y));
    return std::min(1.0, upper_continued_fraction(m, y));
}

double gamma_reg_upper_inv(double m, double p) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("gamma_reg_upper_inv: shape must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("gamma_reg_upper_inv: probability must lie in (0, 1]");
    if (p == 1.0) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    while (gamma_reg_upper(m, hi) > p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw NonConvergenceError("gamma_reg_upper_inv: could not bracket root");
    }

    // Newton on ln Q(m, m·x) - ln p, falling back to bisection whenever a step
    // leaves the bracket.
    const double log_p = std::log(p);
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
        const double q = gamma_reg_upper(m, x);
        if (q > p) lo = x; else hi = x;
        double next;
        if (q > 0.0) {
            const double y = m * x;
            const double log_density = std::log(m) + (m - 1.0) * std::log(y) - y - log_gamma(m);
            const double slope = -std::exp(log_density - std::log(q)); // d ln Q / dx
            next = x - (std::log(q) - log_p) / slope;
        } else {
            next = 0.5 * (lo + hi);
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 4.0 * kEps * x || hi - lo <= 4.0 * kEps * hi) return next;
        x = next;
    }
    throw NonConvergenceError("gamma_reg_upper_inv: iteration limit reached");
}

double hyp1f1(double a, double b, double z) {
    if (std::isnan(a) || std::isnan(b) || std::isnan(z)) throw DomainError("hyp1f1: NaN argument");
    if (is_nonpositive_integer(b)) throw DomainError("hyp1f1: b must not be a non-positive integer");
    if (z == 0.0 || a == 0.0) return 1.0;
    if (a == b) return std::exp(z);

    if (z > 0.0) {
        const auto [mantissa, log_scale] = kummer_series(a, b, z);
        return mantissa * std::exp(log_scale);
    }

    const double x = -z;
    if (is_nonpositive_integer(a)) {
        // Terminating polynomial; for z < 0 all terms share one sign.
        return kummer_series(a, b, z).mantissa;
    }
    const double a_kummer = b - a;
    if (!is_nonpositive_integer(a_kummer)) {
        const double asym = kummer_asymptotic_negative(a, b, x);
        if (!std::isnan(asym)) return asym;
    }
    // Kummer transform M(a, b, -x) = e^{-x} M(b - a, b, x).
    const auto [mantissa, log_scale] = kummer_series(a_kummer, b, x);
    return mantissa * std::exp(log_scale - x);
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

} // namespace mmwint::specfun
