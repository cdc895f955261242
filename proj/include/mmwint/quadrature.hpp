#pragma once

#include <functional>
#include <span>

namespace mmwint::specfun {

enum class TailTransform { exp_substitution, rational_substitution };

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_subdivisions = 2000;
    TailTransform infinite_tail_transform = TailTransform::rational_substitution;

    // Throws ValidationError when a tolerance or the subdivision budget is not positive.
    void validate() const;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0; // achieved error bound
    int evaluations = 0;
    int intervals = 0;
};

using Integrand = std::function<double(double)>;

// Globally adaptive Gauss-Kronrod (7/15) quadrature. The interval with the largest
// error estimate is bisected until abs_tol or rel_tol·|value| is met. Throws
// QuadratureError, carrying the best estimate, when the subdivision budget runs out.
QuadResult integrate_finite(const Integrand& f, double lo, double hi, const QuadratureSpec& spec = {});

// Same, with the integration range pre-split at `breakpoints` (sorted, first = lo, last = hi).
QuadResult integrate_finite(const Integrand& f, std::span<const double> breakpoints, const QuadratureSpec& spec = {});

// ∫_lo^∞ f(s) ds. The substitution s = lo + u² removes an s^{-1/2} endpoint
// singularity at lo; the u-axis is then mapped onto [0, 1) with the tail transform
// chosen in `spec`. `scale` is the characteristic size of (s - lo) and only affects
// efficiency. Throws DivergenceError if the mapped integrand fails a decay check
// near the mapped endpoint.
QuadResult integrate_semi_infinite(const Integrand& f, double lo, const QuadratureSpec& spec = {}, double scale = 1.0);

} // namespace mmwint::specfun
