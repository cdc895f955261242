#include "mmwint/quadrature.hpp"

#include "mmwint/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace mmwint::specfun {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();

// Kronrod abscissae; odd indices are the embedded 7-point Gauss nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double lo;
    double hi;
    double value;
    double error;
};

struct ByError {
    bool operator()(const Panel& a, const Panel& b) const { return a.error < b.error; }
};

double checked(const Integrand& f, double x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw NumericError("integrand returned a non-finite value");
    return v;
}

Panel gauss_kronrod(const Integrand& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double f_center = checked(f, center);

    double res_k = f_center * kWgk[7];
    double res_g = f_center * kWg[3];
    double res_abs = std::abs(res_k);
    std::array<double, 7> f1{};
    std::array<double, 7> f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        f1[j] = checked(f, center - dx);
        f2[j] = checked(f, center + dx);
        const double pair = f1[j] + f2[j];
        res_k += kWgk[j] * pair;
        res_abs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) res_g += kWg[j / 2] * pair;
    }
    const double mean = 0.5 * res_k;
    double res_asc = kWgk[7] * std::abs(f_center - mean);
    for (int j = 0; j < 7; ++j) res_asc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    const double scale = std::abs(half);
    res_k *= half;
    res_abs *= scale;
    res_asc *= scale;
    double err = std::abs(res_k - res_g * half);
    if (res_asc != 0.0 && err != 0.0) err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
    if (res_abs > kTiny / (50.0 * kEps)) err = std::max(50.0 * kEps * res_abs, err);
    return {lo, hi, res_k, err};
}

QuadResult adapt(const Integrand& f, std::span<const double> points, const QuadratureSpec& spec) {
    spec.validate();
    std::priority_queue<Panel, std::vector<Panel>, ByError> heap;
    int evaluations = 0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(points[i] <= points[i + 1])) throw DomainError("integrate_finite: breakpoints must be non-decreasing");
        if (points[i] == points[i + 1]) continue;
        heap.push(gauss_kronrod(f, points[i], points[i + 1]));
        evaluations += 15;
    }
    if (heap.empty()) return {0.0, 0.0, 0, 0};

    // Panels too narrow to bisect further are frozen here.
    std::vector<Panel> frozen;
    auto totals = [&] {
        double value = 0.0;
        double error = 0.0;
        auto copy = heap;
        while (!copy.empty()) {
            value += copy.top().value;
            error += copy.top().error;
            copy.pop();
        }
        for (const auto& p : frozen) {
            value += p.value;
            error += p.error;
        }
        return std::pair{value, error};
    };

    auto [value, error] = totals();
    while (true) {
        const double target = std::max(spec.abs_tol, spec.rel_tol * std::abs(value));
        if (error <= target) break;
        const int n_panels = static_cast<int>(heap.size() + frozen.size());
        if (heap.empty() || n_panels >= spec.max_subdivisions) {
            throw QuadratureError("quadrature tolerance not met within subdivision budget", value, error);
        }
        const Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi) || (worst.hi - worst.lo) < 100.0 * kEps * std::abs(mid)) {
            frozen.push_back(worst);
            continue;
        }
        const Panel left = gauss_kronrod(f, worst.lo, mid);
        const Panel right = gauss_kronrod(f, mid, worst.hi);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed drift from the incremental updates.
    auto [v, e] = totals();
    return {v, e, evaluations, static_cast<int>(heap.size() + frozen.size())};
}

} // namespace

void QuadratureSpec::validate() const {
    if (!(abs_tol > 0.0)) throw ValidationError("abs_tol", "must be positive");
    if (!(rel_tol > 0.0)) throw ValidationError("rel_tol", "must be positive");
    if (max_subdivisions < 1) throw ValidationError("max_subdivisions", "must be at least 1");
}

QuadResult integrate_finite(const Integrand& f, double lo, double hi, const QuadratureSpec& spec) {
    if (!(lo <= hi)) throw DomainError("integrate_finite: requires lo <= hi");
    const std::array<double, 2> pts{lo, hi};
    return adapt(f, pts, spec);
}

QuadResult integrate_finite(const Integrand& f, std::span<const double> breakpoints, const QuadratureSpec& spec) {
    if (breakpoints.size() < 2) throw DomainError("integrate_finite: need at least two breakpoints");
    return adapt(f, breakpoints, spec);
}

QuadResult integrate_semi_infinite(const Integrand& f, double lo, const QuadratureSpec& spec, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("integrate_semi_infinite: scale must be positive");
    const double u_scale = std::sqrt(scale);
    const bool rational = spec.infinite_tail_transform == TailTransform::rational_substitution;

    // s = lo + u², u = u_scale·φ(t), t ∈ [0, 1).
    const Integrand mapped = [&](double t) {
        const double one_minus = 1.0 - t;
        double u;
        double du_dt;
        if (rational) {
            u = u_scale * t / one_minus;
            du_dt = u_scale / (one_minus * one_minus);
        } else {
            u = -u_scale * std::log1p(-t);
            du_dt = u_scale / one_minus;
        }
        if (!std::isfinite(u) || !std::isfinite(du_dt)) return 0.0;
        const double v = f(lo + u * u);
        if (v == 0.0) return 0.0;
        return 2.0 * u * du_dt * v;
    };

    // Decay check: (1 - t)·|g(t)| must fall as t → 1, otherwise the mass near the
    // mapped endpoint does not vanish and the original integral likely diverges.
    const double w_near = 1e-4 * std::abs(mapped(1.0 - 1e-4));
    const double w_far = 1e-8 * std::abs(mapped(1.0 - 1e-8));
    if (!std::isfinite(w_near) || !std::isfinite(w_far) || (w_far >= 0.5 * w_near && w_far > spec.abs_tol)) {
        throw DivergenceError("integrate_semi_infinite: integrand does not decay; integral may diverge");
    }
    return integrate_finite(mapped, 0.0, 1.0, spec);
}

} // namespace mmwint::specfun
