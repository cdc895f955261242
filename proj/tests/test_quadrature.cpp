#include "mmwint/errors.hpp"
#include "mmwint/quadrature.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

using namespace mmwint::specfun;

namespace {

constexpr double kPi = std::numbers::pi;

double midpoint(const Integrand& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += f(lo + (i + 0.5) * h);
    return sum * h;
}

} // namespace

TEST_SUITE("quadrature") {

TEST_CASE("polynomials and trigonometric functions") {
    CHECK(integrate_finite([](double x) { return x; }, 0.0, 1.0).value == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(integrate_finite([](double x) { return std::sin(x); }, 0.0, kPi).value ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(integrate_finite([](double x) { return x * x * x; }, -1.0, 2.0).value ==
          doctest::Approx(3.75).epsilon(1e-14));
}

TEST_CASE("empty interval integrates to zero") {
    CHECK(integrate_finite([](double) { return 1.0; }, 2.0, 2.0).value == 0.0);
    CHECK_THROWS_AS(integrate_finite([](double) { return 1.0; }, 1.0, 0.0), mmwint::DomainError);
}

TEST_CASE("breakpoints") {
    const std::array<double, 3> pts{0.0, 1.0 / 3.0, 1.0};
    const auto r = integrate_finite([](double x) { return std::fabs(x - 1.0 / 3.0); }, pts);
    CHECK(r.value == doctest::Approx(5.0 / 18.0).epsilon(1e-14));
}

TEST_CASE("semi-infinite integrals under both tail maps") {
    for (auto tail : {TailTransform::rational_substitution, TailTransform::exp_substitution}) {
        QuadratureSpec spec;
        spec.infinite_tail_transform = tail;
        spec.rel_tol = 1e-10;
        CHECK(integrate_semi_infinite([](double s) { return std::exp(-s); }, 0.0, spec).value ==
              doctest::Approx(1.0).epsilon(1e-10));
        // s^{-1/2} endpoint singularity
        CHECK(integrate_semi_infinite([](double s) { return std::exp(-s) / std::sqrt(s); }, 0.0, spec).value ==
              doctest::Approx(std::sqrt(kPi)).epsilon(1e-9));
        CHECK(integrate_semi_infinite([](double s) { return std::exp(-s); }, 2.0, spec).value ==
              doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
    }
}

TEST_CASE("algebraic tails need the rational map") {
    QuadratureSpec spec;
    spec.rel_tol = 1e-10;
    CHECK(integrate_semi_infinite([](double s) { return 1.0 / (1.0 + s * s); }, 0.0, spec).value ==
          doctest::Approx(kPi / 2.0).epsilon(1e-10));
    CHECK(integrate_semi_infinite([](double s) { return std::pow(s, -2.5); }, 1.0, spec).value ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    // the exponential map leaves a log singularity at the endpoint and runs out of budget
    spec.infinite_tail_transform = TailTransform::exp_substitution;
    CHECK_THROWS_AS(integrate_semi_infinite([](double s) { return 1.0 / (1.0 + s * s); }, 0.0, spec),
                    mmwint::QuadratureError);
}

TEST_CASE("linearity") {
    const auto f = [](double x) { return std::exp(-x) * std::cos(3.0 * x); };
    const auto g = [](double x) { return 1.0 / (1.0 + x * x * x); };
    const double a = 2.5, b = -0.75;
    const double lhs = integrate_finite([&](double x) { return a * f(x) + b * g(x); }, 0.0, 4.0).value;
    const double rhs = a * integrate_finite(f, 0.0, 4.0).value + b * integrate_finite(g, 0.0, 4.0).value;
    CHECK(std::fabs(lhs - rhs) <= 1e-10 * (std::fabs(lhs) + 1.0));
}

TEST_CASE("budget exhaustion reports the best estimate") {
    QuadratureSpec spec;
    spec.abs_tol = 1e-15;
    spec.rel_tol = 1e-15;
    spec.max_subdivisions = 1;
    try {
        integrate_finite([](double x) { return std::log(x); }, 0.0, 1.0, spec);
        FAIL("expected QuadratureError");
    } catch (const mmwint::QuadratureError& e) {
        CHECK(e.best_estimate() == doctest::Approx(-1.0).epsilon(0.05));
        CHECK(e.error_bound() > 0.0);
    }
}

TEST_CASE("non-decaying tail is reported as divergent") {
    CHECK_THROWS_AS(integrate_semi_infinite([](double) { return 1.0; }, 0.0), mmwint::NumericError);
}

TEST_CASE("spec validation") {
    QuadratureSpec spec;
    spec.abs_tol = 0.0;
    CHECK_THROWS_AS(spec.validate(), mmwint::ValidationError);
    spec = {};
    spec.max_subdivisions = 0;
    CHECK_THROWS_AS(spec.validate(), mmwint::ValidationError);
    CHECK_NOTHROW(QuadratureSpec{}.validate());
}

TEST_CASE("near-receiver blockage panel at the default parameters") {
    // ∫₀^T ℓ e^{-ρ t ℓ²} (1 + s q ℓ^{-α}/(m φ²))^{-m} dℓ with T = L/(2t), s = 1.
    const double rho = 1e-3, len = 0.15, alpha = 2.5, m = 3.0, q = 1.0, s = 1.0;
    const double phi = 15.0 * kPi / 180.0;
    const double t = std::tan(phi / 2.0);
    const double threshold = len / (2.0 * t);
    const auto f = [&](double ell) {
        if (ell == 0.0) return 0.0;
        return ell * std::exp(-rho * t * ell * ell) * std::pow(1.0 + s * q * std::pow(ell, -alpha) / (m * phi * phi), -m);
    };
    const double got = integrate_finite(f, 0.0, threshold).value;
    const double oracle = midpoint(f, 0.0, threshold, 1'000'000);
    CHECK(std::fabs(got - oracle) <= 1e-7 * oracle);
    CHECK(got == doctest::Approx(3.88308875599201327282484188617e-6).epsilon(1e-8));
}

} // TEST_SUITE
