#include "doctest.h"

#include <cmath>
#include <numbers>

#include "qgt/models.hpp"
#include "qgt/states.hpp"
#include "support.hpp"

using namespace qgt;

namespace {

ParametricWaveFunction exp_minus_k() {
    ParametricWaveFunction psi;
    psi.dim_config = 1;
    psi.dim_params = 1;
    psi.domain = testing::full_line();
    psi.eval = [](const Point&, Params p) -> cd { return std::exp(-p[0]); };
    return psi;
}

}  // namespace

TEST_CASE("finite-difference derivative of exp(-k)") {
    const ParamVector k{1.0};
    const DerivativeResult d = param_derivative(exp_minus_k(), 0, k, {0.0, 0.0});
    CHECK_FALSE(d.analytic);
    CHECK(std::abs(d.value + std::exp(-1.0)) < 1e-9);
}

TEST_CASE("Richardson derivative converges at fourth order") {
    // Off-centre evaluation with a function whose fifth derivative is O(1).
    auto f = [](Params p) -> cd { return std::sin(3.0 * p[0]) * std::exp(0.5 * p[0]); };
    const double x = 0.4;
    const double exact = 3.0 * std::cos(3.0 * x) * std::exp(0.5 * x) + 0.5 * std::sin(3.0 * x) * std::exp(0.5 * x);
    const ParamVector lam{x};
    const double e1 = std::abs(fd_param_derivative(f, 0, lam, 1e-1).value.real() - exact);
    const double e2 = std::abs(fd_param_derivative(f, 0, lam, 1e-2).value.real() - exact);
    const double slope = std::log10(e1 / e2);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.3 / 4.0));

    // Between h = 1e-3 and 1e-4 a rapidly oscillating function keeps the
    // truncation error above roundoff.
    auto g = [](Params p) -> cd { return std::sin(60.0 * p[0]); };
    const double gx = 0.4, gexact = 60.0 * std::cos(60.0 * gx);
    const ParamVector glam{gx};
    const double g1 = std::abs(fd_param_derivative(g, 0, glam, 1e-3).value.real() - gexact);
    const double g2 = std::abs(fd_param_derivative(g, 0, glam, 1e-4).value.real() - gexact);
    CHECK(std::log10(g1 / g2) == doctest::Approx(4.0).epsilon(0.3 / 4.0));
}

TEST_CASE("one-sided stencil near an inadmissible boundary") {
    auto f = [](Params p) -> cd { return std::log(p[0]); };
    auto admissible = [](Params p) { return p[0] > 0.0; };
    const ParamVector lam{1e-5};
    const DerivativeResult d = fd_param_derivative(f, 0, lam, 2e-5, admissible);
    CHECK(d.one_sided);
    CHECK(std::isfinite(d.value.real()));
}

TEST_CASE("analytic gradient of the symmetric Toda ground state") {
    const ModelDefinition& m = sym_toda();
    const ParamVector lam{1.0, 1.0, 1.0, 1.0};
    REQUIRE(m.ground.has_analytic_gradient());
    for (const Point& x : interior_samples(m, lam, 5, 11)) {
        std::array<cd, 4> grad{};
        const cd v = m.ground.value_and_gradient(x, lam, grad);
        CHECK(std::abs(v - m.ground.eval(x, lam)) < 1e-14);
        auto f = [&](Params p) { return m.ground.eval(x, p); };
        for (int i = 0; i < 4; ++i) {
            const DerivativeResult fd = fd_param_derivative(f, i, lam, default_param_step(lam[i]));
            CHECK(std::abs(fd.value - grad[i]) < 1e-7 * (1.0 + std::abs(grad[i])));
        }
    }
}

TEST_CASE("normalization constants") {
    QuadratureSettings s;
    SUBCASE("normalized input") {
        const ParamVector lam{1.3, 0.6, 0.9, 1.2};
        CHECK(normalize(sym_toda().ground, sym_toda().metric, lam, s).constant == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("symmetric Toda exponent, k=1, kappa=0") {
        const ParamVector lam{1.0, 0.0, 1.0, 1.0};
        const NormalizedState n = normalize(sym_toda().unnormalized_ground, sym_toda().metric, lam, s);
        CHECK(n.constant == doctest::Approx(std::sqrt(4.0 / std::numbers::pi)).epsilon(1e-9));
    }
    SUBCASE("gauge model exponent, k=2, kappa=0, Y=1") {
        const ParamVector lam{2.0, 0.0, 1.0, 1.0};
        const NormalizedState n = normalize(exp_gauge().unnormalized_ground, exp_gauge().metric, lam, s);
        CHECK(n.constant == doctest::Approx(std::sqrt(4.0 / std::numbers::pi)).epsilon(1e-9));
    }
}

TEST_CASE("curved norms of the ground exponents") {
    QuadratureSettings s;
    const ParamVector lam{1.0, 0.0, 1.0, 1.0};
    CHECK(std::abs(norm_squared(sym_toda().unnormalized_ground, sym_toda().metric, lam, s).value -
                   std::numbers::pi / 4) < 1e-9);
    CHECK(std::abs(norm_squared(anh_toda().unnormalized_ground, anh_toda().metric, lam, s).value -
                   std::numbers::pi / 2) < 1e-9);
    CHECK(std::abs(norm_squared(sym_toda().ground, sym_toda().metric, ParamVector{2.0, 0.5, 0.7, 1.4}, s).value -
                   1.0) < 1e-8);
}

TEST_CASE("normalized family differentiates its normalization") {
    // psi = exp(-omega x^2 / 2) without prefactor; N(omega) psi has
    // d_omega <psi|psi> = 0, i.e. Re <psi|d psi> = 0.
    ParametricWaveFunction raw = testing::gaussian_1d();
    raw.eval = [](const Point& x, Params p) -> cd { return std::exp(-0.5 * p[0] * x[0] * x[0]); };
    const MetricField flat = identity_metric(1, 1, testing::full_line());
    const ParamVector lam{1.7};
    QuadratureSettings s;
    const NormalizedState n = normalize(raw, flat, lam, s);
    CHECK(n.constant == doctest::Approx(std::pow(1.7 / std::numbers::pi, 0.25)).epsilon(1e-9));
    const VectorIntegralResult r = integrate_flat(
        1,
        [&](const Point& x, std::span<cd> out) {
            out[0] = std::conj(n.psi.eval(x, lam)) * param_derivative(n.psi, 0, lam, x).value;
        },
        flat.domain, lam, s);
    CHECK(std::abs(r.values[0].real()) < 1e-7);
}
