#include "doctest.h"

#include <cmath>
#include <numbers>

#include "qgt/quadrature.hpp"
#include "support.hpp"

using namespace qgt;
using testing::kInf;

namespace {

Region box(Interval outer, Interval inner) {
    Region r;
    r.outer = outer;
    r.inner = inner;
    return r;
}

}  // namespace

TEST_CASE("Gaussian over the quarter plane") {
    const IntegralResult r = integrate_2d([](const Point& p) -> cd { return std::exp(-(p[0] * p[0] + p[1] * p[1])); },
                                          box({0, kInf}, {0, kInf}), {});
    CHECK(std::abs(r.value - std::numbers::pi / 4) < 1e-9);
    CHECK(r.error_estimate < 1e-8);
}

TEST_CASE("Gaussian over the wedge |u-| < u+") {
    Region wedge;
    wedge.outer = {0, kInf};
    wedge.inner_bounds = [](double up) { return Interval{-up, up}; };
    const IntegralResult r =
        integrate_2d([](const Point& p) -> cd { return std::exp(-(p[0] * p[0] + p[1] * p[1])); }, wedge, {});
    CHECK(std::abs(r.value - std::numbers::pi / 4) < 1e-9);
}

TEST_CASE("constant over the unit square") {
    const IntegralResult r = integrate_2d([](const Point&) -> cd { return 1.0; }, box({0, 1}, {0, 1}), {});
    CHECK(std::abs(r.value - 1.0) < 1e-14);
}

TEST_CASE("one-dimensional integrals on finite and infinite ranges") {
    QuadratureSettings s;
    CHECK(std::abs(integrate_1d([](double x) -> cd { return std::exp(-x * x); }, {-kInf, kInf}, s).value -
                   std::sqrt(std::numbers::pi)) < 1e-10);
    // Logarithmic endpoint singularity.
    CHECK(std::abs(integrate_1d([](double x) -> cd { return std::log(x); }, {0, 1}, s).value + 1.0) < 1e-9);
    CHECK(std::abs(integrate_1d([](double x) -> cd { return std::exp(-x); }, {2, kInf}, s).value - std::exp(-2.0)) <
          1e-11);
    CHECK(std::abs(integrate_1d([](double x) -> cd { return std::exp(x); }, {-kInf, 0}, s).value - 1.0) < 1e-11);
}

TEST_CASE("complex integrands keep their phase") {
    const IntegralResult r = integrate_1d(
        [](double x) -> cd { return std::exp(cd(-x * x, 2.0 * x)); }, {-kInf, kInf}, {});
    // \int e^{-x^2 + 2ix} = sqrt(pi) e^{-1}
    CHECK(std::abs(r.value - std::sqrt(std::numbers::pi) * std::exp(-1.0)) < 1e-10);
}

TEST_CASE("vector integrals share the evaluation points") {
    const VectorIntegralResult r = integrate_vector(
        3,
        [](const Point& p, std::span<cd> out) {
            const double g = std::exp(-(p[0] * p[0] + p[1] * p[1]));
            out[0] = g;
            out[1] = p[0] * p[0] * g;
            out[2] = cd(0.0, 1.0) * g;
        },
        box({-kInf, kInf}, {-kInf, kInf}), {});
    CHECK(std::abs(r.values[0] - std::numbers::pi) < 1e-9);
    CHECK(std::abs(r.values[1] - std::numbers::pi / 2) < 1e-9);
    CHECK(std::abs(r.values[2] - cd(0.0, std::numbers::pi)) < 1e-9);
    CHECK(r.magnitudes[1] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
}

TEST_CASE("settings validation") {
    QuadratureSettings s;
    s.rel_tol = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.max_subdivisions = 0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK_NOTHROW(QuadratureSettings{}.validate());
}

TEST_CASE("an unattainable tolerance reports its best estimate") {
    QuadratureSettings s;
    s.rel_tol = 1e-15;
    s.abs_tol = 1e-300;
    s.max_subdivisions = 1;
    try {
        integrate_1d([](double x) -> cd { return std::sin(40.0 * x) / std::sqrt(x); }, {0, 3}, s);
        // Reaching the tolerance anyway is acceptable.
    } catch (const ConvergenceError& e) {
        REQUIRE(e.best_estimate.size() == 1);
        CHECK(std::isfinite(e.best_estimate[0].real()));
    }
}

TEST_CASE("curved integration in transformed coordinates agrees with original coordinates") {
    for (const ModelDefinition* m : testing::curved_models()) {
        // the gauge model needs k > Y^2
        const ParamVector lam = m->name == "exp-gauge" ? ParamVector{2.2, 0.7, 0.9, 1.1} : ParamVector{1.2, 0.7, 0.9, 1.1};
        auto f = [&](const Point& x, std::span<cd> out) { out[0] = std::norm(m->ground.eval(x, lam)); };
        const VectorIntegralResult a = integrate_curved(1, f, m->metric, lam, {});
        const VectorIntegralResult b = integrate_curved(1, f, m->metric, lam, {}, Coordinates::Original);
        INFO(m->name);
        CHECK(std::abs(a.values[0] - 1.0) < 1e-8);
        CHECK(std::abs(b.values[0] - 1.0) < 1e-6);
    }
}
