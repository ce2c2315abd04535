#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "qgt/models.hpp"
#include "qgt/quadrature.hpp"
#include "qgt/states.hpp"
#include "support.hpp"

using namespace qgt;

TEST_CASE("registry") {
    CHECK(model_by_name("sym-toda").name == "sym-toda");
    CHECK(model_by_name("flat-osc").dim_params() == 2);
    CHECK_THROWS_AS(model_by_name("toda"), ValidationError);
    CHECK(sym_toda().param_index("beta") == 3);
    CHECK(exp_gauge().param_index("Y") == 3);
    CHECK(anh_toda().param_index("Y") == -1);
}

TEST_CASE("admissibility") {
    CHECK_THROWS_AS(ground_state(sym_toda(), ParamVector{1, 1, 0, 1}), DomainError);
    CHECK_THROWS_AS(ground_state(exp_gauge(), ParamVector{1, 1, 1, 1}), DomainError);  // k = Y^2
    CHECK_THROWS_AS(ground_state(anh_toda(), ParamVector{1, -0.6, 1, 1}), DomainError);
    CHECK_NOTHROW(ground_state(anh_toda(), ParamVector{1, -0.4, -2, 1}));
}

TEST_CASE("closed-form normalization constants") {
    CHECK(sym_toda().normalization(ParamVector{1, 0, 1, 1}) == doctest::Approx(std::sqrt(4 / std::numbers::pi)).epsilon(1e-10));
    CHECK(anh_toda().normalization(ParamVector{1, 0, 1, 1}) == doctest::Approx(std::sqrt(2 / std::numbers::pi)).epsilon(1e-10));
    // omega_+ = 1, omega_- = 3: N0 = 3^{1/4} / sqrt(arctan sqrt 3) = 3^{1/4} / sqrt(pi/3).
    const double expected = std::pow(3.0, 0.25) / std::sqrt(std::numbers::pi / 3.0);
    CHECK(exp_gauge().normalization(ParamVector{2, 1, 1, 1}) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(expected == doctest::Approx(1.286074).epsilon(1e-6));
}

TEST_CASE("level energies") {
    CHECK(energy(sym_toda(), 0, 0, ParamVector{1, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(energy(sym_toda(), 1, 0, ParamVector{4, 0, 1, 1}) == doctest::Approx(4.0));
    CHECK(ground_energy(exp_gauge(), ParamVector{2, 1, 1, 1}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(energy(sym_toda(), -1, 0, ParamVector{1, 0, 1, 1}), ValidationError);
}

TEST_CASE("Hamiltonian residuals of the exact ground states") {
    SUBCASE("one-dimensional oscillator") {
        const ModelDefinition osc = testing::oscillator_1d();
        const ParamVector lam{1.5};
        ParametricWaveFunction psi = testing::gaussian_1d();
        // exp(-omega x^2/2) solves H with potential omega^2 x^2 / 2 at E = omega / 2.
        std::vector<Point> xs;
        for (double x = -2.0; x <= 2.0; x += 0.25) xs.push_back({x, 0.0});
        CHECK(hamiltonian_residual(osc, psi, 0.75, lam, xs).value < 1e-7);
    }
    SUBCASE("symmetric Toda at (1,1,1,1)") {
        const ParamVector lam{1, 1, 1, 1};
        const SpectrumData s = sym_toda().spectrum(lam);
        const auto xs = interior_samples(sym_toda(), lam, 50, 5);
        const ResidualReport r = hamiltonian_residual(sym_toda(), sym_toda().ground, 0.5 * (s.omega_plus + s.omega_minus), lam, xs);
        CHECK(r.evaluated == 50);
        CHECK(r.value < 1e-5);
    }
    SUBCASE("gauge model at (2,1,1,1)") {
        const ParamVector lam{2, 1, 1, 1};
        const auto xs = interior_samples(exp_gauge(), lam, 50, 5);
        CHECK(hamiltonian_residual(exp_gauge(), exp_gauge().ground, 2.0, lam, xs).value < 1e-5);
    }
    SUBCASE("anharmonic Toda, both signs of lambda") {
        for (const ParamVector& lam : {ParamVector{1, 0.5, 1, 1}, ParamVector{0.7, 0.2, -1.3, 0.8}}) {
            const auto xs = interior_samples(anh_toda(), lam, 50, 5);
            CHECK(hamiltonian_residual(anh_toda(), anh_toda().ground, ground_energy(anh_toda(), lam), lam, xs).value <
                  1e-5);
        }
    }
}

TEST_CASE("excited product states solve the Schroedinger equation pointwise") {
    const ParamVector lam{1.2, 0.5, 0.9, 1.1};
    for (const ModelDefinition* m : testing::curved_models()) {
        const ParamVector p = m->name == "exp-gauge" ? ParamVector{2.2, 0.5, 0.9, 1.1} : lam;
        const auto xs = interior_samples(*m, p, 20, 9);
        for (auto [np, nm] : {std::pair{1, 0}, std::pair{0, 2}, std::pair{2, 1}}) {
            const ResidualReport r = hamiltonian_residual(*m, product_eigenfunction(*m, np, nm), energy(*m, np, nm, p), p, xs);
            INFO(m->name, " (", np, ",", nm, ")");
            // nodes make the relative residual large on isolated points, so
            // use the median
            std::vector<double> v = r.per_point;
            std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
            CHECK(v[v.size() / 2] < 1e-5);
        }
    }
}

TEST_CASE("Hermite functions") {
    std::vector<double> h(6);
    hermite_functions(2.0, 0.3, h);
    const double xi = std::sqrt(2.0) * 0.3;
    const double g = std::pow(2.0 / std::numbers::pi, 0.25) * std::exp(-0.5 * xi * xi);
    CHECK(h[0] == doctest::Approx(g));
    CHECK(h[1] == doctest::Approx(std::sqrt(2.0) * xi * g));
    CHECK(h[2] == doctest::Approx((2 * xi * xi - 1) / std::sqrt(2.0) * g));

    // Orthonormality on the line.
    std::vector<double> buf(5);
    const VectorIntegralResult r = integrate_vector(
        25,
        [&](const Point& x, std::span<cd> out) {
            hermite_functions(1.3, x[0], buf);
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b) out[5 * a + b] = buf[a] * buf[b];
        },
        [] {
            Region r;
            r.dim = 1;
            r.outer = {-testing::kInf, testing::kInf};
            return r;
        }(),
        {});
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) CHECK(std::abs(r.values[5 * a + b] - (a == b ? 1.0 : 0.0)) < 1e-10);
}

TEST_CASE("perturbative ground states") {
    const ModelDefinition& m = sym_toda();
    SUBCASE("coincide with the exact state at kappa = 0") {
        const ParamVector lam{1.4, 0.0, 0.8, 1.3};
        for (int order : {1, 2}) {
            const ParametricWaveFunction p = perturbative_ground_state(m, order, lam);
            for (const Point& x : interior_samples(m, lam, 10, 2)) {
                CHECK(std::abs(p.eval(x, lam) - m.ground.eval(x, lam)) < 1e-10);
            }
        }
        CHECK(perturbative_normalization(1, ParamVector{1, 0, 1, 1}) ==
              doctest::Approx(std::sqrt(4 / std::numbers::pi)).epsilon(1e-10));
    }
    SUBCASE("closed-form normalizations reproduce unit norm") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 3; ++trial) {
            const ParamVector lam = testing::random_point(m, rng);
            for (int order : {1, 2}) {
                const IntegralResult n = norm_squared(perturbative_ground_state(m, order, lam), m.metric, lam, {});
                INFO("order ", order, " at ", format_point(lam));
                CHECK(std::abs(n.value - 1.0) < 1e-8);
            }
        }
    }
    SUBCASE("invalid requests") {
        CHECK_THROWS_AS(perturbative_ground_state(m, 3, ParamVector{1, 1, 1, 1}), ValidationError);
        CHECK_THROWS_AS(perturbative_ground_state(anh_toda(), 1, ParamVector{1, 1, 1, 1}), ValidationError);
    }
}

TEST_CASE("interior samples are deterministic and inside the domain") {
    const ParamVector lam{1, 1, 1, 1};
    const auto a = interior_samples(exp_gauge(), ParamVector{2, 1, 1, 1}, 30, 42);
    const auto b = interior_samples(exp_gauge(), ParamVector{2, 1, 1, 1}, 30, 42);
    CHECK(a == b);
    for (const Point& x : a) CHECK(exp_gauge().metric.domain.contains(x, ParamVector{2, 1, 1, 1}));
    const auto c = interior_samples(anh_toda(), lam, 30, 1);
    bool negative = false;
    for (const Point& x : c) negative = negative || x[0] < 0.0;
    CHECK(negative);  // both branches of the even map are sampled
}
