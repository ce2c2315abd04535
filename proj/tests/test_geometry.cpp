#include "doctest.h"

#include <random>

#include "qgt/geometry.hpp"
#include "qgt/models.hpp"
#include "support.hpp"

using namespace qgt;

TEST_CASE("metric determinants at reference points") {
    const ParamVector unit{1, 1, 1, 1};
    CHECK(metric_det(sym_toda().metric, {0.0, 0.0}, unit) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(metric_det(anh_toda().metric, {1.0, 0.0}, unit) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(metric_det(exp_gauge().metric, {2.0, 0.0}, unit) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("deformation vector closed forms") {
    const ParamVector unit{1, 1, 1, 1};
    const int lambda = sym_toda().param_index("lambda");
    // sigma_lambda = -2/lambda + 2x for the symmetric Toda metric.
    for (double y : {-1.0, 0.0, 2.5}) {
        CHECK(deformation_vector(sym_toda().metric, lambda, {0.5, y}, unit) == doctest::Approx(-1.0).epsilon(1e-10));
    }
    for (double x : {-0.7, 0.0, 1.3}) {
        CHECK(deformation_vector(sym_toda().metric, 0, {x, 0.4}, unit) == doctest::Approx(0.0));
    }
    CHECK(deformation_vector(exp_gauge().metric, exp_gauge().param_index("lambda"), {1.5, 0.0}, unit) ==
          doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("metric inverse is the matrix inverse") {
    const ParamVector lam{1.3, 0.4, 0.8, 1.7};
    for (const ModelDefinition* m : testing::curved_models()) {
        const Point x{0.6, -0.3};
        const MetricMatrix g = metric_eval(m->metric, x, lam);
        const MetricMatrix gi = metric_inverse(m->metric, x, lam);
        CHECK((g * gi - MetricMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-13);
        CHECK(sqrt_det(m->metric, x, lam) == doctest::Approx(std::sqrt(g.determinant())).epsilon(1e-13));
    }
}

TEST_CASE("identity metric has vanishing deformation vector") {
    const MetricField flat = identity_metric(2, 2, testing::full_plane());
    const ParamVector lam{1.0, 2.0};
    CHECK(metric_det(flat, {0.3, 0.1}, lam) == 1.0);
    CHECK(deformation_vector(flat, 1, {0.3, 0.1}, lam) == 0.0);
    CHECK(deformation_vector_from_log_det(flat, 0, {0.3, 0.1}, lam) == doctest::Approx(0.0));
}

TEST_CASE("property: closed-form sigma matches -d ln det g at random points") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coord(-1.5, 1.5), positive(0.1, 3.0);
    for (const ModelDefinition* m : testing::curved_models()) {
        for (int trial = 0; trial < 40; ++trial) {
            const ParamVector lam = testing::random_point(*m, rng);
            const Point x{m->name == "exp-gauge" ? positive(rng) : coord(rng), coord(rng)};
            for (std::size_t i = 0; i < m->dim_params(); ++i) {
                const double a = deformation_vector(m->metric, static_cast<int>(i), x, lam);
                const double b = deformation_vector_from_log_det(m->metric, static_cast<int>(i), x, lam);
                INFO(m->name, " i=", i, " lambda=", format_point(lam));
                CHECK(std::abs(a - b) <= 1e-6 * (1.0 + std::abs(b)));
            }
        }
    }
}

TEST_CASE("domains report membership") {
    const ParamVector lam{1, 1, 1, 1};
    CHECK(exp_gauge().metric.domain.contains({0.5, -3.0}, lam));
    CHECK_FALSE(exp_gauge().metric.domain.contains({-0.5, 0.0}, lam));
    CHECK(sym_toda().metric.domain.contains({-2.0, 5.0}, lam));
}
