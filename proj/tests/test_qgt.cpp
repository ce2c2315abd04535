#include "doctest.h"

#include <cmath>
#include <random>

#include "qgt/dressed.hpp"
#include "qgt/tensor.hpp"
#include "support.hpp"

using namespace qgt;

namespace {

const QuadratureSettings kSettings{};

}  // namespace

TEST_CASE("flat Gaussian tensor equals 1/(8 omega^2)") {
    const ParametricWaveFunction psi = testing::gaussian_1d();
    const MetricField flat = identity_metric(1, 1, testing::full_line());
    const ParamVector lam{2.0};
    const IntegralResult g = qgt_component(psi, flat, 0, 0, lam, kSettings);
    CHECK(std::abs(g.value - 0.03125) < 1e-6);
    const IntegralResult pv = provost_vallee_component(psi, flat, 0, 0, lam, kSettings);
    CHECK(std::abs(pv.value - g.value) < 1e-9);
}

TEST_CASE("flat two-parameter block is real symmetric and matches the closed form") {
    const ModelDefinition& m = flat_oscillator();
    const ParamVector lam{1.0, 1.0};
    const QGTMatrix g = qgt_matrix(m.ground, m.metric, lam, {}, kSettings);
    CHECK(g.entries.imag().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(g.entries(0, 1) - g.entries(1, 0)) < 1e-12);
    CHECK(g.entries(0, 0).real() == doctest::Approx(0.0347222).epsilon(1e-6));
    CHECK(g.entries(0, 1).real() == doctest::Approx(0.00694444).epsilon(1e-6));
    CHECK(g.entries(1, 1).real() == doctest::Approx(0.0138889).epsilon(1e-6));
}

TEST_CASE("symmetric Toda tensor") {
    const ModelDefinition& m = sym_toda();
    const ParamVector lam{1, 1, 1, 1};
    const QGTMatrix g = qgt_matrix(m.ground, m.metric, lam, {}, kSettings);

    SUBCASE("real, Hermitian") {
        CHECK(g.entries.imag().cwiseAbs().maxCoeff() < 1e-7);
        CHECK(g.hermiticity_defect < 1e-5);
    }
    SUBCASE("k-k entry agrees with the dressed-state oracle") {
        const std::vector<int> k{0};
        const DressedTensor d = dressed_state_tensor(m.ground, m.metric, lam, k, kSettings);
        CHECK(std::abs(d.entries(0, 0) - g.entries(0, 0)) < 2e-6);
        CHECK(g.entries(0, 0).real() == doctest::Approx(0.04637767719).epsilon(1e-8));
    }
    SUBCASE("single components agree with the block") {
        const IntegralResult c = qgt_component(m.ground, m.metric, 1, 2, lam, kSettings);
        CHECK(std::abs(c.value - g.entries(1, 2)) < 1e-9);
    }
    SUBCASE("eight-term expansion agrees with the projector form") {
        for (auto [i, j] : {std::pair{0, 0}, std::pair{1, 2}, std::pair{2, 3}}) {
            const QGTTerms t = qgt_terms(m.ground, m.metric, i, j, lam, kSettings);
            CHECK(std::abs(t.sum() - g.entries(i, j)) < 1e-7);
        }
    }
    SUBCASE("(k, lambda) determinant is positive") {
        const std::vector<int> idx{0, 2};
        const TensorSpectrum s = spectrum(qgt_matrix(m.ground, m.metric, lam, idx, kSettings));
        CHECK(s.det > 0.0);
    }
}

TEST_CASE("Provost-Vallee block determinant is below the full one") {
    const ModelDefinition& m = sym_toda();
    const std::vector<int> idx{0, 2};
    for (const ParamVector& lam : {ParamVector{1, 1, 1, 1}, ParamVector{3, 1, 0.4, 1}, ParamVector{0.6, 1, 2.0, 1}}) {
        const auto [full, pv] = qgt_full_and_pv(m.ground, m.metric, lam, idx, kSettings);
        INFO(format_point(lam));
        CHECK(spectrum(pv).det < spectrum(full).det);
        for (int a = 0; a < 2; ++a) CHECK(pv.entries(a, a).real() >= -pv.error_estimates(a, a));
    }
}

TEST_CASE("spectrum of the identity") {
    const TensorSpectrum s = spectrum(Eigen::MatrixXd::Identity(2, 2));
    CHECK(s.det == doctest::Approx(1.0));
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(s.eigenvalues[1] == doctest::Approx(1.0));
}

TEST_CASE("spectrum rejects a non-Hermitian block") {
    QGTMatrix g;
    g.entries = Eigen::MatrixXcd::Identity(2, 2);
    g.entries(0, 1) = 0.5;
    g.error_estimates = Eigen::MatrixXd::Constant(2, 2, 1e-12);
    CHECK_THROWS_AS(spectrum(g), InvariantViolation);
}

TEST_CASE("Berry connection") {
    SUBCASE("vanishes for a real state") {
        const ParamVector lam{1.3, 0.7, 0.9, 1.2};
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(berry_connection(sym_toda().ground, sym_toda().metric, i, lam, kSettings).value) < 1e-7);
        }
    }
    SUBCASE("gauge model at (100,1,1,1) is effectively real and below the naive value") {
        const ModelDefinition& m = exp_gauge();
        const ParamVector lam{100, 1, 1, 1};
        const ConnectionResult c = berry_connection(m.ground, m.metric, m.param_index("lambda"), lam, kSettings);
        CHECK(c.imaginary_residual < 1e-6);
        CHECK(std::abs(c.value) <= c.naive);
    }
    SUBCASE("normalization identity") {
        const ModelDefinition& m = exp_gauge();
        const ParamVector lam{2.5, 0.5, 1.2, 0.8};
        for (int i = 0; i < 4; ++i) {
            const ConnectionBrackets b = connection_brackets(m.ground, m.metric, i, lam, kSettings);
            CHECK(std::abs(normalization_identity(b)) < 1e-6);
            CHECK(std::abs(b.sigma.imag()) < 1e-9);
        }
    }
}

TEST_CASE("Berry curvature") {
    SUBCASE("zero for the symmetric Toda state") {
        const ParamVector lam{1, 1, 1, 1};
        const CurvatureResult f = berry_curvature(sym_toda().ground, sym_toda().metric, 0, 2, lam, kSettings);
        CHECK(std::abs(f.value) < 2e-5);
    }
    SUBCASE("nonzero k-lambda curvature of the gauge model near k = 100") {
        const ModelDefinition& m = exp_gauge();
        const ParamVector lam{100, 1, 1, 1};
        const CurvatureResult f = berry_curvature(m.ground, m.metric, 0, 2, lam, kSettings);
        CHECK(std::abs(f.value) > 10.0 * f.error);
        const CurvatureResult g = berry_curvature(m.ground, m.metric, 2, 0, lam, kSettings);
        CHECK(f.value + g.value == 0.0);
    }
}

TEST_CASE("tensor entries are invariant under psi -> c(lambda) psi") {
    const ModelDefinition& m = anh_toda();
    ParametricWaveFunction scaled = m.ground;
    scaled.value_and_gradient = nullptr;
    scaled.eval = [&m](const Point& x, Params p) {
        const cd c = (1.0 + p[0] * p[0]) * std::exp(cd(0.0, 0.7 * p[1] - 0.3 * p[2] * p[3]));
        return c * m.ground.eval(x, p);
    };
    const ParamVector lam{1.1, 0.6, -0.9, 1.2};
    const QGTMatrix a = qgt_matrix(m.ground, m.metric, lam, {}, kSettings);
    const QGTMatrix b = qgt_matrix(scaled, m.metric, lam, {}, kSettings);
    CHECK((a.entries - b.entries).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("property: the full tensor is positive semi-definite at random points") {
    std::mt19937_64 rng(99);
    for (const ModelDefinition* m : testing::curved_models()) {
        for (int trial = 0; trial < 2; ++trial) {
            const ParamVector lam = testing::random_point(*m, rng);
            const QGTMatrix g = qgt_matrix(m->ground, m->metric, lam, {}, kSettings);
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.entries);
            INFO(m->name, " at ", format_point(lam));
            CHECK(es.eigenvalues().minCoeff() >= -g.error_estimates.norm());
            CHECK(g.hermiticity_defect < 1e-5);
        }
    }
}
