#include "doctest.h"

#include <cmath>

#include "qgt/perturbation.hpp"
#include "qgt/tensor.hpp"
#include "support.hpp"

using namespace qgt;

namespace {

const QuadratureSettings kSettings{};

}  // namespace

TEST_CASE("M = 0 basis is the exact ground state") {
    const ModelDefinition& m = sym_toda();
    const ParamVector lam{1.2, 0.8, 1.0, 1.1};
    const BasisSet b = build_basis(m, 0, lam, kSettings);
    REQUIRE(b.size() == 1);
    const SpectrumData s = m.spectrum(lam);
    CHECK(b.states[0].energy == doctest::Approx(0.5 * (s.omega_plus + s.omega_minus)));
    CHECK(std::abs(b.gram(0, 0) - 1.0) < 1e-10);
    for (const Point& x : interior_samples(m, lam, 5, 3)) {
        CHECK(std::abs(std::abs(b.states[0].psi.eval(x, lam)) - std::abs(m.ground.eval(x, lam))) < 1e-8);
    }
}

TEST_CASE("flat basis: Hermite orthogonality makes the Gram matrix the identity") {
    const ModelDefinition& m = flat_oscillator();
    const ParamVector lam{1.0, 1.0};
    const BasisSet b = build_basis(m, 4, lam, kSettings);
    CHECK(b.size() == 15);
    CHECK((b.gram - Eigen::MatrixXcd::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t k = 1; k < b.size(); ++k) CHECK(b.states[k].energy >= b.states[k - 1].energy);
    CHECK(b.index_of(0, 0) == 0);
    CHECK(b.index_of(5, 0) == -1);
}

TEST_CASE("separable and direct Gram matrices agree") {
    const ParamVector lam{1.1, 0.9, 0.8, 1.2};
    const BasisSet a = build_basis(sym_toda(), 2, lam, kSettings, GramMethod::Separable);
    const BasisSet d = build_basis(sym_toda(), 2, lam, kSettings, GramMethod::Direct);
    CHECK(a.gram_method == GramMethod::Separable);
    CHECK((a.gram - d.gram).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("symmetric Toda M = 4: conditioning and orthonormalization") {
    const ModelDefinition& m = sym_toda();
    const ParamVector lam{1, 1, 1, 1};
    BasisSet b = build_basis(m, 4, lam, kSettings);
    CHECK(b.gram_condition > 1.0);
    CHECK(std::isfinite(b.gram_condition));
    // The restricted domain breaks Hermite orthogonality.
    CHECK((b.gram - Eigen::MatrixXcd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff() > 1e-3);
    orthonormalize(b, kSettings);
    CHECK(b.orthonormalized);
    CHECK(b.orthonormality_defect < 1e-8);
    CHECK(b.energies.size() == b.size());
    CHECK(b.energy_drift >= 0.0);
}

TEST_CASE("operator matrix elements of the flat oscillators") {
    const ModelDefinition& m = flat_oscillator();
    const ParamVector lam{1.0, 1.0};
    const BasisSet b = build_basis(m, 2, lam, kSettings);
    const int kappa = m.param_index("kappa");
    const double wm = m.spectrum(lam).omega_minus;

    SUBCASE("[sqrt g, H] vanishes") {
        for (int n : {0, 1, 3})
            for (int k : {0, 2, 4}) {
                CHECK(std::abs(operator_element(b, n, k, OperatorKind::CommSqrtgH, 0, kSettings).value) < 1e-9);
            }
    }
    SUBCASE("d_kappa H = U_-^2") {
        const int ground = b.index_of(0, 0), two = b.index_of(0, 2);
        const cd diag = operator_element(b, ground, ground, OperatorKind::SqrtgDH, kappa, kSettings).value;
        const cd off = operator_element(b, two, ground, OperatorKind::SqrtgDH, kappa, kSettings).value;
        CHECK(std::abs(diag - 1.0 / (2.0 * wm)) < 1e-7);
        CHECK(std::abs(std::abs(off) - std::sqrt(2.0) / (2.0 * wm)) < 1e-7);
        const cd other = operator_element(b, b.index_of(1, 0), ground, OperatorKind::SqrtgDH, kappa, kSettings).value;
        CHECK(std::abs(other) < 1e-8);
    }
}

TEST_CASE("symmetric Toda: the sigma commutator along k vanishes") {
    const BasisSet b = build_basis(sym_toda(), 1, ParamVector{1, 1, 1, 1}, kSettings);
    for (int n = 0; n < 3; ++n)
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(operator_element(b, n, k, OperatorKind::CommSqrtgSigmaH, 0, kSettings).value) < 1e-8);
        }
}

TEST_CASE("flat reduction of the spectral tensor") {
    const ModelDefinition& m = flat_oscillator();
    const ParamVector lam{1.0, 1.0};
    const BasisSet b = build_basis(m, 2, lam, kSettings);
    const ZanardiResult z = zanardi_qgt(b, 0, {}, kSettings);
    CHECK((z.entries - z.two_factor).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(z.commutator_magnitude < 1e-8);
    // Only n_- = 2 couples to the ground state, so M = 2 is already exact.
    const QGTMatrix d = qgt_matrix(m.ground, m.metric, lam, {}, kSettings);
    CHECK((z.entries - d.entries).cwiseAbs().maxCoeff() < 1e-6);
    for (int a = 0; a < 2; ++a) CHECK(std::abs(z.entries(a, a).imag()) < 1e-6);
    CHECK(z.partial_sums.size() == 3);
    CHECK(z.hermiticity_defect < 1e-6);
}

TEST_CASE("scalar overload and index validation") {
    const BasisSet b = build_basis(flat_oscillator(), 2, ParamVector{1.0, 1.0}, kSettings);
    const cd g = zanardi_qgt(b, 0, 1, 1, kSettings);
    CHECK(g.real() == doctest::Approx(0.0138889).epsilon(1e-5));
    CHECK(std::abs(g.imag()) < 1e-6);
    CHECK_THROWS(zanardi_qgt(b, 0, 0, 7, kSettings));
    CHECK_THROWS(zanardi_qgt(b, 99, 0, 0, kSettings));
}

TEST_CASE("Hamiltonian stencil reproduces level energies") {
    const ParamVector lam{1.2, 0.5, 0.9, 1.1};
    for (const ModelDefinition* m : testing::curved_models()) {
        const ParamVector p = m->name == "exp-gauge" ? ParamVector{2.2, 0.5, 0.9, 1.1} : lam;
        const HamiltonianStencil H(*m, 50.0);
        CHECK(H.uses_frame());
        const ParametricWaveFunction psi = product_eigenfunction(*m, 1, 1);
        const double E = energy(*m, 1, 1, p);
        double worst = 0.0;
        for (const Point& x : interior_samples(*m, p, 10, 4)) {
            std::array<cd, 1> out{};
            H.apply(p, x, [&](const Point& y, std::span<cd> o) { o[0] = psi.eval(y, p); }, 1, out);
            const cd v = psi.eval(x, p);
            worst = std::max(worst, std::abs(out[0] - E * v) / (1e-3 + std::abs(E * v)));
        }
        INFO(m->name);
        CHECK(worst < 1e-5);
    }
}
