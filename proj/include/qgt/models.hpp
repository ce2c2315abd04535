#pragma once

// Built-in systems on parameter-dependent configuration spaces.
//
//   sym-toda   (k, kappa, lambda, beta)  two Toda coordinates, g = diag(l^2 e^{-2lx}, b^2 e^{-2by})
//   anh-toda   (k, kappa, lambda, beta)  anharmonic + Toda,   g = diag(4 l^2 x^2, b^2 e^{-2by})
//   exp-gauge  (k, kappa, lambda, Y)     gauge-coupled,       g = diag(x^2, l^2 e^{-2ly})
//   flat-osc   (k, kappa)                coupled oscillators in flat space (benchmark)
//
// Each curved model becomes a pair of coupled harmonic oscillators in flat
// coordinates (U1, U2) -- or (q1, q2) -- where sqrt(g) dx dy = dU1 dU2, and
// decouples in the rotated pair U_pm = (U1 pm U2)/sqrt(2) with frequencies
// omega_pm.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qgt/geometry.hpp"
#include "qgt/wavefunction.hpp"

namespace qgt {

struct SpectrumData {
    double omega_plus;
    double omega_minus;
    double omega1;
    double omega2;
    double gamma;
    double N0;
};

// The Hamiltonian written in the coordinates of the model's transform, where
// the metric is the identity: H = (p + F_U)^2 / 2 + V1(U).
struct FlatFrame {
    std::function<double(const Point& u, Params)> potential;
    // Covariant gauge field in frame coordinates and its flat divergence; empty when absent.
    std::function<std::array<double, 2>(const Point& u, Params)> gauge;
    std::function<double(const Point& u, Params)> gauge_div;
};

struct ModelDefinition {
    std::string name;
    std::vector<std::string> param_names;
    // Empty when admissible, else a human-readable reason.
    std::function<std::string(Params)> admissibility;
    MetricField metric;
    // Covariant gauge field F_mu entering H = (p + F)^2 / 2 + V1; empty when absent.
    std::function<std::array<double, 2>(const Point&, Params)> gauge_covector;
    std::function<double(const Point&, Params)> potential;
    std::function<SpectrumData(Params)> spectrum;
    // Energy of the product level (n_plus, n_minus).
    std::function<double(int, int, Params)> level_energy;
    // Normalized exact ground state and its un-normalized exponent.
    ParametricWaveFunction ground;
    ParametricWaveFunction unnormalized_ground;
    // Closed-form normalization constant of `ground`.
    std::function<double(Params)> normalization;
    // Oscillator coordinates (U_+, U_-) of an original-coordinate point.
    std::function<Point(const Point&, Params)> oscillator_coordinates;
    // Gauge phase multiplying every eigenfunction (1 when absent).
    std::function<cd(const Point&, Params)> eigen_phase;
    // Present when the transform flattens the metric.
    std::optional<FlatFrame> flat_frame;
    // Named coordinate maps for documentation and the CLI.
    std::vector<std::string> transforms;
    bool has_perturbative_states = false;

    bool admissible(Params lam) const { return admissibility(lam).empty(); }
    void require_admissible(Params lam) const;
    int param_index(std::string_view param) const;  // -1 when unknown
    std::size_t dim_params() const { return param_names.size(); }
};

const ModelDefinition& model_by_name(std::string_view name);
std::vector<std::string> model_names();

const ModelDefinition& sym_toda();
const ModelDefinition& anh_toda();
const ModelDefinition& exp_gauge();
const ModelDefinition& flat_oscillator();

// Normalized exact ground state; throws DomainError outside the admissible region.
ParametricWaveFunction ground_state(const ModelDefinition& model, Params lam);
double energy(const ModelDefinition& model, int n_plus, int n_minus, Params lam);
double ground_energy(const ModelDefinition& model, Params lam);

// First- or second-order expansion of the coupling factor exp(-gamma U1 U2)
// of the symmetric Toda ground state, with its closed-form normalization.
ParametricWaveFunction perturbative_ground_state(const ModelDefinition& model, int order, Params lam);
double perturbative_normalization(int order, Params lam);

// Normalized Hermite functions chi_n(omega; u) for n = 0..out.size()-1.
void hermite_functions(double omega, double u, std::span<double> out);

// Raw product eigenfunction e^{i phase} chi_{n+}(U_+) chi_{n-}(U_-); exact
// pointwise solutions, but not normalized on restricted domains.
ParametricWaveFunction product_eigenfunction(const ModelDefinition& model, int n_plus, int n_minus);

// Interior points sampled where the ground state carries its weight.
std::vector<Point> interior_samples(const ModelDefinition& model, Params lam, int count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hamiltonian (Laplace-Beltrami kinetic term, symmetric gauge ordering, V1)

struct LocalJet {
    cd value;
    std::array<cd, 2> grad{};
    std::array<std::array<cd, 2>, 2> hess{};
};

struct HamiltonianCoefficients {
    int dim = 2;
    MetricMatrix ginv;
    std::array<double, 2> drift{};     // (1/sqrt g) d_nu (sqrt g g^{nu mu})
    bool gauge = false;
    std::array<double, 2> gauge_up{};  // g^{mu nu} F_nu
    double gauge_div = 0.0;            // (1/sqrt g) d_mu (sqrt g g^{mu nu} F_nu)
    double gauge_sq = 0.0;             // g^{mu nu} F_mu F_nu
    double potential = 0.0;
    bool mixed = false;                // off-diagonal inverse metric present
};

inline constexpr double kStencilStepRel = 1e-4;
inline double stencil_step(double coordinate) { return kStencilStepRel * (1.0 + std::abs(coordinate)); }

HamiltonianCoefficients hamiltonian_coefficients(const ModelDefinition& model, const Point& x, Params lam);
cd apply_hamiltonian(const HamiltonianCoefficients& c, const LocalJet& jet);

// Value, gradient and Hessian by 5-point central stencils with step
// step_scale * stencil_step.  The vector version computes jets of several
// functions sharing the stencil points.
LocalJet local_jet(const std::function<cd(const Point&)>& f, const Point& x, int dim, bool mixed,
                   double step_scale = 1.0);
void local_jets(const std::function<void(const Point&, std::span<cd>)>& f, std::size_t count, const Point& x,
                int dim, bool mixed, std::span<LocalJet> out, double step_scale = 1.0);
// Whether the whole stencil around x lies inside the domain.
bool stencil_inside(const IntegrationDomain& domain, const Point& x, Params lam, int dim, double step_scale = 1.0);

struct ResidualReport {
    double value = 0.0;  // max over evaluated samples of |H psi - E psi| / (|E psi| + eps)
    int evaluated = 0;
    int skipped = 0;     // stencil left the domain
    std::vector<double> per_point;
};

ResidualReport hamiltonian_residual(const ModelDefinition& model, const ParametricWaveFunction& psi, double E,
                                    Params lam, std::span<const Point> samples);

}  // namespace qgt
