#pragma once

// Spectral (Zanardi-type) evaluation of the generalized tensor on a
// truncated oscillator basis.
//
// For an eigenstate psi_n of a curved-space Hamiltonian the tensor is
//
//   G_ij = sum_{m != n} L_i(m) R_j(m) / (E_m - E_n)^2
//   L_i(m) = <psi_n| sqrt g (d_i H) |psi_m> - <d_i psi_n| [sqrt g, H] |psi_m> + 1/4 <psi_n| [sqrt g s_i, H] |psi_m>
//   R_j(m) = <psi_m| sqrt g (d_j H) |psi_n> + <psi_m| [sqrt g, H] |d_j psi_n> - 1/4 <psi_m| [sqrt g s_j, H] |psi_n>
//
// with flat brackets, s the deformation vector, and the commutators taken
// with H acting on the bra where the bra is an eigenstate,
//   <a| [A, H] |b> = \int a^* A (H b) - \int (H a)^* A b.
// On a restricted domain the raw product eigenfunctions are exact pointwise
// solutions but not mutually orthogonal, so the sum over m is carried out
// with the dual basis of the Gram matrix S:
//
//   G_ij = l_i^dagger S^+ r_j - conj(<psi_n|D_i psi_n>) <psi_n|D_j psi_n>
//   r_j(k) = (R_j(k) - d_j E_n S_kn) / (E_n - E_k)     (= <phi_k|D_j psi_n> exactly)
//
// which collapses to the sum above for an orthonormal basis.  The n-th
// state enters through its direct projections.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgt/models.hpp"
#include "qgt/quadrature.hpp"

namespace qgt {

struct BasisState {
    int n_plus = 0;
    int n_minus = 0;
    int quanta() const { return n_plus + n_minus; }
    double energy = 0.0;          // analytic level energy
    double scale = 1.0;           // raw product eigenfunction times `scale` has unit curved norm
    ParametricWaveFunction psi;   // scaled product eigenfunction (the scale is fixed at build time)
};

// Automatic: the product-form wedge integral when the model admits it, else a
// direct two-dimensional quadrature of every overlap.
enum class GramMethod { Automatic, Separable, Direct };

struct BasisSet {
    const ModelDefinition* model = nullptr;
    ParamVector params;
    int truncation = 0;                 // maximal n_plus + n_minus
    std::vector<BasisState> states;     // energies non-decreasing
    Eigen::MatrixXcd gram;              // curved overlaps of the scaled states
    double gram_error = 0.0;            // largest quadrature error of an entry
    double gram_condition = 1.0;
    GramMethod gram_method = GramMethod::Direct;  // the method actually used

    // Filled by orthonormalize(): columns are the orthonormal states in the
    // scaled basis, with their Rayleigh-quotient energies.
    bool orthonormalized = false;
    Eigen::MatrixXcd coefficients;
    std::vector<double> rayleigh_energies;
    std::vector<double> energies;       // Rayleigh where it drifts more than kEnergyDriftTolerance, else analytic
    double energy_drift = 0.0;          // max |E_rayleigh - E_analytic|
    double orthonormality_defect = 0.0; // max |<m|l> - delta_ml| re-integrated

    std::size_t size() const { return states.size(); }
    int index_of(int n_plus, int n_minus) const;  // -1 when absent
};

inline constexpr double kEnergyDriftTolerance = 1e-3;

BasisSet build_basis(const ModelDefinition& model, int truncation, Params lam, const QuadratureSettings& settings,
                     GramMethod method = GramMethod::Automatic);

// Cholesky (equivalently Gram-Schmidt in listing order) under the curved
// inner product, followed by a re-integration of the orthonormal states'
// overlaps.  Throws InvariantViolation if the defect exceeds 1e-8.
void orthonormalize(BasisSet& basis, const QuadratureSettings& settings);

// Step controls for the finite differences of the expansion.  Applying H to
// a finitely differenced state amplifies its roundoff by 1/h^2, so the steps
// are chosen large enough that noise and truncation both sit near 1e-10.
struct ZanardiSettings {
    // Coordinate stencil step as a multiple of stencil_step.
    double stencil_scale = 50.0;
    // Relative step for d_i psi_n (central, Richardson), on the state constructor.
    double state_step_rel = 1e-2;
    // Relative step for d_i H (central, Richardson in the Hamiltonian's parameters).
    double operator_step_rel = 1e-2;
    // Relative eigenvalue cutoff of the Gram pseudo-inverse.
    double gram_cutoff = 1e-12;
    // Integrands carrying stencil noise are integrated to at least this
    // relative tolerance.
    double rel_tol_floor = 1e-8;
};

enum class OperatorKind { SqrtgDH, CommSqrtgH, CommSqrtgSigmaH, DpsiCommSqrtgH };

const char* operator_kind_name(OperatorKind kind);

// Matrix element between basis states n (bra) and m (ket):
//   SqrtgDH           <n| sqrt g (d_i H) |m>
//   CommSqrtgH        <n| [sqrt g, H] |m>
//   CommSqrtgSigmaH   <n| [sqrt g s_i, H] |m>
//   DpsiCommSqrtgH    <d_i n| [sqrt g, H] |m>, d_i n by differences of the basis constructor
IntegralResult operator_element(const BasisSet& basis, int n, int m, OperatorKind kind, int i,
                                const QuadratureSettings& settings, const ZanardiSettings& zs = {});

struct ZanardiResult {
    int state = 0;                       // basis index of psi_n
    std::vector<int> indices;
    Eigen::MatrixXcd entries;            // full truncation, Hermitised
    double hermiticity_defect = 0.0;     // before averaging
    std::vector<int> shells;             // total quanta 0..M
    std::vector<Eigen::MatrixXcd> partial_sums;  // tensor restricted to states with quanta <= shell
    // Standard two-factor sum over the orthonormalized basis,
    //   sum_{m != n} <n|sqrt g d_i H|m><m|sqrt g d_j H|n> / (E_m - E_n)^2.
    Eigen::MatrixXcd two_factor;
    // Largest |commutator term| over the basis and indices (vanishes for a flat metric).
    double commutator_magnitude = 0.0;
    int skipped = 0;                     // near-degenerate states left out
    std::vector<std::string> diagnostics;
};

inline constexpr double kDegeneracyGap = 1e-9;

// Tensor of basis state n over the given parameter indices (all when empty).
ZanardiResult zanardi_qgt(const BasisSet& basis, int n, std::span<const int> indices,
                          const QuadratureSettings& settings, const ZanardiSettings& zs = {});
cd zanardi_qgt(const BasisSet& basis, int n, int i, int j, const QuadratureSettings& settings,
               const ZanardiSettings& zs = {});

// H_lambda f and (d_i H) f at a point for several functions sharing one
// stencil.  Models whose transform flattens the metric are differentiated in
// the flat frame (one-sided stencils at frame boundaries); others use the
// Laplace-Beltrami coefficients in original coordinates.
class HamiltonianStencil {
public:
    using Functions = std::function<void(const Point&, std::span<cd>)>;

    HamiltonianStencil(const ModelDefinition& model, double step_scale);

    void apply(Params lam, const Point& x, const Functions& f, std::size_t count, std::span<cd> out) const;
    void apply_derivative(Params lam, int i, double step, const Point& x, const Functions& f, std::size_t count,
                          std::span<cd> out) const;
    bool uses_frame() const { return frame_; }

private:
    void frame_apply(Params lam, const Point& x, const Functions& f, std::size_t count, std::span<cd> out) const;

    const ModelDefinition& model_;
    double scale_;
    bool frame_;
};

}  // namespace qgt
