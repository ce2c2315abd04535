#pragma once

// Generalized quantum geometric tensor on a parameter-dependent curved
// configuration space, the Provost-Vallee sub-tensor, and the modified Berry
// connection and curvature.
//
// With the curved inner product and s_i = sigma_i the deformation vector,
//
//   G_ij = <D_i psi|D_j psi> - <D_i psi|psi><psi|D_j psi>,   D_i = d_i - s_i / 4
//
// expands into the eight bracket terms
//
//   <d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>
//   - 1/4 <psi|s_i d_j psi> - 1/4 <d_i psi|s_j psi>
//   + 1/4 <s_i><psi|d_j psi> + 1/4 <s_j><d_i psi|psi>
//   + 1/16 <s_i s_j> - 1/16 <s_i><s_j>
//
// The first line alone is the Provost-Vallee tensor.  Entries are assembled
// from one fused quadrature per parameter point in the projector form
//   G_ij = [<X_i|X_j> - <X_i|psi><psi|X_j> / n] / n,   n = <psi|psi>,
// which equals the eight-term sum for a normalized state and is invariant
// under psi -> c(lambda) psi.

#include <Eigen/Dense>

#include "qgt/quadrature.hpp"
#include "qgt/states.hpp"

namespace qgt {

enum class TensorVariant { Full, ProvostVallee };

const char* variant_name(TensorVariant v);

struct QGTMatrix {
    ParamVector params;
    std::vector<int> indices;          // parameter index of each row/column
    Eigen::MatrixXcd entries;
    Eigen::MatrixXd error_estimates;
    TensorVariant variant = TensorVariant::Full;
    double norm = 1.0;                 // <psi|psi> at params
    bool one_sided = false;            // a finite-difference derivative used a one-sided stencil
    double hermiticity_defect = 0.0;   // max |G - G^dagger| before averaging
};

struct TensorSpectrum {
    double det = 0.0;                  // determinant of Re G
    std::vector<double> eigenvalues;   // eigenvalues of Re G, in solver order
};

// Single entries of the full tensor and of the Provost-Vallee tensor.
IntegralResult qgt_component(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                             Params lam, const QuadratureSettings& settings);
IntegralResult provost_vallee_component(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                        Params lam, const QuadratureSettings& settings);

// The eight terms listed above, each integrated separately (diagnostic only;
// assumes a normalized state).
struct QGTTerms {
    std::array<cd, 8> terms{};
    std::array<double, 8> errors{};
    cd sum() const;
};
QGTTerms qgt_terms(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j, Params lam,
                   const QuadratureSettings& settings);

// Block over the given parameter indices (all parameters when empty).
// The raw block is Hermitised by averaging with its adjoint; the discrepancy
// is added to the error estimates.
QGTMatrix qgt_matrix(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                     std::span<const int> indices, const QuadratureSettings& settings,
                     TensorVariant variant = TensorVariant::Full);

// Both variants from the same quadrature.
std::pair<QGTMatrix, QGTMatrix> qgt_full_and_pv(const ParametricWaveFunction& psi, const MetricField& metric,
                                                Params lam, std::span<const int> indices,
                                                const QuadratureSettings& settings);

// Determinant and eigenvalues of the real part (the quantum metric).  Throws
// InvariantViolation if the matrix is not Hermitian within 10x its errors.
TensorSpectrum spectrum(const QGTMatrix& matrix);
TensorSpectrum spectrum(const Eigen::MatrixXd& real_part);

// ---------------------------------------------------------------------------
// Berry quantities

// Bracket expectations shared by the normalization identity and the Berry
// connection, for a single parameter direction.
struct ConnectionBrackets {
    cd norm;              // <psi|psi>
    cd overlap;           // <psi|d_i psi>
    cd sigma;             // <sigma_i>, complex so that its reality can be checked
    double error = 0.0;   // largest quadrature error of the three
};
ConnectionBrackets connection_brackets(const ParametricWaveFunction& psi, const MetricField& metric, int i,
                                       Params lam, const QuadratureSettings& settings);

// <d_i psi|psi> + <psi|d_i psi> - <sigma_i>/2, which vanishes for a
// normalized family.
cd normalization_identity(const ConnectionBrackets& b);

inline constexpr double kBerryImagTolerance = 1e-5;

struct ConnectionResult {
    double value = 0.0;                 // beta_i
    double imaginary_residual = 0.0;    // |Im| of -i<psi|d_i psi> + (i/4)<sigma_i> before discarding
    double naive = 0.0;                 // |-i <psi|d_i psi>|
    double error = 0.0;
};

// beta_i = Re[-i <psi|d_i psi> + (i/4) <sigma_i>].  The state is normalized
// internally if needed.  Throws InvariantViolation when the imaginary
// residual exceeds kBerryImagTolerance.
ConnectionResult berry_connection(const ParametricWaveFunction& psi, const MetricField& metric, int i, Params lam,
                                  const QuadratureSettings& settings);

inline constexpr double kCurvatureStepRel = 1e-3;
inline double curvature_step(double value) { return kCurvatureStepRel * (1.0 + std::abs(value)); }

struct CurvatureResult {
    double value = 0.0;     // F_ij = d_i beta_j - d_j beta_i
    double error = 0.0;     // Richardson discrepancy plus propagated quadrature error
    bool one_sided = false;
};

// Central differences of beta at steps h and h/2 combined by Richardson
// extrapolation; one-sided when a neighbour is inadmissible.
CurvatureResult berry_curvature(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                Params lam, const QuadratureSettings& settings, double step_scale = 1.0);

struct BerryData {
    ParamVector params;
    std::vector<int> indices;
    std::vector<double> connection;
    std::vector<double> imaginary_residuals;
    std::vector<double> naive;
    Eigen::MatrixXd curvature;          // antisymmetric by construction
    Eigen::MatrixXd curvature_errors;
    bool one_sided = false;
};

BerryData berry_data(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                     std::span<const int> indices, const QuadratureSettings& settings);

// d_i F_jk + d_j F_ki + d_k F_ij by central differences of the curvature.
struct ClosednessResult {
    double value = 0.0;
    double scale = 0.0;   // sum of the magnitudes of the three terms
};
ClosednessResult curvature_closedness(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                      int k, Params lam, const QuadratureSettings& settings);

}  // namespace qgt
