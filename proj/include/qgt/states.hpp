#pragma once

// Parameter derivatives of wavefunctions and curved-space normalization.

#include <functional>

#include "qgt/quadrature.hpp"
#include "qgt/wavefunction.hpp"

namespace qgt {

inline constexpr double kParamStepRel = 1e-4;

inline double default_param_step(double value) { return kParamStepRel * (1.0 + std::abs(value)); }

struct DerivativeResult {
    cd value;
    bool analytic = false;
    bool one_sided = false;  // inadmissible neighbour forced an order-2 one-sided stencil
};

// Derivative of a scalar function of the parameter point along lambda_i.
// Central Richardson extrapolation (4 D(h/2) - D(h)) / 3 when every stencil
// point is admissible, otherwise a second-order one-sided stencil towards
// the admissible side.
DerivativeResult fd_param_derivative(const std::function<cd(Params)>& f, int i, Params lam, double h,
                                     const std::function<bool(Params)>& admissible = {});

// d psi / d lambda_i at x.  Uses the analytic gradient when present.
DerivativeResult param_derivative(const ParametricWaveFunction& psi, int i, Params lam, const Point& x, double h);
DerivativeResult param_derivative(const ParametricWaveFunction& psi, int i, Params lam, const Point& x);

// Fills psi(x) and d_i psi(x) for each index in `indices`; derivatives come
// from the analytic gradient unless `force_fd`.  Returns whether any
// derivative fell back to a one-sided stencil.
bool value_and_derivatives(const ParametricWaveFunction& psi, Params lam, const Point& x,
                           std::span<const int> indices, cd& value, std::span<cd> derivs, bool force_fd = false);

struct NormalizedState {
    ParametricWaveFunction psi;
    double constant = 1.0;  // psi_normalized = constant * psi_input at the base point
};

// Returns psi scaled to unit curved norm.  The returned evaluator recomputes
// the constant by quadrature at shifted parameter points (memoised), so its
// parameter derivatives are those of the normalized family N(lambda) psi.
NormalizedState normalize(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                          const QuadratureSettings& settings);

// Curved norm <psi|psi>.
IntegralResult norm_squared(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                            const QuadratureSettings& settings);

}  // namespace qgt
