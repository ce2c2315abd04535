#pragma once

// Independent route to the generalized tensor: the dressed state
// Psi = g^{1/4} psi is square-integrable in the flat measure, and its ordinary
// (flat) Provost-Vallee tensor must coincide with the full curved tensor of
// psi, since d_i Psi = g^{1/4} (d_i psi - sigma_i psi / 4).
//
// Nothing here reuses the curved machinery: integrals run in the original
// coordinates with unit weight, and parameter derivatives of Psi come only
// from finite differences of Psi itself (neither analytic gradients of psi
// nor sigma are consulted).

#include <Eigen/Dense>

#include "qgt/quadrature.hpp"
#include "qgt/states.hpp"

namespace qgt {

// Psi(x; lambda) = det g(x; lambda)^{1/4} psi(x; lambda), without gradient.
ParametricWaveFunction dressed_state(const ParametricWaveFunction& psi, const MetricField& metric);

struct DressedTensor {
    std::vector<int> indices;
    Eigen::MatrixXcd entries;
    Eigen::MatrixXd quadrature_errors;
    // |G(h, h/2) - G(h/2, h/4)| between Richardson extrapolations at two
    // step sizes; bounds the finite-difference error of `entries`.
    Eigen::MatrixXd difference_errors;

    Eigen::MatrixXd errors() const { return quadrature_errors + difference_errors; }
};

DressedTensor dressed_state_tensor(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                                   std::span<const int> indices, const QuadratureSettings& settings);

}  // namespace qgt
