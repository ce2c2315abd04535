#pragma once

#include <functional>
#include <string>

#include "qgt/geometry.hpp"

namespace qgt {

// Complex wavefunction psi(x; lambda) on a declared domain.
struct ParametricWaveFunction {
    int dim_config = 2;
    int dim_params = 0;
    std::function<cd(const Point&, Params)> eval;
    // Optional analytic gradient: returns psi and writes d psi / d lambda_i
    // for every i < dim_params into `grad`.
    std::function<cd(const Point&, Params, std::span<cd>)> value_and_gradient;
    // Optional admissibility predicate for parameter points; absent means
    // every point is admissible.
    std::function<bool(Params)> admissible;
    IntegrationDomain domain;
    std::string label;

    bool has_analytic_gradient() const { return static_cast<bool>(value_and_gradient); }
    bool is_admissible(Params lam) const { return !admissible || admissible(lam); }
};

}  // namespace qgt
