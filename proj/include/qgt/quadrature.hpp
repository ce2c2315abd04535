#pragma once

// Adaptive Gauss-Kronrod quadrature for vector-valued complex integrands in
// one and two dimensions.
//
// Every interval is first mapped to the real line in a variable s:
//     (a, b)       u = midpoint + half_width * tanh(s)
//     (a, inf)     u = a + L e^s
//     (-inf, b)    u = b - L e^s
//     (-inf, inf)  u = L sinh(s)
// The mapped integrand decays at least exponentially in s for the Gaussian
// and log-singular integrands met here, so the s-range is truncated where
// all components fall below truncation_tail_tol relative to their peak.  The
// truncated range is split into panels which are bisected adaptively using
// the embedded 7-point Gauss / 15-point Kronrod pair.
//
// Two-dimensional regions are integrated as nested one-dimensional
// integrals (outer variable first); inner errors and absolute magnitudes are
// propagated into the outer integral.

#include <functional>
#include <span>
#include <vector>

#include "qgt/geometry.hpp"
#include "qgt/wavefunction.hpp"

namespace qgt {

struct QuadratureSettings {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int max_subdivisions = 20;
    double truncation_tail_tol = 1e-13;

    void validate() const;
};

struct IntegralResult {
    cd value;
    double error_estimate = 0.0;
    long evaluations = 0;
};

struct VectorIntegralResult {
    std::vector<cd> values;
    std::vector<double> errors;
    std::vector<double> magnitudes;  // integral of |f_c|
    long evaluations = 0;

    IntegralResult component(std::size_t c) const { return {values[c], errors[c], evaluations}; }
};

// Integrand writing `out.size()` complex components at a point.
using VectorIntegrand = std::function<void(const Point&, std::span<cd>)>;

VectorIntegralResult integrate_vector(std::size_t ncomp, const VectorIntegrand& f, const Region& region,
                                      const QuadratureSettings& settings);

IntegralResult integrate_1d(const std::function<cd(double)>& f, Interval interval,
                            const QuadratureSettings& settings);
IntegralResult integrate_2d(const std::function<cd(const Point&)>& f, const Region& region,
                            const QuadratureSettings& settings);
IntegralResult integrate_2d(const std::function<cd(const Point&)>& f, const IntegrationDomain& domain,
                            Params lam, const QuadratureSettings& settings);

enum class Coordinates { Automatic, Original };

// Integral of f against the curved measure sqrt(g) d^N x of the metric's
// domain.  `f` always receives points in original coordinates; when the
// domain declares a transform (and Automatic is requested) the integration
// variable is the transformed coordinate and the weight becomes
// multiplicity * sqrt(g(x(U))) * |dx/dU|.
VectorIntegralResult integrate_curved(std::size_t ncomp, const VectorIntegrand& f, const MetricField& metric,
                                      Params lam, const QuadratureSettings& settings,
                                      Coordinates coords = Coordinates::Automatic);

// Flat (unweighted) integral over the metric's original-coordinate region.
VectorIntegralResult integrate_flat(std::size_t ncomp, const VectorIntegrand& f, const IntegrationDomain& domain,
                                    Params lam, const QuadratureSettings& settings);

// Curved inner product <phi|psi> = \int d^N x sqrt(g) phi^* psi.
IntegralResult inner_product(const ParametricWaveFunction& phi, const ParametricWaveFunction& psi,
                             const MetricField& metric, Params lam, const QuadratureSettings& settings);

}  // namespace qgt
