#pragma once

// Parameter-dependent spatial metrics g_{mu nu}(x; lambda), their
// determinants, inverses and the deformation vector
//     sigma_i = g_{mu nu} d_i g^{mu nu} = -d_i ln det g.

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "qgt/types.hpp"

namespace qgt {

using MetricMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

struct Interval {
    double lo;
    double hi;
};

// A one- or two-dimensional integration region.  For two dimensions the
// first coordinate is the outer variable; the inner bounds may depend on it
// (wedge domains such as u_- in (-u_+, u_+)).
struct Region {
    int dim = 2;
    Interval outer{};
    Interval inner{};
    std::function<Interval(double)> inner_bounds;  // overrides `inner` when set

    Interval inner_at(double outer_value) const {
        return inner_bounds ? inner_bounds(outer_value) : inner;
    }
};

// Invertible coordinate change x -> U used to integrate a model in the
// coordinates where its ground state is Gaussian.  `jacobian` returns
// |det dx/dU| at U; `multiplicity` counts how many x-branches map onto each U
// (2 for an even map such as U = lambda x^2 with x over the whole line).
struct CoordinateTransform {
    std::function<Region(Params)> region;
    std::function<Point(const Point&, Params)> to_original;
    std::function<Point(const Point&, Params)> from_original;
    std::function<double(const Point&, Params)> jacobian;
    double multiplicity = 1.0;
};

enum class DomainKind { FullPlane, HalfLineProduct, Transformed };

struct IntegrationDomain {
    DomainKind kind = DomainKind::FullPlane;
    int dim = 2;
    // Region in original coordinates.  It may depend on parameters (e.g. the
    // sign of lambda decides which half-line U = lambda x^2 occupies, but the
    // x-region itself does not), hence a callable.
    std::function<Region(Params)> original;
    std::optional<CoordinateTransform> transform;

    bool contains(const Point& x, Params lam) const;
};

struct MetricField {
    int dim_config = 2;
    int dim_params = 0;
    std::function<MetricMatrix(const Point&, Params)> eval;
    // Optional analytic parameter derivative d_i g_{mu nu}.
    std::function<MetricMatrix(const Point&, Params, int)> param_grad;
    // Optional closed-form sigma_i; used only as a fast path and always
    // cross-checked against the generic identity by the test-suite.
    std::function<double(const Point&, Params, int)> sigma;
    IntegrationDomain domain;
};

// Finite-difference step used when no analytic parameter gradient is present.
inline constexpr double kMetricStepRel = 1e-6;

MetricMatrix metric_eval(const MetricField& metric, const Point& x, Params lam);
double metric_det(const MetricField& metric, const Point& x, Params lam);
double sqrt_det(const MetricField& metric, const Point& x, Params lam);
MetricMatrix metric_inverse(const MetricField& metric, const Point& x, Params lam);

// sigma_i from the matrix identity g_{mu nu} d_i g^{mu nu} = -tr(g^{-1} d_i g),
// with d_i g analytic when available, else a central difference.
double deformation_vector(const MetricField& metric, int i, const Point& x, Params lam);

// Generic route that never uses the closed-form fast path: central
// difference of ln det g.  Exposed for invariant checks.
double deformation_vector_from_log_det(const MetricField& metric, int i, const Point& x, Params lam);

// Flat metric of the given configuration dimension, independent of lambda.
MetricField identity_metric(int dim_config, int dim_params, IntegrationDomain domain);

}  // namespace qgt
