#include "qgt/geometry.hpp"

#include <cmath>
#include <sstream>

namespace qgt {

std::string format_point(Params p) {
    std::ostringstream os;
    os.precision(12);
    os << '(';
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << ')';
    return os.str();
}

bool IntegrationDomain::contains(const Point& x, Params lam) const {
    const Region r = original(lam);
    if (!(x[0] > r.outer.lo && x[0] < r.outer.hi)) return false;
    if (r.dim == 1) return true;
    const Interval in = r.inner_at(x[0]);
    return x[1] > in.lo && x[1] < in.hi;
}

namespace {

void require_finite(const MetricMatrix& g, const Point& x, Params lam) {
    if (!g.allFinite()) {
        throw EvaluationError("metric has non-finite entries at x=(" + std::to_string(x[0]) + "," +
                              std::to_string(x[1]) + "), lambda=" + format_point(lam));
    }
}

double determinant(const MetricMatrix& g) {
    if (g.rows() == 1) return g(0, 0);
    if (g.rows() == 2) return g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    return g.determinant();
}

double shifted_step(double value) {
    const double h = kMetricStepRel * (1.0 + std::abs(value));
    if (!(value + h != value) || !(value - h != value)) {
        throw EvaluationError("finite-difference step underflows at parameter value " + std::to_string(value));
    }
    return h;
}

MetricMatrix fd_param_grad(const MetricField& metric, int i, const Point& x, Params lam) {
    ParamVector shifted(lam.begin(), lam.end());
    const double h = shifted_step(lam[i]);
    shifted[i] = lam[i] + h;
    const MetricMatrix gp = metric_eval(metric, x, shifted);
    shifted[i] = lam[i] - h;
    const MetricMatrix gm = metric_eval(metric, x, shifted);
    return (gp - gm) / (2.0 * h);
}

}  // namespace

MetricMatrix metric_eval(const MetricField& metric, const Point& x, Params lam) {
    MetricMatrix g = metric.eval(x, lam);
    require_finite(g, x, lam);
    return g;
}

double metric_det(const MetricField& metric, const Point& x, Params lam) {
    const double d = determinant(metric_eval(metric, x, lam));
    if (!std::isfinite(d)) throw EvaluationError("metric determinant is not finite at " + format_point(lam));
    if (d < 0.0 && metric.domain.contains(x, lam)) {
        throw InvariantViolation("negative metric determinant at interior point, lambda=" + format_point(lam));
    }
    return d;
}

double sqrt_det(const MetricField& metric, const Point& x, Params lam) {
    return std::sqrt(std::max(0.0, metric_det(metric, x, lam)));
}

MetricMatrix metric_inverse(const MetricField& metric, const Point& x, Params lam) {
    const MetricMatrix g = metric_eval(metric, x, lam);
    const double d = determinant(g);
    if (d == 0.0 || !std::isfinite(d)) throw EvaluationError("metric is singular at " + format_point(lam));
    if (g.rows() == 1) {
        MetricMatrix inv(1, 1);
        inv(0, 0) = 1.0 / g(0, 0);
        return inv;
    }
    if (g.rows() == 2) {
        MetricMatrix inv(2, 2);
        inv << g(1, 1) / d, -g(0, 1) / d, -g(1, 0) / d, g(0, 0) / d;
        return inv;
    }
    return g.inverse();
}

double deformation_vector(const MetricField& metric, int i, const Point& x, Params lam) {
    if (metric.sigma) return metric.sigma(x, lam, i);
    const MetricMatrix ginv = metric_inverse(metric, x, lam);
    const MetricMatrix dg = metric.param_grad ? metric.param_grad(x, lam, i) : fd_param_grad(metric, i, x, lam);
    // d_i g^{-1} = -g^{-1} (d_i g) g^{-1}, so g_{mu nu} d_i g^{mu nu} = -tr(g^{-1} d_i g).
    return -(ginv * dg).trace();
}

double deformation_vector_from_log_det(const MetricField& metric, int i, const Point& x, Params lam) {
    ParamVector shifted(lam.begin(), lam.end());
    const double h = shifted_step(lam[i]);
    shifted[i] = lam[i] + h;
    const double lp = std::log(determinant(metric_eval(metric, x, shifted)));
    shifted[i] = lam[i] - h;
    const double lm = std::log(determinant(metric_eval(metric, x, shifted)));
    return -(lp - lm) / (2.0 * h);
}

MetricField identity_metric(int dim_config, int dim_params, IntegrationDomain domain) {
    MetricField m;
    m.dim_config = dim_config;
    m.dim_params = dim_params;
    m.eval = [dim_config](const Point&, Params) -> MetricMatrix {
        return MetricMatrix::Identity(dim_config, dim_config);
    };
    m.param_grad = [dim_config](const Point&, Params, int) -> MetricMatrix {
        return MetricMatrix::Zero(dim_config, dim_config);
    };
    m.sigma = [](const Point&, Params, int) { return 0.0; };
    m.domain = std::move(domain);
    return m;
}

}  // namespace qgt
