// Laplace-Beltrami Hamiltonian with a symmetrically ordered gauge coupling:
//
//   H f = -1/2 Delta_LB f - i F^mu d_mu f - (i/2) (div F) f + 1/2 F.F f + V1 f
//   Delta_LB f = g^{mu nu} d_mu d_nu f + (1/sqrt g) d_nu (sqrt g g^{nu mu}) d_mu f
//   div F = (1/sqrt g) d_mu (sqrt g g^{mu nu} F_nu)
//
// which is (p + F) g^{-1} (p + F) / 2 + V1 with p = -i d acting
// self-adjointly in the curved inner product.  Coordinate derivatives of the
// coefficients and of the wavefunction use 5-point central stencils.

#include <cmath>
#include <limits>

#include "qgt/models.hpp"

namespace qgt {

namespace {

// 5-point first-derivative weights at offsets -2h, -h, +h, +2h.
constexpr double kD1[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
constexpr double kOff[4] = {-2.0, -1.0, 1.0, 2.0};

Point shifted(const Point& x, int mu, double d) {
    Point y = x;
    y[mu] += d;
    return y;
}

// d_mu of a real function by the 5-point stencil.
template <class F>
double stencil_d1(F&& f, const Point& x, int mu) {
    const double h = stencil_step(x[mu]);
    double acc = 0.0;
    for (int s = 0; s < 4; ++s) acc += kD1[s] * f(shifted(x, mu, kOff[s] * h));
    return acc / h;
}

}  // namespace

HamiltonianCoefficients hamiltonian_coefficients(const ModelDefinition& model, const Point& x, Params lam) {
    const MetricField& metric = model.metric;
    HamiltonianCoefficients c;
    c.dim = metric.dim_config;
    c.ginv = metric_inverse(metric, x, lam);
    const double sg = sqrt_det(metric, x, lam);
    c.mixed = c.dim == 2 && c.ginv(0, 1) != 0.0;

    for (int mu = 0; mu < c.dim; ++mu) {
        double acc = 0.0;
        for (int nu = 0; nu < c.dim; ++nu) {
            acc += stencil_d1(
                [&](const Point& y) { return sqrt_det(metric, y, lam) * metric_inverse(metric, y, lam)(nu, mu); },
                x, nu);
        }
        c.drift[mu] = acc / sg;
    }

    c.potential = model.potential(x, lam);
    if (model.gauge_covector) {
        c.gauge = true;
        const auto F = model.gauge_covector(x, lam);
        for (int mu = 0; mu < c.dim; ++mu) {
            for (int nu = 0; nu < c.dim; ++nu) c.gauge_up[mu] += c.ginv(mu, nu) * F[nu];
        }
        for (int mu = 0; mu < c.dim; ++mu) c.gauge_sq += F[mu] * c.gauge_up[mu];
        double div = 0.0;
        for (int mu = 0; mu < c.dim; ++mu) {
            div += stencil_d1(
                [&](const Point& y) {
                    const MetricMatrix gi = metric_inverse(metric, y, lam);
                    const auto Fy = model.gauge_covector(y, lam);
                    double up = 0.0;
                    for (int nu = 0; nu < c.dim; ++nu) up += gi(mu, nu) * Fy[nu];
                    return sqrt_det(metric, y, lam) * up;
                },
                x, mu);
        }
        c.gauge_div = div / sg;
    }
    return c;
}

cd apply_hamiltonian(const HamiltonianCoefficients& c, const LocalJet& jet) {
    const cd I(0.0, 1.0);
    cd lap = 0.0;
    for (int mu = 0; mu < c.dim; ++mu) {
        for (int nu = 0; nu < c.dim; ++nu) {
            if (mu != nu && !c.mixed) continue;
            lap += c.ginv(mu, nu) * jet.hess[mu][nu];
        }
        lap += c.drift[mu] * jet.grad[mu];
    }
    cd out = -0.5 * lap + c.potential * jet.value;
    if (c.gauge) {
        cd transport = 0.0;
        for (int mu = 0; mu < c.dim; ++mu) transport += c.gauge_up[mu] * jet.grad[mu];
        out += -I * transport - 0.5 * I * c.gauge_div * jet.value + 0.5 * c.gauge_sq * jet.value;
    }
    return out;
}

void local_jets(const std::function<void(const Point&, std::span<cd>)>& f, std::size_t count, const Point& x,
                int dim, bool mixed, std::span<LocalJet> out, double step_scale) {
    std::vector<cd> centre(count), buf(count);
    f(x, centre);
    for (std::size_t c = 0; c < count; ++c) out[c] = LocalJet{centre[c], {}, {}};

    // Second-derivative weights at -2h, -h, +h, +2h (centre weight -30/12).
    constexpr double kD2[4] = {-1.0 / 12.0, 16.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
    std::array<double, 2> h{};
    for (int mu = 0; mu < dim; ++mu) {
        h[mu] = step_scale * stencil_step(x[mu]);
        std::vector<cd> d1(count, 0.0), d2(count, 0.0);
        for (int s = 0; s < 4; ++s) {
            f(shifted(x, mu, kOff[s] * h[mu]), buf);
            for (std::size_t c = 0; c < count; ++c) {
                d1[c] += kD1[s] * buf[c];
                d2[c] += kD2[s] * buf[c];
            }
        }
        for (std::size_t c = 0; c < count; ++c) {
            out[c].grad[mu] = d1[c] / h[mu];
            out[c].hess[mu][mu] = (d2[c] - 2.5 * centre[c]) / (h[mu] * h[mu]);
        }
    }
    if (mixed && dim == 2) {
        std::vector<cd> d12(count, 0.0);
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                const Point y{x[0] + kOff[a] * h[0], x[1] + kOff[b] * h[1]};
                f(y, buf);
                for (std::size_t c = 0; c < count; ++c) d12[c] += kD1[a] * kD1[b] * buf[c];
            }
        }
        for (std::size_t c = 0; c < count; ++c) {
            out[c].hess[0][1] = out[c].hess[1][0] = d12[c] / (h[0] * h[1]);
        }
    }
}

LocalJet local_jet(const std::function<cd(const Point&)>& f, const Point& x, int dim, bool mixed,
                   double step_scale) {
    LocalJet jet;
    local_jets([&](const Point& y, std::span<cd> v) { v[0] = f(y); }, 1, x, dim, mixed, std::span<LocalJet>(&jet, 1),
               step_scale);
    return jet;
}

bool stencil_inside(const IntegrationDomain& domain, const Point& x, Params lam, int dim, double step_scale) {
    std::array<double, 2> h{step_scale * stencil_step(x[0]), step_scale * stencil_step(x[1])};
    // Every stencil (wavefunction and coefficients) reaches at most 2h along
    // each axis, so the extreme corners suffice.
    for (double a : {-2.0, 2.0}) {
        for (double b : {-2.0, 2.0}) {
            Point y = x;
            y[0] += a * h[0];
            if (dim == 2) y[1] += b * h[1];
            if (!domain.contains(y, lam)) return false;
        }
    }
    return domain.contains(x, lam);
}

ResidualReport hamiltonian_residual(const ModelDefinition& model, const ParametricWaveFunction& psi, double E,
                                    Params lam, std::span<const Point> samples) {
    model.require_admissible(lam);
    ResidualReport rep;
    const int dim = model.metric.dim_config;
    for (const Point& x : samples) {
        if (!stencil_inside(model.metric.domain, x, lam, dim)) {
            ++rep.skipped;
            continue;
        }
        const HamiltonianCoefficients c = hamiltonian_coefficients(model, x, lam);
        const LocalJet jet = local_jet([&](const Point& y) { return psi.eval(y, lam); }, x, dim, c.mixed);
        const cd r = apply_hamiltonian(c, jet) - E * jet.value;
        const double rel = std::abs(r) / (std::abs(E * jet.value) + std::numeric_limits<double>::min());
        rep.per_point.push_back(rel);
        rep.value = std::max(rep.value, rel);
        ++rep.evaluated;
    }
    return rep;
}

}  // namespace qgt
