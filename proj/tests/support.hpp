#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "qgt/models.hpp"

namespace qgt::testing {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline IntegrationDomain full_line() {
    IntegrationDomain d;
    d.kind = DomainKind::FullPlane;
    d.dim = 1;
    d.original = [](Params) {
        Region r;
        r.dim = 1;
        r.outer = {-kInf, kInf};
        return r;
    };
    return d;
}

inline IntegrationDomain full_plane() {
    IntegrationDomain d;
    d.kind = DomainKind::FullPlane;
    d.dim = 2;
    d.original = [](Params) {
        Region r;
        r.outer = {-kInf, kInf};
        r.inner = {-kInf, kInf};
        return r;
    };
    return d;
}

// Normalized exp(-omega x^2 / 2) on the line, lambda = (omega).
inline ParametricWaveFunction gaussian_1d() {
    ParametricWaveFunction psi;
    psi.dim_config = 1;
    psi.dim_params = 1;
    psi.domain = full_line();
    psi.admissible = [](Params p) { return p[0] > 0.0; };
    psi.eval = [](const Point& x, Params p) -> cd {
        return std::pow(p[0] / std::numbers::pi, 0.25) * std::exp(-0.5 * p[0] * x[0] * x[0]);
    };
    psi.label = "gaussian";
    return psi;
}

// H = p^2/2 + omega^2 x^2 / 2 on the line, lambda = (omega).
inline ModelDefinition oscillator_1d() {
    ModelDefinition m;
    m.name = "oscillator-1d";
    m.param_names = {"omega"};
    m.admissibility = [](Params p) { return p[0] > 0.0 ? std::string() : std::string("omega must be positive"); };
    m.metric = identity_metric(1, 1, full_line());
    m.potential = [](const Point& x, Params p) { return 0.5 * p[0] * p[0] * x[0] * x[0]; };
    return m;
}

// Uniform draw of an admissible parameter point of a built-in model in a
// moderate box (k, kappa in [0.3, 3], metric parameters in [0.5, 2]).
inline ParamVector random_point(const ModelDefinition& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coupling(0.3, 3.0), metric(0.5, 2.0), sign(0.0, 1.0);
    for (;;) {
        ParamVector p(m.dim_params());
        p[0] = coupling(rng);
        if (p.size() > 1) p[1] = coupling(rng);
        if (p.size() > 2) p[2] = metric(rng) * (m.name == "anh-toda" && sign(rng) < 0.5 ? -1.0 : 1.0);
        if (p.size() > 3) p[3] = metric(rng);
        if (m.name == "exp-gauge") p[0] += p[3] * p[3] + 0.5;  // keep k away from Y^2
        if (m.admissible(p)) return p;
    }
}

inline std::vector<const ModelDefinition*> curved_models() { return {&sym_toda(), &anh_toda(), &exp_gauge()}; }

}  // namespace qgt::testing
