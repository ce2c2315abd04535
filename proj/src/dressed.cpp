#include "qgt/dressed.hpp"

#include <cmath>

namespace qgt {

ParametricWaveFunction dressed_state(const ParametricWaveFunction& psi, const MetricField& metric) {
    ParametricWaveFunction out;
    out.dim_config = psi.dim_config;
    out.dim_params = psi.dim_params;
    out.admissible = psi.admissible;
    out.domain = psi.domain;
    out.label = "dressed " + psi.label;
    auto eval = psi.eval;
    auto g = metric;
    out.eval = [eval, g](const Point& x, Params lam) {
        return std::pow(std::max(0.0, metric_det(g, x, lam)), 0.25) * eval(x, lam);
    };
    return out;
}

DressedTensor dressed_state_tensor(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                                   std::span<const int> indices, const QuadratureSettings& settings) {
    std::vector<int> idx(indices.begin(), indices.end());
    if (idx.empty()) {
        for (int i = 0; i < psi.dim_params; ++i) idx.push_back(i);
    }
    const int m = static_cast<int>(idx.size());
    const ParametricWaveFunction Psi = dressed_state(psi, metric);

    // Shifted parameter points: offsets +-h, +-h/2, +-h/4 along each index.
    constexpr std::array<double, 6> kOffsets{1.0, -1.0, 0.5, -0.5, 0.25, -0.25};
    std::vector<ParamVector> shifted;
    for (int k = 0; k < m; ++k) {
        const double h = default_param_step(lam[idx[k]]);
        for (double o : kOffsets) {
            ParamVector p(lam.begin(), lam.end());
            p[idx[k]] += o * h;
            if (!Psi.is_admissible(p)) {
                throw DomainError("dressed-state stencil leaves the admissible region at " + format_point(lam));
            }
            shifted.push_back(std::move(p));
        }
    }

    // Components: n, then for each of the two extrapolations a_k and b_kl.
    const std::size_t per = static_cast<std::size_t>(m + m * m);
    const std::size_t ncomp = 1 + 2 * per;
    auto f = [&](const Point& x, std::span<cd> out) {
        const cd v = Psi.eval(x, lam);
        std::array<std::array<cd, kMaxParams>, 2> d{};
        for (int k = 0; k < m; ++k) {
            const double h = default_param_step(lam[idx[k]]);
            std::array<cd, 6> s;
            for (int o = 0; o < 6; ++o) s[o] = Psi.eval(x, shifted[6 * k + o]);
            const cd d_h = (s[0] - s[1]) / (2.0 * h);
            const cd d_h2 = (s[2] - s[3]) / h;
            const cd d_h4 = (s[4] - s[5]) / (0.5 * h);
            d[0][k] = (4.0 * d_h2 - d_h) / 3.0;
            d[1][k] = (4.0 * d_h4 - d_h2) / 3.0;
        }
        out[0] = std::norm(v);
        for (int r = 0; r < 2; ++r) {
            std::size_t c = 1 + r * per;
            for (int k = 0; k < m; ++k) out[c++] = std::conj(v) * d[r][k];
            for (int k = 0; k < m; ++k) {
                for (int l = 0; l < m; ++l) out[c++] = std::conj(d[r][k]) * d[r][l];
            }
        }
    };
    const VectorIntegralResult res = integrate_flat(ncomp, f, Psi.domain, lam, settings);

    const double n = res.values[0].real();
    const double n_err = res.errors[0];
    auto tensor = [&](int r, Eigen::MatrixXcd& G, Eigen::MatrixXd& E) {
        G.resize(m, m);
        E.resize(m, m);
        const std::size_t base = 1 + r * per;
        for (int k = 0; k < m; ++k) {
            for (int l = 0; l < m; ++l) {
                const cd ak = res.values[base + k], al = res.values[base + l];
                const double ek = res.errors[base + k], el = res.errors[base + l];
                const std::size_t cb = base + m + k * m + l;
                const cd proj = std::conj(ak) * al / n;
                G(k, l) = (res.values[cb] - proj) / n;
                E(k, l) = (res.errors[cb] + (std::abs(ak) * el + std::abs(al) * ek) / n + std::abs(proj) * n_err / n) / n +
                          std::abs(G(k, l)) * n_err / n;
            }
        }
    };
    DressedTensor out;
    out.indices = idx;
    Eigen::MatrixXcd G2;
    Eigen::MatrixXd E2;
    tensor(0, out.entries, out.quadrature_errors);
    tensor(1, G2, E2);
    out.difference_errors = (out.entries - G2).cwiseAbs();
    return out;
}

}  // namespace qgt
