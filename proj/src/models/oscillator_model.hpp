#pragma once

// Shared construction of the coupled-oscillator models.  A model policy M
// supplies templated closed forms (so that parameter gradients come from
// forward-mode dual numbers) and the builder assembles a ModelDefinition.
//
// Policy interface (T is double or Dual<N>):
//   static constexpr int kParams;
//   static const char* name();  static std::vector<std::string> params();
//   template <class T> static std::array<T, 2> flat(const Point& x, const T* p);     // (U1, U2)
//   template <class T> static std::array<T, 2> omegas(const T* p);                   // (omega_+, omega_-)
//   template <class T> static T norm(const T* p);                                    // N of the ground state
//   template <class T> static T phase(const std::array<T, 2>& u, const T* p);        // gauge phase
//   template <class T> static std::array<T, 2> metric_diag(const Point& x, const T* p);
//   static std::string admissibility(Params p);
//   static Region original_region(Params p);
//   static std::optional<CoordinateTransform> transform();  // nullopt: integrate in x
//   static double potential(const Point& x, Params p);
//   static bool has_gauge(); static std::array<double, 2> gauge(const Point& x, Params p);
//   static double frame_potential(const Point& u, Params p);         // V1 in flat coordinates
//   static std::array<double, 2> frame_gauge(const Point& u, Params p); static double frame_gauge_div(...);
//   static double sigma(const Point& x, Params p, int i);
//   static double energy(int np, int nm, Params p);

#include <cmath>
#include <numbers>

#include "qgt/dual.hpp"
#include "qgt/models.hpp"

namespace qgt::detail {

using D4 = Dual<kMaxParams>;

template <class T>
struct Complex {
    T re, im;
};

// Ground state amplitude N exp(-(omega1 (U1^2 + U2^2))/2 - gamma U1 U2) times
// the gauge phase.
template <class M, class T>
Complex<T> ground_value(const Point& x, const T* p, bool normalized) {
    using std::cos, std::exp, std::sin;
    const std::array<T, 2> u = M::template flat<T>(x, p);
    const std::array<T, 2> w = M::template omegas<T>(p);
    const T w1 = 0.5 * (w[0] + w[1]);
    const T g = 0.5 * (w[0] - w[1]);
    T amp = exp(-0.5 * w1 * (u[0] * u[0] + u[1] * u[1]) - g * u[0] * u[1]);
    if (normalized) amp = amp * M::template norm<T>(p);
    // Far out the phase may overflow while the amplitude has underflowed.
    if (value_of(amp) == 0.0) return {T(0.0), T(0.0)};
    const T th = M::template phase<T>(u, p);
    return {amp * cos(th), amp * sin(th)};
}

// Seeds a dual-number parameter vector.
inline std::array<D4, kMaxParams> seed(Params p) {
    std::array<D4, kMaxParams> out{};
    for (std::size_t i = 0; i < p.size() && i < kMaxParams; ++i) out[i] = D4::variable(p[i], i);
    return out;
}

// Wraps a generic closed form f(x, p) -> Complex<T> as a wavefunction whose
// parameter gradient is evaluated with dual numbers.
template <class F>
ParametricWaveFunction wavefunction_from(F f, int nparams, const IntegrationDomain& domain,
                                         std::function<bool(Params)> admissible, std::string label) {
    ParametricWaveFunction psi;
    psi.dim_config = 2;
    psi.dim_params = nparams;
    psi.domain = domain;
    psi.label = std::move(label);
    psi.admissible = std::move(admissible);
    psi.eval = [f](const Point& x, Params p) {
        const Complex<double> v = f(x, p.data());
        return cd(v.re, v.im);
    };
    psi.value_and_gradient = [f, nparams](const Point& x, Params p, std::span<cd> grad) {
        const auto s = seed(p);
        const Complex<D4> v = f(x, s.data());
        for (int i = 0; i < nparams; ++i) grad[i] = cd(v.re.d[i], v.im.d[i]);
        return cd(v.re.v, v.im.v);
    };
    return psi;
}

template <class M>
ParametricWaveFunction make_ground(bool normalized, const IntegrationDomain& domain) {
    return wavefunction_from(
        [normalized](const Point& x, const auto* p) { return ground_value<M>(x, p, normalized); }, M::kParams,
        domain, [](Params p) { return M::admissibility(p).empty(); },
        std::string(M::name()) + (normalized ? " ground state" : " un-normalized ground exponent"));
}

template <class M>
ModelDefinition build_model() {
    ModelDefinition m;
    m.name = M::name();
    m.param_names = M::params();
    m.admissibility = [](Params p) {
        if (p.size() != static_cast<std::size_t>(M::kParams)) {
            return std::string("expected ") + std::to_string(M::kParams) + " parameters";
        }
        for (double v : p) {
            if (!std::isfinite(v)) return std::string("parameters must be finite");
        }
        return M::admissibility(p);
    };

    IntegrationDomain dom;
    dom.dim = 2;
    dom.original = [](Params p) { return M::original_region(p); };
    dom.transform = M::transform();
    dom.kind = dom.transform ? DomainKind::Transformed : DomainKind::FullPlane;

    MetricField& g = m.metric;
    g.dim_config = 2;
    g.dim_params = M::kParams;
    g.domain = dom;
    g.eval = [](const Point& x, Params p) -> MetricMatrix {
        const auto d = M::template metric_diag<double>(x, p.data());
        MetricMatrix out = MetricMatrix::Zero(2, 2);
        out(0, 0) = d[0];
        out(1, 1) = d[1];
        return out;
    };
    g.param_grad = [](const Point& x, Params p, int i) -> MetricMatrix {
        const auto s = seed(p);
        const auto d = M::template metric_diag<D4>(x, s.data());
        MetricMatrix out = MetricMatrix::Zero(2, 2);
        out(0, 0) = d[0].d[i];
        out(1, 1) = d[1].d[i];
        return out;
    };
    g.sigma = [](const Point& x, Params p, int i) { return M::sigma(x, p, i); };

    if (M::has_gauge()) {
        m.gauge_covector = [](const Point& x, Params p) { return M::gauge(x, p); };
    }
    if (dom.transform) {
        FlatFrame fr;
        fr.potential = [](const Point& u, Params p) { return M::frame_potential(u, p); };
        if (M::has_gauge()) {
            fr.gauge = [](const Point& u, Params p) { return M::frame_gauge(u, p); };
            fr.gauge_div = [](const Point& u, Params p) { return M::frame_gauge_div(u, p); };
        }
        m.flat_frame = std::move(fr);
    }
    m.potential = [](const Point& x, Params p) { return M::potential(x, p); };
    m.spectrum = [](Params p) {
        const auto w = M::template omegas<double>(p.data());
        const double w1 = 0.5 * (w[0] + w[1]);
        return SpectrumData{w[0], w[1], w1, w1, 0.5 * (w[0] - w[1]), M::template norm<double>(p.data())};
    };
    m.level_energy = [](int np, int nm, Params p) { return M::energy(np, nm, p); };
    m.normalization = [](Params p) { return M::template norm<double>(p.data()); };
    m.ground = make_ground<M>(true, dom);
    m.unnormalized_ground = make_ground<M>(false, dom);
    m.oscillator_coordinates = [](const Point& x, Params p) {
        const auto u = M::template flat<double>(x, p.data());
        return Point{(u[0] + u[1]) / std::numbers::sqrt2, (u[0] - u[1]) / std::numbers::sqrt2};
    };
    m.eigen_phase = [](const Point& x, Params p) {
        const auto u = M::template flat<double>(x, p.data());
        const double th = M::template phase<double>(u, p.data());
        return cd(std::cos(th), std::sin(th));
    };
    return m;
}

// Shared pieces of the Toda-type policies.
inline double coupled_potential(const Point& u, Params p) {
    const double d = u[0] - u[1];
    return 0.5 * (p[0] * (u[0] * u[0] + u[1] * u[1]) + p[1] * d * d);
}

inline double sqrt_freq_energy(int np, int nm, Params p) {
    return std::sqrt(p[0]) * (np + 0.5) + std::sqrt(p[0] + 2.0 * p[1]) * (nm + 0.5);
}

inline std::string toda_admissibility(Params p) {
    if (!(p[0] > 0.0)) return "k must be positive";
    if (!(p[0] + 2.0 * p[1] > 0.0)) return "k + 2 kappa must be positive";
    if (p[2] == 0.0) return "lambda must be non-zero";
    if (p[3] == 0.0) return "beta must be non-zero";
    return {};
}

}  // namespace qgt::detail
