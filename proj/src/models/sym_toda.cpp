// Two Toda oscillators coupled symmetrically.
//
//   g = diag(lambda^2 e^{-2 lambda x}, beta^2 e^{-2 beta y})
//   U1 = e^{-lambda x}, U2 = e^{-beta y}   (flat: dU1^2 + dU2^2 = g)
//   V1 = [k (U1^2 + U2^2) + kappa (U1 - U2)^2] / 2
//   omega_+^2 = k, omega_-^2 = k + 2 kappa
//
// U1, U2 > 0, so the oscillator lives on a quarter plane (a wedge in U_pm).
// The exponent uses U1 = e^{-lambda x}; with e^{+lambda x} the state would
// not be normalizable on the original plane.

#include <limits>
#include <numbers>

#include "oscillator_model.hpp"

namespace qgt::detail {

using std::atan, std::exp, std::sqrt;

struct SymTodaPolicy {
    static constexpr int kParams = 4;
    static const char* name() { return "sym-toda"; }
    static std::vector<std::string> params() { return {"k", "kappa", "lambda", "beta"}; }

    template <class T>
    static std::array<T, 2> flat(const Point& x, const T* p) {
        return {exp(-p[2] * x[0]), exp(-p[3] * x[1])};
    }
    template <class T>
    static std::array<T, 2> omegas(const T* p) {
        return {sqrt(p[0]), sqrt(p[0] + 2.0 * p[1])};
    }
    // N0^2 = sqrt(omega_+ omega_-) / arctan(sqrt(omega_- / omega_+)).
    template <class T>
    static T norm(const T* p) {
        const auto w = omegas<T>(p);
        return sqrt(sqrt(w[0] * w[1]) / atan(sqrt(w[1] / w[0])));
    }
    template <class T>
    static T phase(const std::array<T, 2>&, const T*) {
        return T(0.0);
    }
    template <class T>
    static std::array<T, 2> metric_diag(const Point& x, const T* p) {
        return {p[2] * p[2] * exp(-2.0 * p[2] * x[0]), p[3] * p[3] * exp(-2.0 * p[3] * x[1])};
    }
    static std::string admissibility(Params p) { return toda_admissibility(p); }

    static Region original_region(Params) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        Region r;
        r.outer = {-inf, inf};
        r.inner = {-inf, inf};
        return r;
    }
    static std::optional<CoordinateTransform> transform() {
        constexpr double inf = std::numeric_limits<double>::infinity();
        CoordinateTransform t;
        t.region = [](Params) {
            Region r;
            r.outer = {0.0, inf};
            r.inner = {0.0, inf};
            return r;
        };
        t.to_original = [](const Point& u, Params p) { return Point{-std::log(u[0]) / p[2], -std::log(u[1]) / p[3]}; };
        t.from_original = [](const Point& x, Params p) { return Point{std::exp(-p[2] * x[0]), std::exp(-p[3] * x[1])}; };
        t.jacobian = [](const Point& u, Params p) { return 1.0 / (std::abs(p[2] * p[3]) * u[0] * u[1]); };
        t.multiplicity = 1.0;
        return t;
    }
    static double frame_potential(const Point& u, Params p) { return coupled_potential(u, p); }
    static double potential(const Point& x, Params p) {
        const auto u = flat<double>(x, p.data());
        return frame_potential({u[0], u[1]}, p);
    }
    static bool has_gauge() { return false; }
    static std::array<double, 2> gauge(const Point&, Params) { return {0.0, 0.0}; }
    static std::array<double, 2> frame_gauge(const Point&, Params) { return {0.0, 0.0}; }
    static double frame_gauge_div(const Point&, Params) { return 0.0; }
    static double sigma(const Point& x, Params p, int i) {
        if (i == 2) return -2.0 / p[2] + 2.0 * x[0];
        if (i == 3) return -2.0 / p[3] + 2.0 * x[1];
        return 0.0;
    }
    static double energy(int np, int nm, Params p) { return sqrt_freq_energy(np, nm, p); }
};

// Normalizations of the truncated coupling expansions (omega1 = omega2).
template <class T>
T perturbative_norm(int order, const T* p) {
    const auto w = SymTodaPolicy::omegas<T>(p);
    const T w1 = 0.5 * (w[0] + w[1]);
    const T g = 0.5 * (w[0] - w[1]);
    const double pi = std::numbers::pi;
    if (order == 1) {
        return 4.0 * sqrt(w1 * w1 * w1 / (pi * g * g - 8.0 * g * w1 + 4.0 * pi * w1 * w1));
    }
    const T g2 = g * g;
    const T w2 = w1 * w1;
    const T den = 9.0 * pi * g2 * g2 - 64.0 * g2 * g * w1 + 32.0 * pi * g2 * w2 - 128.0 * g * w2 * w1 +
                  64.0 * pi * w2 * w2;
    return 16.0 * sqrt(w2 * w2 * w1 / den);
}

template <class T>
Complex<T> perturbative_value(const Point& x, const T* p, int order) {
    const auto u = SymTodaPolicy::flat<T>(x, p);
    const auto w = SymTodaPolicy::omegas<T>(p);
    const T w1 = 0.5 * (w[0] + w[1]);
    const T g = 0.5 * (w[0] - w[1]);
    const T c = g * u[0] * u[1];
    T series = 1.0 - c;
    if (order == 2) series = series + 0.5 * c * c;
    const T amp = perturbative_norm<T>(order, p) * exp(-0.5 * w1 * (u[0] * u[0] + u[1] * u[1])) * series;
    return {amp, T(0.0)};
}

}  // namespace qgt::detail

namespace qgt {

const ModelDefinition& sym_toda() {
    static const ModelDefinition m = [] {
        ModelDefinition d = detail::build_model<detail::SymTodaPolicy>();
        d.transforms = {"U1 = exp(-lambda x)", "U2 = exp(-beta y)", "U_pm = (U1 pm U2)/sqrt(2)"};
        d.has_perturbative_states = true;
        return d;
    }();
    return m;
}

double perturbative_normalization(int order, Params lam) {
    if (order != 1 && order != 2) throw ValidationError("perturbative order must be 1 or 2");
    sym_toda().require_admissible(lam);
    return detail::perturbative_norm<double>(order, lam.data());
}

ParametricWaveFunction perturbative_ground_state(const ModelDefinition& model, int order, Params lam) {
    if (!model.has_perturbative_states) {
        throw ValidationError("perturbative ground states are only defined for sym-toda");
    }
    if (order != 1 && order != 2) throw ValidationError("perturbative order must be 1 or 2");
    model.require_admissible(lam);
    return detail::wavefunction_from(
        [order](const Point& x, const auto* p) { return detail::perturbative_value(x, p, order); }, 4,
        model.metric.domain, [](Params p) { return detail::toda_admissibility(p).empty(); },
        "sym-toda order-" + std::to_string(order) + " ground state");
}

}  // namespace qgt
