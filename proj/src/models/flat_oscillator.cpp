// Two harmonic oscillators with a quadratic coupling in flat space:
//   V = [k (x1^2 + x2^2) + kappa (x1 - x2)^2] / 2.
// The metric is the identity, so every curved-space correction vanishes; this
// is the benchmark on which the generalized formulas must reduce to the
// standard ones.

#include <limits>
#include <numbers>

#include "oscillator_model.hpp"

namespace qgt::detail {

using std::exp, std::sqrt;

struct FlatOscillatorPolicy {
    static constexpr int kParams = 2;
    static const char* name() { return "flat-osc"; }
    static std::vector<std::string> params() { return {"k", "kappa"}; }

    template <class T>
    static std::array<T, 2> flat(const Point& x, const T*) {
        return {T(x[0]), T(x[1])};
    }
    template <class T>
    static std::array<T, 2> omegas(const T* p) {
        return {sqrt(p[0]), sqrt(p[0] + 2.0 * p[1])};
    }
    template <class T>
    static T norm(const T* p) {
        const auto w = omegas<T>(p);
        return sqrt(sqrt(w[0] * w[1]) / std::numbers::pi);
    }
    template <class T>
    static T phase(const std::array<T, 2>&, const T*) {
        return T(0.0);
    }
    template <class T>
    static std::array<T, 2> metric_diag(const Point&, const T*) {
        return {T(1.0), T(1.0)};
    }
    static std::string admissibility(Params p) {
        if (!(p[0] > 0.0)) return "k must be positive";
        if (!(p[0] + 2.0 * p[1] > 0.0)) return "k + 2 kappa must be positive";
        return {};
    }
    static Region original_region(Params) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        Region r;
        r.outer = {-inf, inf};
        r.inner = {-inf, inf};
        return r;
    }
    static std::optional<CoordinateTransform> transform() { return std::nullopt; }
    static double potential(const Point& x, Params p) { return coupled_potential(x, p); }
    static double frame_potential(const Point& u, Params p) { return coupled_potential(u, p); }
    static bool has_gauge() { return false; }
    static std::array<double, 2> gauge(const Point&, Params) { return {0.0, 0.0}; }
    static std::array<double, 2> frame_gauge(const Point&, Params) { return {0.0, 0.0}; }
    static double frame_gauge_div(const Point&, Params) { return 0.0; }
    static double sigma(const Point&, Params, int) { return 0.0; }
    static double energy(int np, int nm, Params p) { return sqrt_freq_energy(np, nm, p); }
};

}  // namespace qgt::detail

namespace qgt {

const ModelDefinition& flat_oscillator() {
    static const ModelDefinition m = [] {
        ModelDefinition d = detail::build_model<detail::FlatOscillatorPolicy>();
        d.transforms = {"x_pm = (x1 pm x2)/sqrt(2)"};
        return d;
    }();
    return m;
}

}  // namespace qgt
