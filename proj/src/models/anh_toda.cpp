// Anharmonic oscillator coupled to a Toda oscillator.
//
//   g = diag(4 lambda^2 x^2, beta^2 e^{-2 beta y})
//   U1 = lambda x^2, U2 = e^{-beta y}
//
// Same oscillator as sym-toda in (U1, U2).  The map x -> U1 is two-to-one, so
// transformed integrals carry a factor 2, and U1 has the sign of lambda.
// For lambda > 0 the state lives on the first quadrant and
//   N^2 = sqrt(omega_+ omega_-) / (2 arctan(sqrt(omega_- / omega_+)));
// for lambda < 0 on the second quadrant, where the coupling term changes
// sign and arctan(sqrt(omega_+ / omega_-)) appears instead.

#include <limits>

#include "oscillator_model.hpp"

namespace qgt::detail {

using std::atan, std::exp, std::sqrt;

struct AnhTodaPolicy {
    static constexpr int kParams = 4;
    static const char* name() { return "anh-toda"; }
    static std::vector<std::string> params() { return {"k", "kappa", "lambda", "beta"}; }

    template <class T>
    static std::array<T, 2> flat(const Point& x, const T* p) {
        return {p[2] * (x[0] * x[0]), exp(-p[3] * x[1])};
    }
    template <class T>
    static std::array<T, 2> omegas(const T* p) {
        return {sqrt(p[0]), sqrt(p[0] + 2.0 * p[1])};
    }
    template <class T>
    static T norm(const T* p) {
        const auto w = omegas<T>(p);
        const T ratio = value_of(p[2]) > 0.0 ? w[1] / w[0] : w[0] / w[1];
        return sqrt(sqrt(w[0] * w[1]) / (2.0 * atan(sqrt(ratio))));
    }
    template <class T>
    static T phase(const std::array<T, 2>&, const T*) {
        return T(0.0);
    }
    template <class T>
    static std::array<T, 2> metric_diag(const Point& x, const T* p) {
        return {4.0 * p[2] * p[2] * (x[0] * x[0]), p[3] * p[3] * exp(-2.0 * p[3] * x[1])};
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
        t.region = [](Params p) {
            Region r;
            r.outer = p[2] > 0.0 ? Interval{0.0, inf} : Interval{-inf, 0.0};
            r.inner = {0.0, inf};
            return r;
        };
        // Positive x-branch; the negative branch is accounted for by the multiplicity.
        t.to_original = [](const Point& u, Params p) {
            return Point{std::sqrt(u[0] / p[2]), -std::log(u[1]) / p[3]};
        };
        t.from_original = [](const Point& x, Params p) {
            return Point{p[2] * x[0] * x[0], std::exp(-p[3] * x[1])};
        };
        t.jacobian = [](const Point& u, Params p) {
            const double x = std::sqrt(u[0] / p[2]);
            return 1.0 / (2.0 * std::abs(p[2]) * x * std::abs(p[3]) * u[1]);
        };
        t.multiplicity = 2.0;
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
        if (i == 2) return -2.0 / p[2];
        if (i == 3) return -2.0 / p[3] + 2.0 * x[1];
        return 0.0;
    }
    static double energy(int np, int nm, Params p) { return sqrt_freq_energy(np, nm, p); }
};

}  // namespace qgt::detail

namespace qgt {

const ModelDefinition& anh_toda() {
    static const ModelDefinition m = [] {
        ModelDefinition d = detail::build_model<detail::AnhTodaPolicy>();
        d.transforms = {"U1 = lambda x^2", "U2 = exp(-beta y)", "U_pm = (U1 pm U2)/sqrt(2)"};
        return d;
    }();
    return m;
}

}  // namespace qgt
