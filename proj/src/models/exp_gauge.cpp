// Exponential oscillator coupled to a generalized oscillator through a
// velocity-linear (minimally coupled) term.
//
//   g = diag(x^2, lambda^2 e^{-2 lambda y}),  x > 0
//   q1 = x^2 / 2, q2 = e^{-lambda y}
//   F = (Y x^3 / 2, -Y lambda e^{-2 lambda y})   (F_q = Y q, a pure gauge)
//   H = (p + F) g^{-1} (p + F) / 2 + V1
//   V1 = (alpha + alpha' - 2 Y^2)/4 (q1^2 + q2^2) + (alpha - alpha')/2 q1 q2
//   alpha  = k^2 + (1 - 2k) Y^2 + Y^4              = (k - Y^2)^2 + Y^2
//   alpha' = (k+2kappa)^2 + (1 - 2(k+2kappa)) Y^2 + Y^4
//
// Removing the gauge phase exp(-i Y (q1^2 + q2^2)/2) leaves oscillators with
// omega_+ = k - Y^2 and omega_- = k + 2 kappa - Y^2.

#include <limits>

#include "oscillator_model.hpp"

namespace qgt::detail {

using std::atan, std::exp, std::sqrt;

struct ExpGaugePolicy {
    static constexpr int kParams = 4;
    static const char* name() { return "exp-gauge"; }
    static std::vector<std::string> params() { return {"k", "kappa", "lambda", "Y"}; }

    template <class T>
    static std::array<T, 2> flat(const Point& x, const T*p) {
        return {T(0.5 * x[0] * x[0]), exp(-p[2] * x[1])};
    }
    template <class T>
    static std::array<T, 2> omegas(const T* p) {
        const T y2 = p[3] * p[3];
        return {p[0] - y2, p[0] + 2.0 * p[1] - y2};
    }
    template <class T>
    static T norm(const T* p) {
        const auto w = omegas<T>(p);
        return sqrt(sqrt(w[0] * w[1]) / atan(sqrt(w[1] / w[0])));
    }
    template <class T>
    static T phase(const std::array<T, 2>& u, const T* p) {
        return -0.5 * p[3] * (u[0] * u[0] + u[1] * u[1]);
    }
    template <class T>
    static std::array<T, 2> metric_diag(const Point& x, const T* p) {
        return {T(x[0] * x[0]), p[2] * p[2] * exp(-2.0 * p[2] * x[1])};
    }
    static std::string admissibility(Params p) {
        const double y2 = p[3] * p[3];
        if (!(p[0] > y2)) return "k must exceed Y^2";
        if (!(p[0] + 2.0 * p[1] > y2)) return "k + 2 kappa must exceed Y^2";
        if (p[2] == 0.0) return "lambda must be non-zero";
        return {};
    }

    static Region original_region(Params) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        Region r;
        r.outer = {0.0, inf};
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
        t.to_original = [](const Point& q, Params p) { return Point{std::sqrt(2.0 * q[0]), -std::log(q[1]) / p[2]}; };
        t.from_original = [](const Point& x, Params p) {
            return Point{0.5 * x[0] * x[0], std::exp(-p[2] * x[1])};
        };
        t.jacobian = [](const Point& q, Params p) {
            return 1.0 / (std::sqrt(2.0 * q[0]) * std::abs(p[2]) * q[1]);
        };
        t.multiplicity = 1.0;
        return t;
    }
    static double alpha(double k, double y) { return k * k + (1.0 - 2.0 * k) * y * y + y * y * y * y; }
    static double potential(const Point& x, Params p) {
        const auto q = flat<double>(x, p.data());
        return frame_potential({q[0], q[1]}, p);
    }
    static double frame_potential(const Point& q, Params p) {
        const double a = alpha(p[0], p[3]);
        const double ap = alpha(p[0] + 2.0 * p[1], p[3]);
        const double y2 = p[3] * p[3];
        return 0.25 * (a + ap - 2.0 * y2) * (q[0] * q[0] + q[1] * q[1]) + 0.5 * (a - ap) * q[0] * q[1];
    }
    static bool has_gauge() { return true; }
    static std::array<double, 2> gauge(const Point& x, Params p) {
        return {0.5 * p[3] * x[0] * x[0] * x[0], -p[3] * p[2] * std::exp(-2.0 * p[2] * x[1])};
    }
    static std::array<double, 2> frame_gauge(const Point& q, Params p) { return {p[3] * q[0], p[3] * q[1]}; }
    static double frame_gauge_div(const Point&, Params p) { return 2.0 * p[3]; }
    static double sigma(const Point& x, Params p, int i) {
        if (i == 2) return 2.0 * (x[1] - 1.0 / p[2]);
        return 0.0;
    }
    static double energy(int np, int nm, Params p) {
        const auto w = omegas<double>(p.data());
        return w[0] * (np + 0.5) + w[1] * (nm + 0.5);
    }
};

}  // namespace qgt::detail

namespace qgt {

const ModelDefinition& exp_gauge() {
    static const ModelDefinition m = [] {
        ModelDefinition d = detail::build_model<detail::ExpGaugePolicy>();
        d.transforms = {"q1 = x^2/2", "q2 = exp(-lambda y)", "q_pm = (q1 pm q2)/sqrt(2)"};
        return d;
    }();
    return m;
}

}  // namespace qgt
