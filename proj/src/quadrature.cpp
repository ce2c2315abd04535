#include "qgt/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace qgt {

void QuadratureSettings::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(truncation_tail_tol > 0.0)) {
        throw ValidationError("quadrature tolerances must be positive");
    }
    if (max_subdivisions < 1) throw ValidationError("max_subdivisions must be at least 1");
}

namespace {

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights; the
// 7-point Gauss rule uses the odd-indexed nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

constexpr double kScanStep = 0.5;
constexpr double kScanMin = 3.0;
constexpr double kScanMax = 60.0;
constexpr int kScanQuiet = 3;
constexpr double kInitialPanelWidth = 2.0;
constexpr std::size_t kMaxPanels = 4000;

// Map from the whole s-line onto an interval.
struct Mapping {
    enum Kind { Finite, Upper, Lower, Whole } kind;
    double a = 0.0, b = 0.0, scale = 1.0;

    static Mapping for_interval(Interval iv) {
        if (!(iv.lo < iv.hi)) {
            std::ostringstream os;
            os << "integration bounds are not well-ordered: (" << iv.lo << ", " << iv.hi << ")";
            throw ValidationError(os.str());
        }
        const bool lo_inf = std::isinf(iv.lo), hi_inf = std::isinf(iv.hi);
        if (lo_inf && hi_inf) return {Whole, 0.0, 0.0, 1.0};
        if (hi_inf) return {Upper, iv.lo, 0.0, 1.0};
        if (lo_inf) return {Lower, 0.0, iv.hi, 1.0};
        return {Finite, iv.lo, iv.hi, 1.0};
    }

    // Returns false when the node collapses onto an endpoint or overflows.
    bool map(double s, double& u, double& du) const {
        u = du = 0.0;
        switch (kind) {
            case Finite: {
                const double hw = 0.5 * (b - a);
                const double e = std::exp(-2.0 * std::abs(s));
                const double off = hw * 2.0 * e / (1.0 + e);
                u = s < 0.0 ? a + off : b - off;
                du = hw * 4.0 * e / ((1.0 + e) * (1.0 + e));
                if (!(u > a && u < b)) return false;
                break;
            }
            case Upper: {
                const double e = scale * std::exp(s);
                u = a + e;
                du = e;
                if (!(u > a)) return false;
                break;
            }
            case Lower: {
                const double e = scale * std::exp(s);
                u = b - e;
                du = e;
                if (!(u < b)) return false;
                break;
            }
            case Whole:
                u = scale * std::sinh(s);
                du = scale * std::cosh(s);
                break;
        }
        return std::isfinite(u) && std::isfinite(du) && du > 0.0;
    }
};

// Values of the mapped integrand at one s-node: the integrand times du/ds,
// the propagated error of any inner integral, and the absolute magnitude
// used for relative tolerances and tail truncation.
struct Sample {
    std::vector<cd> val;
    std::vector<double> err;
    std::vector<double> mag;
    explicit Sample(std::size_t n) : val(n), err(n), mag(n) {}
    void clear() {
        std::fill(val.begin(), val.end(), cd{});
        std::fill(err.begin(), err.end(), 0.0);
        std::fill(mag.begin(), mag.end(), 0.0);
    }
};

// Writes the mapped integrand at s into the sample; returns whether the inner
// evaluation (if any) converged.
using MappedFunction = std::function<bool(double s, Sample& out)>;

struct Panel {
    double a, b;
    int depth;
    std::vector<cd> val;
    std::vector<double> err, mag, ierr;
    double score = 0.0;
};

struct Adaptive1DResult {
    std::vector<cd> values;
    std::vector<double> errors;  // own + propagated inner + tail
    std::vector<double> magnitudes;
    long evaluations = 0;
    bool converged = true;
};

class Adaptive1D {
public:
    Adaptive1D(std::size_t ncomp, MappedFunction g, const QuadratureSettings& st, double rel_tol, double abs_tol,
               bool split_at_zero)
        : n_(ncomp), g_(std::move(g)), st_(st), rel_tol_(rel_tol), abs_tol_(abs_tol), split_zero_(split_at_zero),
          scratch_(ncomp) {}

    Adaptive1DResult run() {
        Adaptive1DResult res;
        truncate();
        build_initial_panels();
        refine();

        std::sort(panels_.begin(), panels_.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
        res.values.assign(n_, cd{});
        res.errors.assign(n_, 0.0);
        res.magnitudes.assign(n_, 0.0);
        for (const auto& p : panels_) {
            for (std::size_t c = 0; c < n_; ++c) {
                res.values[c] += p.val[c];
                res.errors[c] += p.err[c] + p.ierr[c];
                res.magnitudes[c] += p.mag[c];
            }
        }
        for (std::size_t c = 0; c < n_; ++c) res.errors[c] += tail_err_[c];
        res.evaluations = evaluations_;
        res.converged = converged_ && inner_ok_;
        return res;
    }

private:
    bool eval(double s, Sample& out) {
        out.clear();
        ++evaluations_;
        const bool ok = g_(s, out);
        if (!ok) inner_ok_ = false;
        return ok;
    }

    // Walk outward from s = 0 until every component has been negligible for
    // several consecutive samples relative to its own peak.
    void truncate() {
        peak_.assign(n_, 0.0);
        tail_err_.assign(n_, 0.0);
        std::array<std::vector<std::vector<double>>, 2> history;
        std::array<double, 2> pos{0.0, 0.0};
        Sample smp(n_);
        eval(0.0, smp);
        for (std::size_t c = 0; c < n_; ++c) peak_[c] = smp.mag[c];

        auto quiet = [&](const std::vector<std::vector<double>>& hist) {
            if (hist.size() < static_cast<std::size_t>(kScanQuiet)) return false;
            for (std::size_t k = hist.size() - kScanQuiet; k < hist.size(); ++k) {
                for (std::size_t c = 0; c < n_; ++c) {
                    if (hist[k][c] > st_.truncation_tail_tol * peak_[c]) return false;
                }
            }
            return true;
        };
        auto extend = [&](int side) {
            const double dir = side == 0 ? -1.0 : 1.0;
            while (std::abs(pos[side]) < kScanMax) {
                if (std::abs(pos[side]) >= kScanMin && quiet(history[side])) break;
                pos[side] += dir * kScanStep;
                eval(pos[side], smp);
                for (std::size_t c = 0; c < n_; ++c) peak_[c] = std::max(peak_[c], smp.mag[c]);
                history[side].push_back(smp.mag);
            }
        };
        // Peaks found on one side can invalidate the stopping decision on the
        // other; iterate until both ends are quiet with respect to the final
        // peaks.
        for (int pass = 0; pass < 4; ++pass) {
            extend(1);
            extend(0);
            if ((quiet(history[0]) || std::abs(pos[0]) >= kScanMax) &&
                (quiet(history[1]) || std::abs(pos[1]) >= kScanMax)) {
                break;
            }
        }
        lo_ = pos[0];
        hi_ = pos[1];
        for (int side = 0; side < 2; ++side) {
            if (history[side].empty()) continue;
            const auto& last = history[side].back();
            for (std::size_t c = 0; c < n_; ++c) tail_err_[c] += last[c];
        }
    }

    void build_initial_panels() {
        std::vector<std::pair<double, double>> segments;
        if (split_zero_ && lo_ < 0.0 && hi_ > 0.0) {
            segments = {{lo_, 0.0}, {0.0, hi_}};
        } else {
            segments = {{lo_, hi_}};
        }
        for (auto [a, b] : segments) {
            const int count = std::max(1, static_cast<int>(std::ceil((b - a) / kInitialPanelWidth)));
            const double w = (b - a) / count;
            for (int k = 0; k < count; ++k) {
                const double pa = a + k * w;
                const double pb = (k + 1 == count) ? b : a + (k + 1) * w;
                panels_.push_back(make_panel(pa, pb, 0));
            }
        }
    }

    Panel make_panel(double a, double b, int depth) {
        Panel p{a, b, depth, std::vector<cd>(n_), std::vector<double>(n_), std::vector<double>(n_),
                std::vector<double>(n_)};
        std::vector<cd> gauss(n_);
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        auto accumulate = [&](double s, double wk, double wg) {
            eval(s, scratch_);
            for (std::size_t k = 0; k < n_; ++k) {
                p.val[k] += wk * scratch_.val[k];
                p.mag[k] += wk * scratch_.mag[k];
                p.ierr[k] += wk * scratch_.err[k];
                if (wg != 0.0) gauss[k] += wg * scratch_.val[k];
            }
        };
        accumulate(c, kWgk[7], kWg[3]);
        for (int j = 0; j < 7; ++j) {
            const double wg = (j % 2 == 1) ? kWg[j / 2] : 0.0;
            accumulate(c - h * kXgk[j], kWgk[j], wg);
            accumulate(c + h * kXgk[j], kWgk[j], wg);
        }
        for (std::size_t k = 0; k < n_; ++k) {
            p.val[k] *= h;
            p.mag[k] *= h;
            p.ierr[k] *= h;
            p.err[k] = std::abs(p.val[k] - h * gauss[k]);
        }
        return p;
    }

    void refine() {
        std::vector<double> tol(n_), own(n_), mag(n_);
        while (true) {
            std::fill(own.begin(), own.end(), 0.0);
            std::fill(mag.begin(), mag.end(), 0.0);
            for (const auto& p : panels_) {
                for (std::size_t c = 0; c < n_; ++c) {
                    own[c] += p.err[c];
                    mag[c] += p.mag[c];
                }
            }
            bool done = true;
            for (std::size_t c = 0; c < n_; ++c) {
                tol[c] = std::max(abs_tol_, rel_tol_ * mag[c]);
                if (own[c] + tail_err_[c] > tol[c]) done = false;
            }
            if (done) return;

            std::size_t worst = panels_.size();
            double worst_score = 0.0;
            for (std::size_t q = 0; q < panels_.size(); ++q) {
                if (panels_[q].depth >= st_.max_subdivisions) continue;
                double score = 0.0;
                for (std::size_t c = 0; c < n_; ++c) score = std::max(score, panels_[q].err[c] / tol[c]);
                if (score > worst_score) {
                    worst_score = score;
                    worst = q;
                }
            }
            if (worst == panels_.size() || panels_.size() >= kMaxPanels) {
                converged_ = false;
                return;
            }
            // Tail truncation error cannot be reduced by splitting; if the
            // panels alone satisfy the tolerance we are as good as we get.
            bool panels_ok = true;
            for (std::size_t c = 0; c < n_; ++c) {
                if (own[c] > tol[c]) panels_ok = false;
            }
            if (panels_ok) {
                converged_ = false;
                return;
            }
            const Panel p = std::move(panels_[worst]);
            const double mid = 0.5 * (p.a + p.b);
            panels_[worst] = make_panel(p.a, mid, p.depth + 1);
            panels_.push_back(make_panel(mid, p.b, p.depth + 1));
        }
    }

    std::size_t n_;
    MappedFunction g_;
    const QuadratureSettings& st_;
    double rel_tol_, abs_tol_;
    bool split_zero_;
    Sample scratch_;
    std::vector<Panel> panels_;
    std::vector<double> peak_, tail_err_;
    double lo_ = 0.0, hi_ = 0.0;
    long evaluations_ = 0;
    bool converged_ = true;
    bool inner_ok_ = true;
};

void check_finite(std::span<const cd> v, const Point& x) {
    for (const cd& z : v) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            std::ostringstream os;
            os.precision(17);
            os << "integrand returned a non-finite value at (" << x[0] << ", " << x[1] << ")";
            throw EvaluationError(os.str());
        }
    }
}

Adaptive1DResult integrate_line(std::size_t ncomp, Interval iv, const QuadratureSettings& st, double rel_tol,
                                double abs_tol, const std::function<void(double u, std::span<cd>)>& f,
                                const std::function<Point(double)>& as_point) {
    const Mapping m = Mapping::for_interval(iv);
    std::vector<cd> buf(ncomp);
    MappedFunction g = [&](double s, Sample& out) {
        double u = 0.0, du = 0.0;
        if (!m.map(s, u, du)) return true;
        std::fill(buf.begin(), buf.end(), cd{});
        f(u, buf);
        check_finite(buf, as_point(u));
        for (std::size_t c = 0; c < ncomp; ++c) {
            out.val[c] = buf[c] * du;
            out.mag[c] = std::abs(out.val[c]);
        }
        return true;
    };
    return Adaptive1D(ncomp, g, st, rel_tol, abs_tol, m.kind == Mapping::Whole).run();
}

[[noreturn]] void throw_convergence(const Adaptive1DResult& r) {
    throw ConvergenceError("quadrature tolerance not reached within max_subdivisions", r.values, r.errors);
}

}  // namespace

VectorIntegralResult integrate_vector(std::size_t ncomp, const VectorIntegrand& f, const Region& region,
                                      const QuadratureSettings& settings) {
    settings.validate();
    Adaptive1DResult r;
    if (region.dim == 1) {
        r = integrate_line(
            ncomp, region.outer, settings, settings.rel_tol, settings.abs_tol,
            [&](double u, std::span<cd> out) { f(Point{u, 0.0}, out); },
            [](double u) { return Point{u, 0.0}; });
    } else {
        const Mapping outer = Mapping::for_interval(region.outer);
        // Inner integrals are held to tighter tolerances so that their
        // propagated error stays below the outer tolerance.
        const double inner_rel = 0.5 * settings.rel_tol;
        const double inner_abs = 0.1 * settings.abs_tol;
        long inner_evaluations = 0;
        MappedFunction g = [&](double s, Sample& out) {
            double u = 0.0, du = 0.0;
            if (!outer.map(s, u, du)) return true;
            const Interval iv = region.inner_at(u);
            if (!(iv.lo < iv.hi)) return true;
            Adaptive1DResult in = integrate_line(
                ncomp, iv, settings, inner_rel, inner_abs,
                [&](double v, std::span<cd> o) { f(Point{u, v}, o); },
                [u](double v) { return Point{u, v}; });
            for (std::size_t c = 0; c < ncomp; ++c) {
                out.val[c] = in.values[c] * du;
                out.err[c] = in.errors[c] * du;
                out.mag[c] = in.magnitudes[c] * du;
            }
            inner_evaluations += in.evaluations;
            return in.converged;
        };
        r = Adaptive1D(ncomp, g, settings, settings.rel_tol, settings.abs_tol, outer.kind == Mapping::Whole).run();
        r.evaluations = inner_evaluations;
    }
    if (!r.converged) throw_convergence(r);
    return {std::move(r.values), std::move(r.errors), std::move(r.magnitudes), r.evaluations};
}

IntegralResult integrate_1d(const std::function<cd(double)>& f, Interval interval,
                            const QuadratureSettings& settings) {
    Region r;
    r.dim = 1;
    r.outer = interval;
    return integrate_vector(
               1, [&](const Point& x, std::span<cd> out) { out[0] = f(x[0]); }, r, settings)
        .component(0);
}

IntegralResult integrate_2d(const std::function<cd(const Point&)>& f, const Region& region,
                            const QuadratureSettings& settings) {
    return integrate_vector(
               1, [&](const Point& x, std::span<cd> out) { out[0] = f(x); }, region, settings)
        .component(0);
}

IntegralResult integrate_2d(const std::function<cd(const Point&)>& f, const IntegrationDomain& domain, Params lam,
                            const QuadratureSettings& settings) {
    return integrate_2d(f, domain.original(lam), settings);
}

VectorIntegralResult integrate_curved(std::size_t ncomp, const VectorIntegrand& f, const MetricField& metric,
                                      Params lam, const QuadratureSettings& settings, Coordinates coords) {
    const IntegrationDomain& dom = metric.domain;
    if (dom.transform && coords == Coordinates::Automatic) {
        const CoordinateTransform& t = *dom.transform;
        const Region region = t.region(lam);
        return integrate_vector(
            ncomp,
            [&](const Point& u, std::span<cd> out) {
                const Point x = t.to_original(u, lam);
                const double w = t.multiplicity * sqrt_det(metric, x, lam) * t.jacobian(u, lam);
                f(x, out);
                for (auto& z : out) z *= w;
            },
            region, settings);
    }
    const Region region = dom.original(lam);
    return integrate_vector(
        ncomp,
        [&](const Point& x, std::span<cd> out) {
            const double w = sqrt_det(metric, x, lam);
            f(x, out);
            for (auto& z : out) z *= w;
        },
        region, settings);
}

VectorIntegralResult integrate_flat(std::size_t ncomp, const VectorIntegrand& f, const IntegrationDomain& domain,
                                    Params lam, const QuadratureSettings& settings) {
    return integrate_vector(ncomp, f, domain.original(lam), settings);
}

IntegralResult inner_product(const ParametricWaveFunction& phi, const ParametricWaveFunction& psi,
                             const MetricField& metric, Params lam, const QuadratureSettings& settings) {
    return integrate_curved(
               1,
               [&](const Point& x, std::span<cd> out) { out[0] = std::conj(phi.eval(x, lam)) * psi.eval(x, lam); },
               metric, lam, settings)
        .component(0);
}

}  // namespace qgt
