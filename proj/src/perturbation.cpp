#include "qgt/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "qgt/geometry.hpp"
#include "qgt/states.hpp"

namespace qgt {

namespace {

// Quadratures with many components are split so that no single adaptive
// integration carries more than this many.
constexpr std::size_t kMaxComponents = 4096;

// Evaluates every basis state at a point from one pair of Hermite recurrences.
class BasisEvaluator {
public:
    BasisEvaluator(const BasisSet& basis)
        : model_(*basis.model), lam_(basis.params), spec_(model_.spectrum(lam_)), states_(&basis.states) {
        for (const BasisState& s : basis.states) {
            max_plus_ = std::max(max_plus_, s.n_plus);
            max_minus_ = std::max(max_minus_, s.n_minus);
        }
    }

    void eval(const Point& x, std::span<cd> out, std::size_t begin = 0) const {
        const Point u = model_.oscillator_coordinates(x, lam_);
        std::array<double, 64> hp{}, hm{};
        hermite_functions(spec_.omega_plus, u[0], std::span<double>(hp.data(), max_plus_ + 1));
        hermite_functions(spec_.omega_minus, u[1], std::span<double>(hm.data(), max_minus_ + 1));
        if (hp[0] == 0.0 || hm[0] == 0.0) {
            // Beyond the Gaussian's range; the phase may not even be finite there.
            std::fill(out.begin(), out.end(), cd(0.0));
            return;
        }
        const cd phase = model_.eigen_phase(x, lam_);
        for (std::size_t c = 0; c < out.size(); ++c) {
            const BasisState& s = (*states_)[begin + c];
            out[c] = s.scale * phase * (hp[s.n_plus] * hm[s.n_minus]);
        }
    }

private:
    const ModelDefinition& model_;
    ParamVector lam_;
    SpectrumData spec_;
    const std::vector<BasisState>* states_;
    int max_plus_ = 0;
    int max_minus_ = 0;
};

// Concatenates integrate_curved over component ranges [begin, end).
VectorIntegralResult integrate_chunked(std::size_t ncomp,
                                       const std::function<void(const Point&, std::size_t, std::span<cd>)>& f,
                                       const MetricField& metric, Params lam, const QuadratureSettings& settings) {
    VectorIntegralResult all;
    all.values.reserve(ncomp);
    for (std::size_t begin = 0; begin < ncomp; begin += kMaxComponents) {
        const std::size_t n = std::min(kMaxComponents, ncomp - begin);
        const VectorIntegralResult part = integrate_curved(
            n, [&](const Point& x, std::span<cd> out) { f(x, begin, out); }, metric, lam, settings);
        all.values.insert(all.values.end(), part.values.begin(), part.values.end());
        all.errors.insert(all.errors.end(), part.errors.begin(), part.errors.end());
        all.magnitudes.insert(all.magnitudes.end(), part.magnitudes.begin(), part.magnitudes.end());
        all.evaluations += part.evaluations;
    }
    return all;
}

// Upper-triangle overlaps of the functions produced by `eval`, as a Hermitian matrix.
Eigen::MatrixXcd overlap_matrix(std::size_t K, const std::function<void(const Point&, std::span<cd>)>& eval,
                                const MetricField& metric, Params lam, const QuadratureSettings& settings,
                                double& max_error) {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = k; l < K; ++l) pairs.emplace_back(static_cast<int>(k), static_cast<int>(l));
    }
    std::vector<cd> phi(K);
    const VectorIntegralResult res = integrate_chunked(
        pairs.size(),
        [&](const Point& x, std::size_t begin, std::span<cd> out) {
            eval(x, phi);
            for (std::size_t c = 0; c < out.size(); ++c) {
                const auto [k, l] = pairs[begin + c];
                out[c] = std::conj(phi[k]) * phi[l];
            }
        },
        metric, lam, settings);
    Eigen::MatrixXcd S(K, K);
    max_error = 0.0;
    for (std::size_t c = 0; c < pairs.size(); ++c) {
        const auto [k, l] = pairs[c];
        S(k, l) = res.values[c];
        S(l, k) = std::conj(res.values[c]);
        max_error = std::max(max_error, res.errors[c]);
    }
    for (std::size_t k = 0; k < K; ++k) S(k, k) = S(k, k).real();
    return S;
}

// Gram matrix through the product form of the basis.  When the oscillator
// coordinates are the 45-degree rotation of coordinates U in which the curved
// measure is dU1 dU2 (times the transform's multiplicity), a rectangle in U
// becomes the wedge
//   U_+ in ((a1 + a2)/sqrt2, (b1 + b2)/sqrt2),
//   U_- in (max(sqrt2 a1 - U_+, U_+ - sqrt2 b2), min(sqrt2 b1 - U_+, U_+ - sqrt2 a2)),
// and <k|l> = \int dU_+ chi_a chi_c(U_+) J_bd(U_+) with inner integrals
// J_bd = \int dU_- chi_b chi_d over the wedge.  The common gauge phase drops
// out.  Returns nothing when the structure does not hold.
std::optional<Eigen::MatrixXcd> separable_gram(const BasisSet& b, const QuadratureSettings& settings,
                                               double& max_error) {
    const ModelDefinition& model = *b.model;
    const IntegrationDomain& dom = model.metric.domain;
    const Params lam = b.params;
    if (model.metric.dim_config != 2) return std::nullopt;
    const Region region = dom.transform ? dom.transform->region(lam) : dom.original(lam);
    if (region.dim != 2 || region.inner_bounds) return std::nullopt;
    const double mult = dom.transform ? dom.transform->multiplicity : 1.0;

    const double r2 = std::sqrt(2.0);
    for (const Point& x : interior_samples(model, lam, 8, 7)) {
        const Point u = dom.transform ? dom.transform->from_original(x, lam) : x;
        const Point osc = model.oscillator_coordinates(x, lam);
        const double w = sqrt_det(model.metric, x, lam) * (dom.transform ? dom.transform->jacobian(u, lam) : 1.0);
        const double scale = 1.0 + std::abs(osc[0]) + std::abs(osc[1]);
        if (std::abs(osc[0] - (u[0] + u[1]) / r2) > 1e-10 * scale ||
            std::abs(osc[1] - (u[0] - u[1]) / r2) > 1e-10 * scale || std::abs(w - 1.0) > 1e-10) {
            return std::nullopt;
        }
    }

    const SpectrumData spec = model.spectrum(lam);
    int max_plus = 0, max_minus = 0;
    for (const BasisState& st : b.states) {
        max_plus = std::max(max_plus, st.n_plus);
        max_minus = std::max(max_minus, st.n_minus);
    }
    const int nm = max_minus + 1;
    auto pair_index = [nm](int p, int q) { return p <= q ? p * nm + q : q * nm + p; };
    const double a1 = region.outer.lo, b1 = region.outer.hi, a2 = region.inner.lo, b2 = region.inner.hi;

    QuadratureSettings inner_settings = settings;
    inner_settings.rel_tol *= 0.1;
    inner_settings.abs_tol *= 0.1;

    const std::size_t K = b.size();
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = k; l < K; ++l) pairs.emplace_back(static_cast<int>(k), static_cast<int>(l));
    }
    std::vector<double> hp(max_plus + 1), hm(nm);
    std::vector<cd> J(static_cast<std::size_t>(nm) * nm);
    Region outer;
    outer.dim = 1;
    outer.outer = {(a1 + a2) / r2, (b1 + b2) / r2};
    const VectorIntegralResult res = integrate_vector(
        pairs.size(),
        [&](const Point& p, std::span<cd> out) {
            const double up = p[0];
            Region inner;
            inner.dim = 1;
            inner.outer = {std::max(r2 * a1 - up, up - r2 * b2), std::min(r2 * b1 - up, up - r2 * a2)};
            std::fill(J.begin(), J.end(), cd(0.0));
            if (inner.outer.lo < inner.outer.hi) {
                const VectorIntegralResult in = integrate_vector(
                    J.size(),
                    [&](const Point& m, std::span<cd> o) {
                        hermite_functions(spec.omega_minus, m[0], hm);
                        for (int q1 = 0; q1 < nm; ++q1) {
                            for (int q2 = q1; q2 < nm; ++q2) o[q1 * nm + q2] = hm[q1] * hm[q2];
                        }
                    },
                    inner, inner_settings);
                J = in.values;
            }
            hermite_functions(spec.omega_plus, up, hp);
            for (std::size_t c = 0; c < out.size(); ++c) {
                const BasisState& sk = b.states[pairs[c].first];
                const BasisState& sl = b.states[pairs[c].second];
                out[c] = hp[sk.n_plus] * hp[sl.n_plus] * J[pair_index(sk.n_minus, sl.n_minus)];
            }
        },
        outer, settings);

    Eigen::MatrixXcd S(K, K);
    max_error = 0.0;
    for (std::size_t c = 0; c < pairs.size(); ++c) {
        const auto [k, l] = pairs[c];
        const double v = mult * res.values[c].real();
        S(k, l) = S(l, k) = v;
        max_error = std::max(max_error, mult * res.errors[c]);
    }
    // Inner integrals are held to a tenth of the tolerance; account for them.
    max_error += 0.1 * settings.rel_tol * mult;
    return S;
}

Eigen::MatrixXcd orthonormal_coefficients(const Eigen::MatrixXcd& gram) {
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw InvariantViolation("Gram matrix is not positive definite; the basis is numerically dependent");
    }
    // S = L L^dagger, so C = L^{-dagger} gives C^dagger S C = 1 and is upper
    // triangular: column m only mixes states 0..m, as Gram-Schmidt would.
    const Eigen::MatrixXcd Linv =
        llt.matrixL().solve(Eigen::MatrixXcd::Identity(gram.rows(), gram.cols()));
    return Linv.adjoint();
}

Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& S, double cutoff) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (ev[k] > cutoff * top) inv[k] = 1.0 / ev[k];
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

ParamVector shifted_params(Params lam, int i, double d) {
    ParamVector p(lam.begin(), lam.end());
    p[i] += d;
    return p;
}

// Combination sum_k w_k C_k of coefficient sets; the Hamiltonian is linear in them.
HamiltonianCoefficients combine(std::span<const HamiltonianCoefficients> cs, std::span<const double> w) {
    HamiltonianCoefficients out = cs[0];
    out.ginv.setZero();
    out.drift = {};
    out.gauge_up = {};
    out.gauge_div = out.gauge_sq = out.potential = 0.0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
        out.ginv += w[k] * cs[k].ginv;
        for (int mu = 0; mu < out.dim; ++mu) {
            out.drift[mu] += w[k] * cs[k].drift[mu];
            out.gauge_up[mu] += w[k] * cs[k].gauge_up[mu];
        }
        out.gauge_div += w[k] * cs[k].gauge_div;
        out.gauge_sq += w[k] * cs[k].gauge_sq;
        out.potential += w[k] * cs[k].potential;
        out.gauge = out.gauge || cs[k].gauge;
        out.mixed = out.mixed || cs[k].mixed;
    }
    return out;
}

// Richardson weights of the central difference at offsets +d, -d, +d/2, -d/2.
std::array<double, 4> richardson_weights(double d) {
    const double w1 = 1.0 / (2.0 * d), w2 = 1.0 / d;
    return {-w1 / 3.0, w1 / 3.0, 4.0 * w2 / 3.0, -4.0 * w2 / 3.0};
}
constexpr std::array<double, 4> kRichardsonOffsets{1.0, -1.0, 0.5, -0.5};

double energy_derivative(const ModelDefinition& model, const BasisState& s, Params lam, int i) {
    return fd_param_derivative(
               [&](Params q) { return cd(model.level_energy(s.n_plus, s.n_minus, q)); }, i, lam,
               default_param_step(lam[i]), [&](Params q) { return model.admissible(q); })
        .value.real();
}

// State psi_n whose parameter derivatives are taken by differences of its constructor.
ParametricWaveFunction target_state(const BasisSet& basis, int n, const QuadratureSettings& settings) {
    const ModelDefinition& model = *basis.model;
    const BasisState& s = basis.states[n];
    if (s.n_plus == 0 && s.n_minus == 0) return model.ground;
    return normalize(product_eigenfunction(model, s.n_plus, s.n_minus), model.metric, basis.params, settings).psi;
}

void state_derivatives(const ParametricWaveFunction& psi, Params lam, std::span<const int> idx, double rel,
                       const Point& x, cd& value, std::span<cd> d) {
    value = psi.eval(x, lam);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        const int i = idx[a];
        d[a] = fd_param_derivative([&](Params q) { return psi.eval(x, q); }, i, lam, rel * (1.0 + std::abs(lam[i])),
                                   psi.admissible)
                   .value;
    }
}

QuadratureSettings noise_floor(const QuadratureSettings& settings, const ZanardiSettings& zs) {
    QuadratureSettings out = settings;
    out.rel_tol = std::max(out.rel_tol, zs.rel_tol_floor);
    return out;
}

std::vector<int> resolve_indices(std::span<const int> indices, int dim) {
    std::vector<int> idx(indices.begin(), indices.end());
    if (idx.empty()) {
        for (int i = 0; i < dim; ++i) idx.push_back(i);
    }
    for (int i : idx) {
        if (i < 0 || i >= dim) throw ValidationError("parameter index out of range");
    }
    return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Basis

int BasisSet::index_of(int n_plus, int n_minus) const {
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k].n_plus == n_plus && states[k].n_minus == n_minus) return static_cast<int>(k);
    }
    return -1;
}

BasisSet build_basis(const ModelDefinition& model, int truncation, Params lam, const QuadratureSettings& settings,
                     GramMethod method) {
    if (truncation < 0) throw ValidationError("basis truncation must be non-negative");
    if (truncation > 60) throw ValidationError("basis truncation above 60 is not supported");
    model.require_admissible(lam);
    settings.validate();

    BasisSet b;
    b.model = &model;
    b.params.assign(lam.begin(), lam.end());
    b.truncation = truncation;
    for (int tot = 0; tot <= truncation; ++tot) {
        for (int a = tot; a >= 0; --a) {
            BasisState s;
            s.n_plus = a;
            s.n_minus = tot - a;
            s.energy = model.level_energy(a, tot - a, lam);
            b.states.push_back(std::move(s));
        }
    }
    std::stable_sort(b.states.begin(), b.states.end(), [](const BasisState& p, const BasisState& q) {
        if (p.energy != q.energy) return p.energy < q.energy;
        if (p.quanta() != q.quanta()) return p.quanta() < q.quanta();
        return p.n_plus > q.n_plus;
    });

    const std::size_t K = b.states.size();
    const BasisEvaluator raw(b);  // scales are still 1
    double err = 0.0;
    std::optional<Eigen::MatrixXcd> separable;
    if (method != GramMethod::Direct) separable = separable_gram(b, settings, err);
    if (!separable && method == GramMethod::Separable) {
        throw ValidationError(model.name + ": basis does not factor in oscillator coordinates");
    }
    b.gram_method = separable ? GramMethod::Separable : GramMethod::Direct;
    const Eigen::MatrixXcd S_raw =
        separable ? *separable
                  : overlap_matrix(K, [&](const Point& x, std::span<cd> o) { raw.eval(x, o); }, model.metric, lam,
                                   settings, err);
    Eigen::VectorXd scales(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double nk = S_raw(k, k).real();
        if (!(nk > 0.0) || !std::isfinite(nk)) throw EvaluationError("basis state with vanishing norm");
        scales[k] = 1.0 / std::sqrt(nk);
        b.states[k].scale = scales[k];
    }
    b.gram = scales.asDiagonal() * S_raw * scales.asDiagonal();
    b.gram_error = err * scales.maxCoeff() * scales.maxCoeff();
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(b.gram).eigenvalues();
    b.gram_condition = ev.maxCoeff() / std::max(ev.minCoeff(), std::numeric_limits<double>::min());

    for (BasisState& s : b.states) {
        ParametricWaveFunction raw_state = product_eigenfunction(model, s.n_plus, s.n_minus);
        const double c = s.scale;
        auto ev_raw = raw_state.eval;
        raw_state.eval = [ev_raw, c](const Point& x, Params q) { return c * ev_raw(x, q); };
        s.psi = std::move(raw_state);
    }
    return b;
}

void orthonormalize(BasisSet& basis, const QuadratureSettings& settings) {
    const std::size_t K = basis.size();
    const Eigen::MatrixXcd C = orthonormal_coefficients(basis.gram);

    // <phi_k|H|phi_l> = E_l S_kl since every phi_l is a pointwise eigenfunction.
    Eigen::VectorXd E(K);
    for (std::size_t k = 0; k < K; ++k) E[k] = basis.states[k].energy;
    const Eigen::MatrixXcd Hm = C.adjoint() * basis.gram * E.asDiagonal() * C;
    basis.rayleigh_energies.resize(K);
    basis.energies.resize(K);
    basis.energy_drift = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
        basis.rayleigh_energies[m] = Hm(m, m).real();
        const double drift = std::abs(basis.rayleigh_energies[m] - E[m]);
        basis.energy_drift = std::max(basis.energy_drift, drift);
        basis.energies[m] = drift > kEnergyDriftTolerance ? basis.rayleigh_energies[m] : E[m];
    }

    // Re-integrate the overlaps of the orthonormal combinations.
    const BasisEvaluator phi(basis);
    std::vector<cd> buf(K);
    double err = 0.0;
    const Eigen::MatrixXcd S = overlap_matrix(
        K,
        [&](const Point& x, std::span<cd> out) {
            phi.eval(x, buf);
            for (std::size_t m = 0; m < K; ++m) {
                cd acc = 0.0;
                for (std::size_t k = 0; k <= m; ++k) acc += C(k, m) * buf[k];
                out[m] = acc;
            }
        },
        basis.model->metric, basis.params, settings, err);
    basis.orthonormality_defect = (S - Eigen::MatrixXcd::Identity(K, K)).cwiseAbs().maxCoeff();
    basis.coefficients = C;
    basis.orthonormalized = true;
    if (basis.orthonormality_defect > 1e-8) {
        std::ostringstream os;
        os << "orthonormalized basis deviates from the identity by " << basis.orthonormality_defect;
        throw InvariantViolation(os.str());
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian stencils

HamiltonianStencil::HamiltonianStencil(const ModelDefinition& model, double step_scale)
    : model_(model), scale_(step_scale),
      frame_(model.flat_frame.has_value() && model.metric.domain.transform.has_value()) {
    if (!(step_scale > 0.0)) throw ValidationError("stencil scale must be positive");
}

void HamiltonianStencil::frame_apply(Params lam, const Point& x, const Functions& f, std::size_t count,
                                     std::span<cd> out) const {
    const CoordinateTransform& tr = *model_.metric.domain.transform;
    const FlatFrame& fr = *model_.flat_frame;
    const Point u = tr.from_original(x, lam);
    const Point x0 = tr.to_original(u, lam);
    // Even maps cover two branches of x; stay on the branch of the point.
    std::array<double, 2> mirror{1.0, 1.0};
    for (int mu = 0; mu < 2; ++mu) {
        if (x0[mu] * x[mu] < 0.0) mirror[mu] = -1.0;
        if (std::abs(mirror[mu] * x0[mu] - x[mu]) > 1e-8 * (1.0 + std::abs(x[mu]))) {
            throw InvariantViolation("frame coordinates do not invert at " + format_point(x));
        }
    }
    const Region region = tr.region(lam);
    auto g = [&](const Point& v, std::span<cd> o) {
        Point y = tr.to_original(v, lam);
        y[0] *= mirror[0];
        y[1] *= mirror[1];
        f(y, o);
    };

    std::vector<cd> centre(count), buf(count), lap(count, 0.0);
    std::array<std::vector<cd>, 2> grad{std::vector<cd>(count, 0.0), std::vector<cd>(count, 0.0)};
    g(u, centre);
    for (int mu = 0; mu < 2; ++mu) {
        const Interval iv = mu == 0 ? region.outer : region.inner_at(u[0]);
        const double h = scale_ * stencil_step(u[mu]);
        auto load = [&](double off) {
            Point v = u;
            v[mu] += off;
            g(v, buf);
        };
        if (u[mu] - 2.0 * h > iv.lo && u[mu] + 2.0 * h < iv.hi) {
            constexpr double o[4] = {-2.0, -1.0, 1.0, 2.0};
            constexpr double w1[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
            constexpr double w2[4] = {-1.0 / 12.0, 16.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
            for (int s = 0; s < 4; ++s) {
                load(o[s] * h);
                for (std::size_t c = 0; c < count; ++c) {
                    grad[mu][c] += w1[s] * buf[c] / h;
                    lap[c] += w2[s] * buf[c] / (h * h);
                }
            }
            for (std::size_t c = 0; c < count; ++c) lap[c] += -2.5 * centre[c] / (h * h);
        } else {
            // One-sided five-point stencil into the frame region.
            const double dir = u[mu] + 4.0 * h < iv.hi ? 1.0 : -1.0;
            constexpr double w1[5] = {-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0};
            constexpr double w2[5] = {35.0 / 12.0, -104.0 / 12.0, 114.0 / 12.0, -56.0 / 12.0, 11.0 / 12.0};
            for (std::size_t c = 0; c < count; ++c) {
                grad[mu][c] += w1[0] * centre[c] / (dir * h);
                lap[c] += w2[0] * centre[c] / (h * h);
            }
            for (int s = 1; s < 5; ++s) {
                load(dir * s * h);
                for (std::size_t c = 0; c < count; ++c) {
                    grad[mu][c] += w1[s] * buf[c] / (dir * h);
                    lap[c] += w2[s] * buf[c] / (h * h);
                }
            }
        }
    }

    const cd I(0.0, 1.0);
    const double V = fr.potential(u, lam);
    std::array<double, 2> F{};
    double div = 0.0;
    if (fr.gauge) {
        F = fr.gauge(u, lam);
        div = fr.gauge_div(u, lam);
    }
    const double F2 = F[0] * F[0] + F[1] * F[1];
    for (std::size_t c = 0; c < count; ++c) {
        cd v = -0.5 * lap[c] + V * centre[c];
        if (fr.gauge) {
            v += -I * (F[0] * grad[0][c] + F[1] * grad[1][c]) - 0.5 * I * div * centre[c] + 0.5 * F2 * centre[c];
        }
        out[c] = v;
    }
}

void HamiltonianStencil::apply(Params lam, const Point& x, const Functions& f, std::size_t count,
                               std::span<cd> out) const {
    if (frame_) {
        frame_apply(lam, x, f, count, out);
        return;
    }
    const int dim = model_.metric.dim_config;
    if (!stencil_inside(model_.metric.domain, x, lam, dim, scale_)) {
        throw DomainError("Hamiltonian stencil leaves the domain at " + format_point(x));
    }
    const HamiltonianCoefficients c = hamiltonian_coefficients(model_, x, lam);
    std::vector<LocalJet> jets(count);
    local_jets(f, count, x, dim, c.mixed, jets, scale_);
    for (std::size_t k = 0; k < count; ++k) out[k] = apply_hamiltonian(c, jets[k]);
}

void HamiltonianStencil::apply_derivative(Params lam, int i, double step, const Point& x, const Functions& f,
                                          std::size_t count, std::span<cd> out) const {
    const std::array<double, 4> w = richardson_weights(step);
    std::array<ParamVector, 4> p;
    for (int s = 0; s < 4; ++s) {
        p[s] = shifted_params(lam, i, kRichardsonOffsets[s] * step);
        if (!model_.admissible(p[s])) {
            throw DomainError("operator derivative stencil leaves the admissible region at " + format_point(lam));
        }
    }
    if (frame_) {
        std::vector<cd> buf(count);
        std::fill(out.begin(), out.begin() + count, cd(0.0));
        for (int s = 0; s < 4; ++s) {
            frame_apply(p[s], x, f, count, buf);
            for (std::size_t c = 0; c < count; ++c) out[c] += w[s] * buf[c];
        }
        return;
    }
    // Original coordinates: the stencil points do not move with lambda, so
    // differentiate the coefficients and apply them to one set of jets.
    const int dim = model_.metric.dim_config;
    if (!stencil_inside(model_.metric.domain, x, lam, dim, scale_)) {
        throw DomainError("Hamiltonian stencil leaves the domain at " + format_point(x));
    }
    std::array<HamiltonianCoefficients, 4> cs;
    bool mixed = false;
    for (int s = 0; s < 4; ++s) {
        cs[s] = hamiltonian_coefficients(model_, x, p[s]);
        mixed = mixed || cs[s].mixed;
    }
    const HamiltonianCoefficients dc = combine(cs, w);
    std::vector<LocalJet> jets(count);
    local_jets(f, count, x, dim, mixed, jets, scale_);
    for (std::size_t k = 0; k < count; ++k) out[k] = apply_hamiltonian(dc, jets[k]);
}

// ---------------------------------------------------------------------------
// Matrix elements

const char* operator_kind_name(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::SqrtgDH: return "sqrtg_dH";
        case OperatorKind::CommSqrtgH: return "comm_sqrtg_H";
        case OperatorKind::CommSqrtgSigmaH: return "comm_sqrtg_sigma_H";
        case OperatorKind::DpsiCommSqrtgH: return "dpsi_comm_sqrtg_H";
    }
    return "?";
}

IntegralResult operator_element(const BasisSet& basis, int n, int m, OperatorKind kind, int i,
                                const QuadratureSettings& settings, const ZanardiSettings& zs) {
    const int K = static_cast<int>(basis.size());
    if (n < 0 || n >= K || m < 0 || m >= K) throw ValidationError("basis index out of range");
    const ModelDefinition& model = *basis.model;
    if (i < 0 || i >= static_cast<int>(model.dim_params())) throw ValidationError("parameter index out of range");
    const MetricField& metric = model.metric;
    const Params lam = basis.params;
    const HamiltonianStencil H(model, zs.stencil_scale);
    const ParametricWaveFunction& bra = basis.states[n].psi;
    const ParametricWaveFunction& ket = basis.states[m].psi;
    const double Em = basis.states[m].energy;
    const double dstep = zs.operator_step_rel * (1.0 + std::abs(lam[i]));

    // Flat integrals in original coordinates; every weight is explicit.  A
    // commutator <b|A H - H A|m> is integrated as its two halves, so that
    // stencil noise is judged against their size rather than the difference.
    auto integrand = [&](const Point& x, std::span<cd> out) {
        const double sg = sqrt_det(metric, x, lam);
        const cd phm = ket.eval(x, lam);
        std::array<cd, 1> r{};
        switch (kind) {
            case OperatorKind::SqrtgDH: {
                H.apply_derivative(lam, i, dstep, x, [&](const Point& y, std::span<cd> o) { o[0] = ket.eval(y, lam); },
                                   1, r);
                out[0] = std::conj(bra.eval(x, lam)) * sg * r[0];
                out[1] = 0.0;
                return;
            }
            case OperatorKind::CommSqrtgH:
            case OperatorKind::DpsiCommSqrtgH: {
                // [sqrt g, H] psi_m = sqrt g (H psi_m) - H (sqrt g psi_m)
                H.apply(lam, x,
                        [&](const Point& y, std::span<cd> o) { o[0] = sqrt_det(metric, y, lam) * ket.eval(y, lam); },
                        1, r);
                cd b = 0.0;
                if (kind == OperatorKind::CommSqrtgH) {
                    b = bra.eval(x, lam);
                } else {
                    b = fd_param_derivative([&](Params q) { return bra.eval(x, q); }, i, lam,
                                            zs.state_step_rel * (1.0 + std::abs(lam[i])), bra.admissible)
                            .value;
                }
                out[0] = std::conj(b) * sg * Em * phm;
                out[1] = std::conj(b) * r[0];
                return;
            }
            case OperatorKind::CommSqrtgSigmaH: {
                auto weight = [&](const Point& y) {
                    return sqrt_det(metric, y, lam) * deformation_vector(metric, i, y, lam);
                };
                H.apply(lam, x, [&](const Point& y, std::span<cd> o) { o[0] = weight(y) * ket.eval(y, lam); }, 1, r);
                const cd b = std::conj(bra.eval(x, lam));
                out[0] = b * weight(x) * Em * phm;
                out[1] = b * r[0];
                return;
            }
        }
    };
    const VectorIntegralResult res = integrate_flat(2, integrand, metric.domain, lam, noise_floor(settings, zs));
    return {res.values[0] - res.values[1], res.errors[0] + res.errors[1], res.evaluations};
}

// ---------------------------------------------------------------------------
// Expansion

ZanardiResult zanardi_qgt(const BasisSet& basis, int n, std::span<const int> indices,
                          const QuadratureSettings& settings, const ZanardiSettings& zs) {
    const int K = static_cast<int>(basis.size());
    if (n < 0 || n >= K) throw ValidationError("target state is not in the basis");
    const ModelDefinition& model = *basis.model;
    const MetricField& metric = model.metric;
    const Params lam = basis.params;
    const std::vector<int> idx = resolve_indices(indices, static_cast<int>(model.dim_params()));
    const int q = static_cast<int>(idx.size());

    const ParametricWaveFunction psi = target_state(basis, n, settings);
    const double En = basis.states[n].energy;
    std::vector<double> dEn(q), opstep(q);
    for (int a = 0; a < q; ++a) {
        dEn[a] = energy_derivative(model, basis.states[n], lam, idx[a]);
        opstep[a] = zs.operator_step_rel * (1.0 + std::abs(lam[idx[a]]));
    }

    const HamiltonianStencil H(model, zs.stencil_scale);
    const BasisEvaluator phi(basis);

    // Per state k and index: R, dHR, sigR, L, dHL, sigL, D; then S_kn.  The
    // commutator pieces carry stencil noise, so they are integrated only
    // inside the full factors R and L, whose magnitude sets the tolerance,
    // and recovered by subtraction.  Two global components lead:
    // <psi|psi> and <psi|D_a psi>.
    const std::size_t per = 7 * q + 1;
    const std::size_t nglobal = 1 + q;
    const std::size_t ncomp = nglobal + per * K;

    auto integrand = [&](const Point& x, std::size_t begin, std::span<cd> out) {
        const std::size_t end = begin + out.size();
        cd v;
        std::array<cd, kMaxParams> d{}, Hd{}, dHpsi{}, sig{};
        state_derivatives(psi, lam, idx, zs.state_step_rel, x, v, d);
        for (int a = 0; a < q; ++a) sig[a] = deformation_vector(metric, idx[a], x, lam);
        const cd Hv = En * v;

        // States touched by this chunk.
        const std::size_t k_lo = begin < nglobal ? 0 : (begin - nglobal) / per;
        const std::size_t k_hi = end <= nglobal ? 0 : std::min<std::size_t>(K, (end - nglobal + per - 1) / per);
        const bool states = k_hi > k_lo;

        std::vector<cd> ph;
        std::vector<std::array<cd, kMaxParams>> dHph;
        if (states) {
            H.apply(lam, x,
                    [&](const Point& y, std::span<cd> o) {
                        cd vy;
                        state_derivatives(psi, lam, idx, zs.state_step_rel, y, vy, o);
                    },
                    q, std::span<cd>(Hd.data(), q));
            const std::size_t nk = k_hi - k_lo;
            ph.resize(nk);
            phi.eval(x, ph, k_lo);
            dHph.resize(nk);
            std::vector<cd> buf(nk);
            for (int a = 0; a < q; ++a) {
                std::array<cd, 1> r{};
                H.apply_derivative(lam, idx[a], opstep[a], x,
                                   [&](const Point& y, std::span<cd> o) { o[0] = psi.eval(y, lam); }, 1, r);
                dHpsi[a] = r[0];
                H.apply_derivative(lam, idx[a], opstep[a], x,
                                   [&](const Point& y, std::span<cd> o) { phi.eval(y, o, k_lo); }, nk, buf);
                for (std::size_t k = 0; k < nk; ++k) dHph[k][a] = buf[k];
            }
        }

        for (std::size_t c = begin; c < end; ++c) {
            cd& o = out[c - begin];
            if (c == 0) {
                o = std::norm(v);
                continue;
            }
            if (c < nglobal) {
                const int a = static_cast<int>(c - 1);
                o = std::conj(v) * (d[a] - 0.25 * sig[a] * v);
                continue;
            }
            const std::size_t k = (c - nglobal) / per;
            const std::size_t r = (c - nglobal) % per;
            const cd pk = ph[k - k_lo];
            const double Ek = basis.states[k].energy;
            if (r == 7 * static_cast<std::size_t>(q)) {
                o = std::conj(pk) * v;
                continue;
            }
            const int group = static_cast<int>(r) / q;
            const int a = static_cast<int>(r) % q;
            const cd dHR = std::conj(pk) * dHpsi[a];
            const cd sigR = std::conj(pk) * sig[a] * (Hv - Ek * v);
            const cd dHL = std::conj(v) * dHph[k - k_lo][a];
            const cd sigL = (Ek * std::conj(v) - std::conj(Hv)) * sig[a] * pk;
            switch (group) {
                case 0: o = dHR + std::conj(pk) * (Hd[a] - Ek * d[a]) - 0.25 * sigR; break;
                case 1: o = dHR; break;
                case 2: o = sigR; break;
                case 3: o = dHL + (std::conj(Hd[a]) - Ek * std::conj(d[a])) * pk + 0.25 * sigL; break;
                case 4: o = dHL; break;
                case 5: o = sigL; break;
                default: o = std::conj(pk) * (d[a] - 0.25 * sig[a] * v); break;
            }
        }
    };
    const VectorIntegralResult res = integrate_chunked(ncomp, integrand, metric, lam, noise_floor(settings, zs));
    auto at = [&](int k, int group, int a) -> cd { return res.values[nglobal + per * k + group * q + a]; };
    auto overlap = [&](int k) -> cd { return res.values[nglobal + per * k + 7 * q]; };

    ZanardiResult out;
    out.state = n;
    out.indices = idx;
    const double norm = res.values[0].real();
    if (std::abs(norm - 1.0) > 1e-6) {
        std::ostringstream os;
        os << "target state norm " << norm << " differs from one";
        out.diagnostics.push_back(os.str());
    }
    Eigen::VectorXcd P(q);
    for (int a = 0; a < q; ++a) P[a] = res.values[1 + a];

    // Dual-basis projections r_a(k) = <phi_k|D_a psi_n> and l_a(k) = <D_a psi_n|phi_k>.
    Eigen::MatrixXcd r(K, q), l(K, q);
    std::vector<bool> used(K, true);
    for (int k = 0; k < K; ++k) {
        const double gap = En - basis.states[k].energy;
        for (int a = 0; a < q; ++a) {
            if (k != n) {
                const cd commR = at(k, 0, a) - at(k, 1, a) + 0.25 * at(k, 2, a);
                const cd commL = at(k, 3, a) - at(k, 4, a) - 0.25 * at(k, 5, a);
                out.commutator_magnitude = std::max({out.commutator_magnitude, std::abs(commR), std::abs(commL),
                                                     std::abs(at(k, 2, a)), std::abs(at(k, 5, a))});
            }
        }
        if (k == n) {
            for (int a = 0; a < q; ++a) {
                r(k, a) = at(k, 6, a);
                l(k, a) = std::conj(at(k, 6, a));
            }
            continue;
        }
        if (std::abs(gap) < kDegeneracyGap) {
            used[k] = false;
            ++out.skipped;
            std::ostringstream os;
            os << "state (" << basis.states[k].n_plus << "," << basis.states[k].n_minus
               << ") is degenerate with the target (gap " << gap << "); left out of the sum";
            out.diagnostics.push_back(os.str());
            continue;
        }
        const cd S = overlap(k);
        for (int a = 0; a < q; ++a) {
            const cd R = at(k, 0, a);
            const cd L = at(k, 3, a);
            r(k, a) = (R - dEn[a] * S) / gap;
            l(k, a) = (L - dEn[a] * std::conj(S)) / gap;
        }
    }

    auto assemble = [&](int shell) {
        std::vector<int> sub;
        for (int k = 0; k < K; ++k) {
            if (used[k] && basis.states[k].quanta() <= shell) sub.push_back(k);
        }
        const int s = static_cast<int>(sub.size());
        Eigen::MatrixXcd Ss(s, s), rs(s, q), ls(s, q);
        for (int u = 0; u < s; ++u) {
            for (int w = 0; w < s; ++w) Ss(u, w) = basis.gram(sub[u], sub[w]);
            rs.row(u) = r.row(sub[u]);
            ls.row(u) = l.row(sub[u]);
        }
        const Eigen::MatrixXcd G = ls.transpose() * pseudo_inverse(Ss, zs.gram_cutoff) * rs - P.conjugate() * P.transpose();
        return G;
    };
    for (int shell = 0; shell <= basis.truncation; ++shell) {
        out.shells.push_back(shell);
        out.partial_sums.push_back(assemble(shell));
    }
    const Eigen::MatrixXcd G = out.partial_sums.back();
    out.hermiticity_defect = (G - G.adjoint()).cwiseAbs().maxCoeff();
    out.entries = 0.5 * (G + G.adjoint());
    for (auto& ps : out.partial_sums) ps = 0.5 * (ps + ps.adjoint()).eval();

    // Standard two-factor sum over orthonormal combinations of the basis.
    Eigen::MatrixXcd C;
    std::vector<double> Et(K);
    if (basis.orthonormalized) {
        C = basis.coefficients;
        Et = basis.energies;
    } else {
        C = orthonormal_coefficients(basis.gram);
        Eigen::VectorXd E(K);
        for (int k = 0; k < K; ++k) E[k] = basis.states[k].energy;
        const Eigen::MatrixXcd Hm = C.adjoint() * basis.gram * E.asDiagonal() * C;
        for (int m = 0; m < K; ++m) {
            const double ray = Hm(m, m).real();
            Et[m] = std::abs(ray - E[m]) > kEnergyDriftTolerance ? ray : E[m];
        }
    }
    Eigen::VectorXcd Sn(K);
    for (int k = 0; k < K; ++k) Sn[k] = overlap(k);
    const Eigen::VectorXcd proj = C.adjoint() * Sn;
    Eigen::Index mstar = 0;
    proj.cwiseAbs().maxCoeff(&mstar);
    Eigen::MatrixXcd dHL(K, q), dHR(K, q);
    for (int k = 0; k < K; ++k) {
        for (int a = 0; a < q; ++a) {
            dHL(k, a) = at(k, 4, a);
            dHR(k, a) = at(k, 1, a);
        }
    }
    const Eigen::MatrixXcd Lt = C.transpose() * dHL;   // <psi_n| sqrt g d_a H |m~>
    const Eigen::MatrixXcd Rt = C.adjoint() * dHR;     // <m~| sqrt g d_a H |psi_n>
    out.two_factor = Eigen::MatrixXcd::Zero(q, q);
    for (int m = 0; m < K; ++m) {
        const double gap = Et[m] - En;
        if (m == mstar || std::abs(gap) < kDegeneracyGap) continue;
        out.two_factor += Lt.row(m).transpose() * Rt.row(m) / (gap * gap);
    }
    return out;
}

cd zanardi_qgt(const BasisSet& basis, int n, int i, int j, const QuadratureSettings& settings,
               const ZanardiSettings& zs) {
    const std::array<int, 2> idx{i, j};
    const bool same = i == j;
    const ZanardiResult r = zanardi_qgt(basis, n, std::span<const int>(idx.data(), same ? 1 : 2), settings, zs);
    return same ? r.entries(0, 0) : r.entries(0, 1);
}

}  // namespace qgt
