#include "qgt/tensor.hpp"

#include <cmath>

namespace qgt {

namespace {

std::vector<int> resolve_indices(std::span<const int> indices, int dim_params) {
    std::vector<int> idx(indices.begin(), indices.end());
    if (idx.empty()) {
        for (int i = 0; i < dim_params; ++i) idx.push_back(i);
    }
    for (int i : idx) {
        if (i < 0 || i >= dim_params) throw ValidationError("parameter index " + std::to_string(i) + " out of range");
    }
    return idx;
}

// Everything needed for both tensor variants from one quadrature.
struct FusedBrackets {
    int m = 0;
    double n = 0.0, n_err = 0.0;
    std::vector<cd> A, S;              // <psi|d_k psi>, <sigma_k>
    std::vector<double> A_err, S_err;
    Eigen::MatrixXcd B, XB;            // <d_k psi|d_l psi>, <D_k psi|D_l psi>
    Eigen::MatrixXd B_err, XB_err;
    bool one_sided = false;
};

FusedBrackets fused_brackets(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                             const std::vector<int>& idx, const QuadratureSettings& settings) {
    const int m = static_cast<int>(idx.size());
    const std::size_t ncomp = 1 + 2 * m + 2 * m * m;
    bool one_sided = false;
    auto f = [&](const Point& x, std::span<cd> out) {
        cd v;
        std::array<cd, kMaxParams> d{}, X{};
        std::array<double, kMaxParams> s{};
        if (value_and_derivatives(psi, lam, x, idx, v, std::span<cd>(d.data(), m))) one_sided = true;
        for (int k = 0; k < m; ++k) {
            s[k] = deformation_vector(metric, idx[k], x, lam);
            X[k] = d[k] - 0.25 * s[k] * v;
        }
        const double p = std::norm(v);
        const cd vc = std::conj(v);
        std::size_t c = 0;
        out[c++] = p;
        for (int k = 0; k < m; ++k) out[c++] = vc * d[k];
        for (int k = 0; k < m; ++k) out[c++] = s[k] * p;
        for (int k = 0; k < m; ++k) {
            for (int l = 0; l < m; ++l) out[c++] = std::conj(d[k]) * d[l];
        }
        for (int k = 0; k < m; ++k) {
            for (int l = 0; l < m; ++l) out[c++] = std::conj(X[k]) * X[l];
        }
    };
    const VectorIntegralResult r = integrate_curved(ncomp, f, metric, lam, settings);

    FusedBrackets b;
    b.m = m;
    b.one_sided = one_sided;
    std::size_t c = 0;
    b.n = r.values[c].real();
    b.n_err = r.errors[c++];
    for (int k = 0; k < m; ++k) {
        b.A.push_back(r.values[c]);
        b.A_err.push_back(r.errors[c++]);
    }
    for (int k = 0; k < m; ++k) {
        b.S.push_back(r.values[c]);
        b.S_err.push_back(r.errors[c++]);
    }
    b.B.resize(m, m);
    b.B_err.resize(m, m);
    b.XB.resize(m, m);
    b.XB_err.resize(m, m);
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) {
            b.B(k, l) = r.values[c];
            b.B_err(k, l) = r.errors[c++];
        }
    }
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) {
            b.XB(k, l) = r.values[c];
            b.XB_err(k, l) = r.errors[c++];
        }
    }
    if (!(b.n > 0.0) || !std::isfinite(b.n)) {
        throw EvaluationError("state has a vanishing or non-finite norm at " + format_point(lam));
    }
    return b;
}

QGTMatrix assemble(const FusedBrackets& b, const std::vector<int>& idx, Params lam, TensorVariant variant) {
    const int m = b.m;
    std::vector<cd> a(m);
    std::vector<double> a_err(m);
    for (int k = 0; k < m; ++k) {
        if (variant == TensorVariant::Full) {
            a[k] = b.A[k] - 0.25 * b.S[k];
            a_err[k] = b.A_err[k] + 0.25 * b.S_err[k];
        } else {
            a[k] = b.A[k];
            a_err[k] = b.A_err[k];
        }
    }
    const Eigen::MatrixXcd& X = variant == TensorVariant::Full ? b.XB : b.B;
    const Eigen::MatrixXd& Xe = variant == TensorVariant::Full ? b.XB_err : b.B_err;

    Eigen::MatrixXcd G(m, m);
    Eigen::MatrixXd E(m, m);
    const double n = b.n;
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) {
            const cd proj = std::conj(a[k]) * a[l] / n;
            G(k, l) = (X(k, l) - proj) / n;
            const double e = Xe(k, l) + (std::abs(a[k]) * a_err[l] + std::abs(a[l]) * a_err[k]) / n +
                             std::abs(proj) * b.n_err / n;
            E(k, l) = e / n + std::abs(G(k, l)) * b.n_err / n;
        }
    }

    QGTMatrix out;
    out.params.assign(lam.begin(), lam.end());
    out.indices = idx;
    out.variant = variant;
    out.norm = n;
    out.one_sided = b.one_sided;
    const Eigen::MatrixXcd adj = G.adjoint();
    out.hermiticity_defect = (G - adj).cwiseAbs().maxCoeff();
    out.entries = 0.5 * (G + adj);
    const Eigen::MatrixXd Et = E.transpose();
    out.error_estimates = 0.5 * (E + Et) + 0.5 * (G - adj).cwiseAbs();
    return out;
}

IntegralResult component_of(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j, Params lam,
                            const QuadratureSettings& settings, TensorVariant variant) {
    std::vector<int> idx = i == j ? std::vector<int>{i} : std::vector<int>{i, j};
    const QGTMatrix M = qgt_matrix(psi, metric, lam, idx, settings, variant);
    const int a = 0, b = i == j ? 0 : 1;
    if (M.hermiticity_defect > 10.0 * std::max(M.error_estimates(a, b), 1e-300) && M.hermiticity_defect > 1e-14) {
        throw InvariantViolation("tensor entry is not Hermitian within 10x its error estimate at " +
                                 format_point(lam));
    }
    return {M.entries(a, b), M.error_estimates(a, b), 0};
}

}  // namespace

const char* variant_name(TensorVariant v) { return v == TensorVariant::Full ? "full" : "provost-vallee"; }

QGTMatrix qgt_matrix(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                     std::span<const int> indices, const QuadratureSettings& settings, TensorVariant variant) {
    const std::vector<int> idx = resolve_indices(indices, psi.dim_params);
    return assemble(fused_brackets(psi, metric, lam, idx, settings), idx, lam, variant);
}

std::pair<QGTMatrix, QGTMatrix> qgt_full_and_pv(const ParametricWaveFunction& psi, const MetricField& metric,
                                                Params lam, std::span<const int> indices,
                                                const QuadratureSettings& settings) {
    const std::vector<int> idx = resolve_indices(indices, psi.dim_params);
    const FusedBrackets b = fused_brackets(psi, metric, lam, idx, settings);
    return {assemble(b, idx, lam, TensorVariant::Full), assemble(b, idx, lam, TensorVariant::ProvostVallee)};
}

IntegralResult qgt_component(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                             Params lam, const QuadratureSettings& settings) {
    return component_of(psi, metric, i, j, lam, settings, TensorVariant::Full);
}

IntegralResult provost_vallee_component(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                        Params lam, const QuadratureSettings& settings) {
    return component_of(psi, metric, i, j, lam, settings, TensorVariant::ProvostVallee);
}

cd QGTTerms::sum() const {
    cd s = 0.0;
    for (const cd& t : terms) s += t;
    return s;
}

QGTTerms qgt_terms(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j, Params lam,
                   const QuadratureSettings& settings) {
    const std::vector<int> idx{i, j};
    auto f = [&](const Point& x, std::span<cd> out) {
        cd v;
        std::array<cd, 2> d{};
        value_and_derivatives(psi, lam, x, idx, v, d);
        const double si = deformation_vector(metric, i, x, lam);
        const double sj = deformation_vector(metric, j, x, lam);
        const double p = std::norm(v);
        out[0] = std::conj(d[0]) * d[1];          // <d_i psi|d_j psi>
        out[1] = std::conj(v) * d[0];             // <psi|d_i psi>
        out[2] = std::conj(v) * d[1];             // <psi|d_j psi>
        out[3] = si * std::conj(v) * d[1];        // <psi|s_i d_j psi>
        out[4] = sj * std::conj(d[0]) * v;        // <d_i psi|s_j psi>
        out[5] = si * p;
        out[6] = sj * p;
        out[7] = si * sj * p;
    };
    const VectorIntegralResult r = integrate_curved(8, f, metric, lam, settings);
    const auto& v = r.values;
    const auto& e = r.errors;
    QGTTerms t;
    t.terms = {v[0],
               -std::conj(v[1]) * v[2],
               -0.25 * v[3],
               -0.25 * v[4],
               0.25 * v[5] * v[2],
               0.25 * v[6] * std::conj(v[1]),
               v[7] / 16.0,
               -v[5] * v[6] / 16.0};
    t.errors = {e[0],
                std::abs(v[1]) * e[2] + std::abs(v[2]) * e[1],
                0.25 * e[3],
                0.25 * e[4],
                0.25 * (std::abs(v[5]) * e[2] + std::abs(v[2]) * e[5]),
                0.25 * (std::abs(v[6]) * e[1] + std::abs(v[1]) * e[6]),
                e[7] / 16.0,
                (std::abs(v[5]) * e[6] + std::abs(v[6]) * e[5]) / 16.0};
    return t;
}

TensorSpectrum spectrum(const Eigen::MatrixXd& real_part) {
    TensorSpectrum s;
    s.det = real_part.determinant();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(real_part, Eigen::EigenvaluesOnly);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) s.eigenvalues.push_back(es.eigenvalues()(k));
    return s;
}

TensorSpectrum spectrum(const QGTMatrix& matrix) {
    const Eigen::MatrixXcd defect = matrix.entries - matrix.entries.adjoint();
    for (Eigen::Index a = 0; a < defect.rows(); ++a) {
        for (Eigen::Index b = 0; b < defect.cols(); ++b) {
            if (std::abs(defect(a, b)) > 10.0 * matrix.error_estimates(a, b) + 1e-300) {
                throw InvariantViolation("tensor is not Hermitian within tolerance");
            }
        }
    }
    return spectrum(Eigen::MatrixXd(matrix.entries.real()));
}

// ---------------------------------------------------------------------------
// Berry quantities

namespace {

struct Connections {
    std::vector<ConnectionResult> beta;
    std::vector<ConnectionBrackets> brackets;
};

constexpr double kNormalizedTolerance = 1e-8;

Connections connections_raw(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                            const std::vector<int>& idx, const QuadratureSettings& settings) {
    const int m = static_cast<int>(idx.size());
    auto f = [&](const Point& x, std::span<cd> out) {
        cd v;
        std::array<cd, kMaxParams> d{};
        value_and_derivatives(psi, lam, x, idx, v, std::span<cd>(d.data(), m));
        const double p = std::norm(v);
        out[0] = p;
        for (int k = 0; k < m; ++k) {
            out[1 + 2 * k] = std::conj(v) * d[k];
            out[2 + 2 * k] = deformation_vector(metric, idx[k], x, lam) * p;
        }
    };
    const VectorIntegralResult r = integrate_curved(1 + 2 * m, f, metric, lam, settings);
    Connections c;
    for (int k = 0; k < m; ++k) {
        ConnectionBrackets b;
        b.norm = r.values[0];
        b.overlap = r.values[1 + 2 * k];
        b.sigma = r.values[2 + 2 * k];
        b.error = std::max({r.errors[0], r.errors[1 + 2 * k], r.errors[2 + 2 * k]});
        c.brackets.push_back(b);

        const cd I(0.0, 1.0);
        const cd z = -I * b.overlap + 0.25 * I * b.sigma;
        ConnectionResult res;
        res.value = z.real();
        res.imaginary_residual = std::abs(z.imag());
        res.naive = std::abs(b.overlap);
        res.error = b.error;
        c.beta.push_back(res);
    }
    return c;
}

// Normalizes numerically when the family is not already of unit norm.
Connections connections(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                        const std::vector<int>& idx, const QuadratureSettings& settings) {
    const double n = norm_squared(psi, metric, lam, settings).value.real();
    if (std::abs(n - 1.0) <= kNormalizedTolerance) return connections_raw(psi, metric, lam, idx, settings);
    const NormalizedState ns = normalize(psi, metric, lam, settings);
    return connections_raw(ns.psi, metric, lam, idx, settings);
}

void check_reality(const ConnectionResult& r, int i, Params lam) {
    if (r.imaginary_residual > kBerryImagTolerance) {
        throw InvariantViolation("Berry connection component " + std::to_string(i) + " has imaginary residual " +
                                 std::to_string(r.imaginary_residual) + " at " + format_point(lam));
    }
}

// d_i of every beta_k (k over idx) by Richardson-extrapolated differences.
struct DirectionalDerivative {
    std::vector<double> value, error;
    bool one_sided = false;
};

DirectionalDerivative beta_derivative(const ParametricWaveFunction& psi, const MetricField& metric, int i,
                                      Params lam, const std::vector<int>& idx, const QuadratureSettings& settings,
                                      double step_scale) {
    const double h = curvature_step(lam[i]) * step_scale;
    ParamVector p(lam.begin(), lam.end());
    auto shifted_ok = [&](double off) {
        p[i] = lam[i] + off;
        const bool ok = psi.is_admissible(p);
        p[i] = lam[i];
        return ok;
    };
    auto beta_at = [&](double off) {
        p[i] = lam[i] + off;
        Connections c = connections(psi, metric, p, idx, settings);
        p[i] = lam[i];
        return c.beta;
    };
    const std::size_t m = idx.size();
    DirectionalDerivative out;
    out.value.assign(m, 0.0);
    out.error.assign(m, 0.0);
    if (shifted_ok(h) && shifted_ok(-h)) {
        const auto bp = beta_at(h), bm = beta_at(-h), bp2 = beta_at(0.5 * h), bm2 = beta_at(-0.5 * h);
        for (std::size_t k = 0; k < m; ++k) {
            const double d1 = (bp[k].value - bm[k].value) / (2.0 * h);
            const double d2 = (bp2[k].value - bm2[k].value) / h;
            const double r = (4.0 * d2 - d1) / 3.0;
            const double q = std::max({bp[k].error, bm[k].error, bp2[k].error, bm2[k].error});
            out.value[k] = r;
            out.error[k] = std::abs(r - d2) + 3.0 * q / h;
        }
        return out;
    }
    const double dir = shifted_ok(h) && shifted_ok(2.0 * h) ? 1.0 : -1.0;
    if (!shifted_ok(dir * h) || !shifted_ok(2.0 * dir * h)) {
        throw DomainError("no admissible stencil for the Berry curvature around " + format_point(lam));
    }
    out.one_sided = true;
    const auto b0 = beta_at(0.0), b1 = beta_at(dir * h), b2 = beta_at(2.0 * dir * h);
    const auto c1 = beta_at(0.5 * dir * h);
    for (std::size_t k = 0; k < m; ++k) {
        const double dh = (-3.0 * b0[k].value + 4.0 * b1[k].value - b2[k].value) / (2.0 * dir * h);
        const double dh2 = (-3.0 * b0[k].value + 4.0 * c1[k].value - b1[k].value) / (dir * h);
        const double r = (4.0 * dh2 - dh) / 3.0;
        const double q = std::max({b0[k].error, b1[k].error, b2[k].error, c1[k].error});
        out.value[k] = r;
        out.error[k] = std::abs(r - dh2) + 8.0 * q / h;
    }
    return out;
}

}  // namespace

ConnectionBrackets connection_brackets(const ParametricWaveFunction& psi, const MetricField& metric, int i,
                                       Params lam, const QuadratureSettings& settings) {
    const std::vector<int> idx = resolve_indices(std::span<const int>(&i, 1), psi.dim_params);
    return connections_raw(psi, metric, lam, idx, settings).brackets[0];
}

cd normalization_identity(const ConnectionBrackets& b) { return std::conj(b.overlap) + b.overlap - 0.5 * b.sigma; }

ConnectionResult berry_connection(const ParametricWaveFunction& psi, const MetricField& metric, int i, Params lam,
                                  const QuadratureSettings& settings) {
    const std::vector<int> idx = resolve_indices(std::span<const int>(&i, 1), psi.dim_params);
    const ConnectionResult r = connections(psi, metric, lam, idx, settings).beta[0];
    check_reality(r, i, lam);
    return r;
}

CurvatureResult berry_curvature(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                Params lam, const QuadratureSettings& settings, double step_scale) {
    CurvatureResult out;
    if (i == j) {
        resolve_indices(std::span<const int>(&i, 1), psi.dim_params);
        return out;
    }
    const std::vector<int> idx = resolve_indices(std::vector<int>{i, j}, psi.dim_params);
    const DirectionalDerivative di = beta_derivative(psi, metric, i, lam, idx, settings, step_scale);
    const DirectionalDerivative dj = beta_derivative(psi, metric, j, lam, idx, settings, step_scale);
    out.value = di.value[1] - dj.value[0];
    out.error = di.error[1] + dj.error[0];
    out.one_sided = di.one_sided || dj.one_sided;
    return out;
}

BerryData berry_data(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                     std::span<const int> indices, const QuadratureSettings& settings) {
    const std::vector<int> idx = resolve_indices(indices, psi.dim_params);
    const int m = static_cast<int>(idx.size());
    BerryData out;
    out.params.assign(lam.begin(), lam.end());
    out.indices = idx;
    const Connections base = connections(psi, metric, lam, idx, settings);
    for (int k = 0; k < m; ++k) {
        check_reality(base.beta[k], idx[k], lam);
        out.connection.push_back(base.beta[k].value);
        out.imaginary_residuals.push_back(base.beta[k].imaginary_residual);
        out.naive.push_back(base.beta[k].naive);
    }
    std::vector<DirectionalDerivative> d;
    for (int k = 0; k < m; ++k) {
        d.push_back(beta_derivative(psi, metric, idx[k], lam, idx, settings, 1.0));
        out.one_sided = out.one_sided || d.back().one_sided;
    }
    out.curvature = Eigen::MatrixXd::Zero(m, m);
    out.curvature_errors = Eigen::MatrixXd::Zero(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            const double F = d[a].value[b] - d[b].value[a];
            const double e = d[a].error[b] + d[b].error[a];
            out.curvature(a, b) = F;
            out.curvature(b, a) = -F;
            out.curvature_errors(a, b) = out.curvature_errors(b, a) = e;
        }
    }
    return out;
}

ClosednessResult curvature_closedness(const ParametricWaveFunction& psi, const MetricField& metric, int i, int j,
                                      int k, Params lam, const QuadratureSettings& settings) {
    const std::array<std::array<int, 3>, 3> cyc{{{i, j, k}, {j, k, i}, {k, i, j}}};
    ClosednessResult out;
    ParamVector p(lam.begin(), lam.end());
    for (const auto& t : cyc) {
        const int a = t[0];
        const double h = 10.0 * curvature_step(lam[a]);
        p[a] = lam[a] + h;
        const double fp = berry_curvature(psi, metric, t[1], t[2], p, settings).value;
        p[a] = lam[a] - h;
        const double fm = berry_curvature(psi, metric, t[1], t[2], p, settings).value;
        p[a] = lam[a];
        const double term = (fp - fm) / (2.0 * h);
        out.value += term;
        out.scale += std::abs(term);
    }
    return out;
}

}  // namespace qgt
