#include "qgt/states.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace qgt {

namespace {

bool admissible_at(const std::function<bool(Params)>& admissible, Params lam) {
    return !admissible || admissible(lam);
}

}  // namespace

DerivativeResult fd_param_derivative(const std::function<cd(Params)>& f, int i, Params lam, double h,
                                     const std::function<bool(Params)>& admissible) {
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
    ParamVector p(lam.begin(), lam.end());
    auto at = [&](double offset) {
        p[i] = lam[i] + offset;
        const cd v = f(p);
        p[i] = lam[i];
        return v;
    };
    auto ok = [&](double offset) {
        p[i] = lam[i] + offset;
        const bool r = admissible_at(admissible, p);
        p[i] = lam[i];
        return r;
    };
    if (ok(h) && ok(-h)) {
        const cd d1 = (at(h) - at(-h)) / (2.0 * h);
        const cd d2 = (at(0.5 * h) - at(-0.5 * h)) / h;
        return {(4.0 * d2 - d1) / 3.0, false, false};
    }
    // One-sided second-order stencil (-3 f0 + 4 f1 - f2) / (2 s h).
    const double dir = ok(h) && ok(2.0 * h) ? 1.0 : -1.0;
    if (!ok(dir * h) || !ok(2.0 * dir * h)) {
        throw DomainError("no admissible finite-difference stencil around " + format_point(lam));
    }
    const cd f0 = at(0.0), f1 = at(dir * h), f2 = at(2.0 * dir * h);
    return {(-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * dir * h), false, true};
}

DerivativeResult param_derivative(const ParametricWaveFunction& psi, int i, Params lam, const Point& x, double h) {
    if (i < 0 || i >= psi.dim_params) throw ValidationError("parameter index out of range");
    if (psi.has_analytic_gradient()) {
        std::vector<cd> g(psi.dim_params);
        psi.value_and_gradient(x, lam, g);
        return {g[i], true, false};
    }
    return fd_param_derivative([&](Params q) { return psi.eval(x, q); }, i, lam, h, psi.admissible);
}

DerivativeResult param_derivative(const ParametricWaveFunction& psi, int i, Params lam, const Point& x) {
    return param_derivative(psi, i, lam, x, default_param_step(lam[i]));
}

bool value_and_derivatives(const ParametricWaveFunction& psi, Params lam, const Point& x,
                           std::span<const int> indices, cd& value, std::span<cd> derivs, bool force_fd) {
    if (psi.has_analytic_gradient() && !force_fd) {
        std::array<cd, kMaxParams> g{};
        value = psi.value_and_gradient(x, lam, std::span<cd>(g.data(), psi.dim_params));
        for (std::size_t k = 0; k < indices.size(); ++k) derivs[k] = g[indices[k]];
        return false;
    }
    value = psi.eval(x, lam);
    bool one_sided = false;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int i = indices[k];
        const DerivativeResult d = fd_param_derivative([&](Params q) { return psi.eval(x, q); }, i, lam,
                                                       default_param_step(lam[i]), psi.admissible);
        derivs[k] = d.value;
        one_sided = one_sided || d.one_sided;
    }
    return one_sided;
}

IntegralResult norm_squared(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                            const QuadratureSettings& settings) {
    return integrate_curved(
               1,
               [&](const Point& x, std::span<cd> out) { out[0] = std::norm(psi.eval(x, lam)); },
               metric, lam, settings)
        .component(0);
}

NormalizedState normalize(const ParametricWaveFunction& psi, const MetricField& metric, Params lam,
                          const QuadratureSettings& settings) {
    const IntegralResult n = norm_squared(psi, metric, lam, settings);
    const double nrm = n.value.real();
    if (!std::isfinite(nrm) || !(nrm > 0.0)) {
        throw EvaluationError("state has a non-finite or vanishing norm at " + format_point(lam));
    }
    struct Cache {
        std::mutex mutex;
        std::map<ParamVector, double> constants;
    };
    auto cache = std::make_shared<Cache>();
    cache->constants.emplace(ParamVector(lam.begin(), lam.end()), 1.0 / std::sqrt(nrm));

    NormalizedState out;
    out.constant = 1.0 / std::sqrt(nrm);
    out.psi = psi;
    out.psi.value_and_gradient = nullptr;
    out.psi.label = psi.label + " (normalized)";
    auto base = psi.eval;
    MetricField metric_copy = metric;
    ParametricWaveFunction source = psi;
    out.psi.eval = [cache, base, metric_copy, source, settings](const Point& x, Params q) {
        ParamVector key(q.begin(), q.end());
        double c;
        {
            std::lock_guard<std::mutex> lock(cache->mutex);
            auto it = cache->constants.find(key);
            if (it != cache->constants.end()) {
                c = it->second;
            } else {
                c = -1.0;
            }
        }
        if (c < 0.0) {
            const double nq = norm_squared(source, metric_copy, q, settings).value.real();
            if (!std::isfinite(nq) || !(nq > 0.0)) throw EvaluationError("non-finite norm at " + format_point(q));
            c = 1.0 / std::sqrt(nq);
            std::lock_guard<std::mutex> lock(cache->mutex);
            cache->constants.emplace(std::move(key), c);
        }
        return c * base(x, q);
    };
    return out;
}

}  // namespace qgt
