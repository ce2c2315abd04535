#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qgt/models.hpp"

namespace qgt {

void ModelDefinition::require_admissible(Params lam) const {
    const std::string why = admissibility(lam);
    if (!why.empty()) throw DomainError(name + ": " + why + " at " + format_point(lam));
}

int ModelDefinition::param_index(std::string_view param) const {
    for (std::size_t i = 0; i < param_names.size(); ++i) {
        if (param_names[i] == param) return static_cast<int>(i);
    }
    return -1;
}

const ModelDefinition& model_by_name(std::string_view name) {
    if (name == "sym-toda") return sym_toda();
    if (name == "anh-toda") return anh_toda();
    if (name == "exp-gauge") return exp_gauge();
    if (name == "flat-osc") return flat_oscillator();
    std::string known;
    for (const auto& n : model_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown model '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> model_names() { return {"sym-toda", "anh-toda", "exp-gauge", "flat-osc"}; }

ParametricWaveFunction ground_state(const ModelDefinition& model, Params lam) {
    model.require_admissible(lam);
    return model.ground;
}

double energy(const ModelDefinition& model, int n_plus, int n_minus, Params lam) {
    if (n_plus < 0 || n_minus < 0) throw ValidationError("quantum numbers must be non-negative");
    model.require_admissible(lam);
    const SpectrumData s = model.spectrum(lam);
    if (!(s.omega_plus > 0.0) || !(s.omega_minus > 0.0)) {
        throw DomainError(model.name + ": non-positive oscillator frequency at " + format_point(lam));
    }
    return model.level_energy(n_plus, n_minus, lam);
}

double ground_energy(const ModelDefinition& model, Params lam) { return energy(model, 0, 0, lam); }

void hermite_functions(double omega, double u, std::span<double> out) {
    if (out.empty()) return;
    const double s = std::sqrt(omega);
    const double xi = s * u;
    out[0] = std::pow(omega / std::numbers::pi, 0.25) * std::exp(-0.5 * xi * xi);
    if (out.size() == 1) return;
    out[1] = std::numbers::sqrt2 * xi * out[0];
    for (std::size_t n = 1; n + 1 < out.size(); ++n) {
        const double a = std::sqrt(2.0 / static_cast<double>(n + 1));
        const double b = std::sqrt(static_cast<double>(n) / static_cast<double>(n + 1));
        out[n + 1] = a * xi * out[n] - b * out[n - 1];
    }
}

ParametricWaveFunction product_eigenfunction(const ModelDefinition& model, int n_plus, int n_minus) {
    if (n_plus < 0 || n_minus < 0) throw ValidationError("quantum numbers must be non-negative");
    ParametricWaveFunction psi;
    psi.dim_config = 2;
    psi.dim_params = static_cast<int>(model.dim_params());
    psi.domain = model.metric.domain;
    psi.label = model.name + " product state (" + std::to_string(n_plus) + "," + std::to_string(n_minus) + ")";
    psi.admissible = [&model](Params p) { return model.admissible(p); };
    psi.eval = [&model, n_plus, n_minus](const Point& x, Params lam) {
        const SpectrumData s = model.spectrum(lam);
        const Point u = model.oscillator_coordinates(x, lam);
        std::vector<double> hp(n_plus + 1), hm(n_minus + 1);
        hermite_functions(s.omega_plus, u[0], hp);
        hermite_functions(s.omega_minus, u[1], hm);
        const double amp = hp.back() * hm.back();
        return amp == 0.0 ? cd(0.0) : model.eigen_phase(x, lam) * amp;
    };
    return psi;
}

std::vector<Point> interior_samples(const ModelDefinition& model, Params lam, int count, std::uint64_t seed) {
    model.require_admissible(lam);
    const SpectrumData s = model.spectrum(lam);
    const IntegrationDomain& dom = model.metric.domain;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> plus(0.0, 1.0 / std::sqrt(2.0 * s.omega_plus));
    std::normal_distribution<double> minus(0.0, 1.0 / std::sqrt(2.0 * s.omega_minus));
    std::bernoulli_distribution coin(0.5);

    std::vector<Point> out;
    out.reserve(count);
    // Rejection sampling of |psi|^2 in oscillator coordinates; points too close
    // to a coordinate singularity of the flat map are discarded as well.
    const double margin = 0.05 / std::sqrt(std::max(s.omega_plus, s.omega_minus));
    for (long attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
        if (attempt > 1000L * count + 10000) throw EvaluationError("could not sample interior points");
        const double up = plus(rng), um = minus(rng);
        const Point u{(up + um) / std::numbers::sqrt2, (up - um) / std::numbers::sqrt2};
        Point x = u;
        if (dom.transform) {
            const Region r = dom.transform->region(lam);
            if (!(u[0] > r.outer.lo + margin && u[0] < r.outer.hi - margin)) continue;
            const Interval in = r.inner_at(u[0]);
            if (!(u[1] > in.lo + margin && u[1] < in.hi - margin)) continue;
            x = dom.transform->to_original(u, lam);
            if (dom.transform->multiplicity == 2.0 && coin(rng)) x[0] = -x[0];
        }
        if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !dom.contains(x, lam)) continue;
        out.push_back(x);
    }
    return out;
}

}  // namespace qgt
