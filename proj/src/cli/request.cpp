#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "qgt/cli.hpp"

namespace qgt::cli {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
    throw ValidationError(field + ": " + message);
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
        invalid(field, "expected a finite number, got '" + text + "'");
    }
    return v;
}

int parse_int(const std::string& field, const std::string& text) {
    const std::string t = trim(text);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        invalid(field, "expected an integer, got '" + text + "'");
    }
    return v;
}

bool needs_pair(Quantity q) { return q == Quantity::Component; }
bool needs_two(Quantity q) { return q == Quantity::BerryCurvature || q == Quantity::PvVsFull; }

}  // namespace

Quantity parse_quantity(const std::string& name) {
    for (Quantity q : {Quantity::Component, Quantity::Det, Quantity::Eigenvalues, Quantity::BerryConnection,
                       Quantity::BerryCurvature, Quantity::PvVsFull, Quantity::CompareOrders}) {
        if (name == quantity_name(q)) return q;
    }
    invalid("quantity", "unknown quantity '" + name +
                            "' (known: component, det, eigenvalues, berry-connection, berry-curvature, pv-vs-full, "
                            "compare-orders)");
}

const char* quantity_name(Quantity q) {
    switch (q) {
        case Quantity::Component: return "component";
        case Quantity::Det: return "det";
        case Quantity::Eigenvalues: return "eigenvalues";
        case Quantity::BerryConnection: return "berry-connection";
        case Quantity::BerryCurvature: return "berry-curvature";
        case Quantity::PvVsFull: return "pv-vs-full";
        case Quantity::CompareOrders: return "compare-orders";
    }
    return "?";
}

Axis parse_axis(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) invalid("vary", "expected name=min:max:count, got '" + text + "'");
    Axis a;
    a.name = trim(text.substr(0, eq));
    const std::string rest = text.substr(eq + 1);
    const auto c1 = rest.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : rest.find(':', c1 + 1);
    if (c2 == std::string::npos || rest.find(':', c2 + 1) != std::string::npos) {
        invalid("vary", "expected name=min:max:count, got '" + text + "'");
    }
    a.min = parse_double("vary", rest.substr(0, c1));
    a.max = parse_double("vary", rest.substr(c1 + 1, c2 - c1 - 1));
    a.count = parse_int("vary", rest.substr(c2 + 1));
    return a;
}

std::pair<std::string, double> parse_fixed(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) invalid("fix", "expected name=value, got '" + text + "'");
    return {trim(text.substr(0, eq)), parse_double("fix", text.substr(eq + 1))};
}

Order parse_order(const std::string& text) {
    const std::string t = trim(text);
    if (t == "analytic" || t == "0") return 0;
    if (t == "1") return 1;
    if (t == "2") return 2;
    invalid("orders", "expected analytic, 1 or 2, got '" + text + "'");
}

ResolvedRequest resolve(const ScanRequest& request) {
    ResolvedRequest r;
    r.request = request;
    if (request.model.empty()) invalid("model", "a model is required");
    r.model = &model_by_name(request.model);
    const ModelDefinition& m = *r.model;
    const auto known = [&] {
        std::string s;
        for (const auto& n : m.param_names) s += (s.empty() ? "" : ", ") + n;
        return s;
    };

    if (request.vary.empty() || request.vary.size() > 2) {
        invalid("vary", "between one and two parameters must be varied (got " + std::to_string(request.vary.size()) +
                            ")");
    }
    std::set<std::string> seen;
    for (const Axis& a : request.vary) {
        const int idx = m.param_index(a.name);
        if (idx < 0) invalid("vary", "unknown parameter '" + a.name + "' for " + m.name + " (known: " + known() + ")");
        if (!seen.insert(a.name).second) invalid("vary", "parameter '" + a.name + "' listed twice");
        if (a.count < 2) invalid("count", "count must be at least 2 for '" + a.name + "' (count=" + std::to_string(a.count) + ")");
        if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.min < a.max)) {
            invalid("min/max", "min must be below max for '" + a.name + "' (min=" + format_number(a.min) +
                                   ", max=" + format_number(a.max) + ")");
        }
        r.axis_params.push_back(idx);
    }

    r.base_point.assign(m.dim_params(), std::nan(""));
    for (const auto& [name, value] : request.fixed) {
        const int idx = m.param_index(name);
        if (idx < 0) invalid("fix", "unknown parameter '" + name + "' for " + m.name + " (known: " + known() + ")");
        if (!seen.insert(name).second) invalid("fix", "parameter '" + name + "' is both varied and fixed, or fixed twice");
        if (!std::isfinite(value)) invalid("fix", "value of '" + name + "' is not finite");
        r.base_point[idx] = value;
    }
    for (std::size_t i = 0; i < m.dim_params(); ++i) {
        if (!seen.count(m.param_names[i])) {
            invalid("fix", "parameter '" + m.param_names[i] + "' is neither varied nor fixed");
        }
    }

    Quantity q = request.quantity;
    if (q == Quantity::CompareOrders) {
        if (!m.has_perturbative_states) invalid("model", "order comparison is only defined for sym-toda");
        if (request.base == Quantity::CompareOrders) invalid("base", "the compared quantity cannot be compare-orders");
        if (request.orders.empty()) invalid("orders", "at least one order is required");
        std::set<Order> orders;
        for (Order o : request.orders) {
            if (o < 0 || o > 2) invalid("orders", "expected analytic, 1 or 2");
            if (!orders.insert(o).second) invalid("orders", "order listed twice");
        }
        q = request.base;
    }

    for (const auto& name : request.indices) {
        const int idx = m.param_index(name);
        if (idx < 0) invalid("indices", "unknown parameter '" + name + "' for " + m.name + " (known: " + known() + ")");
        r.indices.push_back(idx);
    }
    if (r.indices.empty() && !needs_pair(q)) {
        for (std::size_t i = 0; i < m.dim_params(); ++i) r.indices.push_back(static_cast<int>(i));
    }
    if (needs_pair(q) && r.indices.size() != 2) {
        invalid("indices", std::string(quantity_name(q)) + " needs exactly two parameters (got " +
                               std::to_string(r.indices.size()) + ")");
    }
    if (needs_two(q) && r.indices.size() < 2) {
        invalid("indices", std::string(quantity_name(q)) + " needs at least two parameters");
    }
    if (!needs_pair(q)) {
        std::set<int> unique(r.indices.begin(), r.indices.end());
        if (unique.size() != r.indices.size()) invalid("indices", "parameter listed twice");
    }

    try {
        request.settings.validate();
    } catch (const ValidationError& e) {
        invalid("settings", e.what());
    }
    return r;
}

std::vector<GridPoint> scan_grid(const ResolvedRequest& r) {
    const auto& axes = r.request.vary;
    std::size_t total = 1;
    for (const Axis& a : axes) total *= static_cast<std::size_t>(a.count);

    std::vector<GridPoint> grid;
    grid.reserve(total);
    std::vector<int> pos(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        for (std::size_t k = axes.size(); k-- > 0;) {
            pos[k] = static_cast<int>(rem % static_cast<std::size_t>(axes[k].count));
            rem /= static_cast<std::size_t>(axes[k].count);
        }
        GridPoint gp;
        gp.params = r.base_point;
        for (std::size_t k = 0; k < axes.size(); ++k) {
            const Axis& a = axes[k];
            // Endpoints exactly, interior points by interpolation.
            const double t = static_cast<double>(pos[k]) / (a.count - 1);
            gp.params[r.axis_params[k]] = pos[k] == a.count - 1 ? a.max : a.min + t * (a.max - a.min);
        }
        if (!r.model->admissible(gp.params)) {
            // Try each endpoint coordinate on its own before moving all of them.
            std::vector<std::size_t> ends;
            for (std::size_t k = 0; k < axes.size(); ++k) {
                if (pos[k] == 0 || pos[k] == axes[k].count - 1) ends.push_back(k);
            }
            std::vector<std::vector<std::size_t>> attempts;
            for (std::size_t k : ends) attempts.push_back({k});
            if (ends.size() > 1) attempts.push_back(ends);
            for (const auto& subset : attempts) {
                ParamVector moved = gp.params;
                std::string note;
                for (std::size_t k : subset) {
                    const Axis& a = axes[k];
                    double& v = moved[r.axis_params[k]];
                    v += (pos[k] == 0 ? 1.0 : -1.0) * kEndpointClamp * (a.max - a.min);
                    note += (note.empty() ? "" : ", ") + a.name + " " + format_number(gp.params[r.axis_params[k]]) +
                            " -> " + format_number(v);
                }
                if (r.model->admissible(moved)) {
                    gp.params = std::move(moved);
                    gp.note = std::move(note);
                    break;
                }
            }
        }
        grid.push_back(std::move(gp));
    }
    return grid;
}

namespace {

std::vector<std::string> base_columns(const ResolvedRequest& r, Quantity q) {
    const auto& names = r.model->param_names;
    std::vector<std::string> cols;
    switch (q) {
        case Quantity::Component: {
            const std::string g = "G_" + names[r.indices[0]] + "_" + names[r.indices[1]];
            cols = {g + "_re", g + "_im", g + "_err"};
            break;
        }
        case Quantity::Det: cols = {"det", "det_err"}; break;
        case Quantity::Eigenvalues:
            for (std::size_t k = 0; k < r.indices.size(); ++k) cols.push_back("eig_" + std::to_string(k + 1));
            cols.push_back("eig_err");
            break;
        case Quantity::BerryConnection:
            for (int i : r.indices) {
                const std::string b = "beta_" + names[i];
                cols.insert(cols.end(), {b, b + "_err", "naive_" + names[i], b + "_imag"});
            }
            break;
        case Quantity::BerryCurvature:
            for (std::size_t a = 0; a < r.indices.size(); ++a) {
                for (std::size_t b = a + 1; b < r.indices.size(); ++b) {
                    const std::string f = "F_" + names[r.indices[a]] + "_" + names[r.indices[b]];
                    cols.insert(cols.end(), {f, f + "_err"});
                }
            }
            cols.push_back("one_sided");
            break;
        case Quantity::PvVsFull: cols = {"det_full", "det_full_err", "det_pv", "det_pv_err", "det_excess"}; break;
        case Quantity::CompareOrders: break;
    }
    return cols;
}

const char* order_prefix(Order o) { return o == 0 ? "analytic_" : o == 1 ? "order1_" : "order2_"; }

}  // namespace

std::vector<std::string> value_columns(const ResolvedRequest& r) {
    if (r.request.quantity != Quantity::CompareOrders) return base_columns(r, r.request.quantity);
    std::vector<std::string> cols;
    for (Order o : r.request.orders) {
        for (const auto& c : base_columns(r, r.request.base)) cols.push_back(order_prefix(o) + c);
    }
    return cols;
}

}  // namespace qgt::cli
