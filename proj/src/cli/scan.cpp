#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qgt/cli.hpp"
#include "qgt/tensor.hpp"

namespace qgt::cli {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

// Sum over entries of |cofactor| times the entry's error bound.
double det_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& err) {
    const Eigen::Index m = a.rows();
    if (m == 1) return err(0, 0);
    double total = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            Eigen::MatrixXd minor(m - 1, m - 1);
            for (Eigen::Index i = 0, mi = 0; i < m; ++i) {
                if (i == r) continue;
                for (Eigen::Index j = 0, mj = 0; j < m; ++j) {
                    if (j == c) continue;
                    minor(mi, mj++) = a(i, j);
                }
                ++mi;
            }
            total += std::abs(minor.determinant()) * err(r, c);
        }
    }
    return total;
}

ParametricWaveFunction state_for(const ResolvedRequest& r, Order order, Params lam) {
    if (order == 0) return ground_state(*r.model, lam);
    return perturbative_ground_state(*r.model, order, lam);
}

void append_values(const ResolvedRequest& r, Quantity q, const ParametricWaveFunction& psi, Params lam,
                   std::vector<double>& out) {
    const MetricField& metric = r.model->metric;
    const QuadratureSettings& s = r.request.settings;
    switch (q) {
        case Quantity::Component: {
            const QGTMatrix g = qgt_matrix(psi, metric, lam, r.indices, s);
            out.insert(out.end(), {g.entries(0, 1).real(), g.entries(0, 1).imag(), g.error_estimates(0, 1)});
            break;
        }
        case Quantity::Det: {
            const QGTMatrix g = qgt_matrix(psi, metric, lam, r.indices, s);
            const TensorSpectrum sp = spectrum(g);
            out.insert(out.end(), {sp.det, det_error(g.entries.real(), g.error_estimates)});
            break;
        }
        case Quantity::Eigenvalues: {
            const QGTMatrix g = qgt_matrix(psi, metric, lam, r.indices, s);
            TensorSpectrum sp = spectrum(g);
            std::sort(sp.eigenvalues.begin(), sp.eigenvalues.end());
            out.insert(out.end(), sp.eigenvalues.begin(), sp.eigenvalues.end());
            // Weyl: eigenvalues move by at most the spectral norm of the perturbation,
            // which the Frobenius norm of the error bounds.
            out.push_back(g.error_estimates.norm());
            break;
        }
        case Quantity::BerryConnection:
            for (int i : r.indices) {
                const ConnectionResult c = berry_connection(psi, metric, i, lam, s);
                out.insert(out.end(), {c.value, c.error, c.naive, c.imaginary_residual});
            }
            break;
        case Quantity::BerryCurvature: {
            bool one_sided = false;
            for (std::size_t a = 0; a < r.indices.size(); ++a) {
                for (std::size_t b = a + 1; b < r.indices.size(); ++b) {
                    const CurvatureResult f = berry_curvature(psi, metric, r.indices[a], r.indices[b], lam, s);
                    out.insert(out.end(), {f.value, f.error});
                    one_sided = one_sided || f.one_sided;
                }
            }
            out.push_back(one_sided ? 1.0 : 0.0);
            break;
        }
        case Quantity::PvVsFull: {
            const auto [full, pv] = qgt_full_and_pv(psi, metric, lam, r.indices, s);
            const double df = spectrum(full).det, dp = spectrum(pv).det;
            out.insert(out.end(), {df, det_error(full.entries.real(), full.error_estimates), dp,
                                   det_error(pv.entries.real(), pv.error_estimates), df - dp});
            break;
        }
        case Quantity::CompareOrders: break;
    }
}

std::string single_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Row evaluate_point(const ResolvedRequest& r, const GridPoint& point) {
    Row row;
    row.params = point.params;
    const std::size_t ncols = value_columns(r).size();
    try {
        r.model->require_admissible(point.params);
        if (r.request.quantity == Quantity::CompareOrders) {
            for (Order o : r.request.orders) {
                append_values(r, r.request.base, state_for(r, o, point.params), point.params, row.values);
            }
        } else {
            append_values(r, r.request.quantity, state_for(r, 0, point.params), point.params, row.values);
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        row.values.assign(ncols, std::nan(""));
        row.reason = single_line(e.what());
    }
    return row;
}

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QGT_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (*end != '\0' || cap < 1) {
            throw ValidationError(std::string("QGT_THREADS: expected a positive integer, got '") + env + "'");
        }
        n = std::min<unsigned>(n, static_cast<unsigned>(std::min<long>(cap, 1024)));
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned workers) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<Row> run_scan(const ResolvedRequest& r, unsigned workers) {
    const std::vector<GridPoint> grid = scan_grid(r);
    std::vector<Row> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { rows[i] = evaluate_point(r, grid[i]); }, workers);
    return rows;
}

void write_csv(std::ostream& out, const ResolvedRequest& r, const std::vector<Row>& rows) {
    const ScanRequest& q = r.request;
    const ModelDefinition& m = *r.model;
    const std::string command = q.quantity == Quantity::CompareOrders ? "compare" : "scan";
    out << "# qgt " << command << "\n";
    out << "# model = " << m.name << "\n";
    if (q.quantity == Quantity::CompareOrders) {
        out << "# quantity = " << quantity_name(q.base) << "\n";
        std::string orders;
        for (Order o : q.orders) orders += (orders.empty() ? "" : ",") + (o == 0 ? std::string("analytic") : std::to_string(o));
        out << "# orders = " << orders << "\n";
    } else {
        out << "# quantity = " << quantity_name(q.quantity) << "\n";
    }
    std::string indices;
    for (int i : r.indices) indices += (indices.empty() ? "" : ",") + m.param_names[i];
    out << "# indices = " << indices << "\n";
    std::string vary;
    for (const Axis& a : q.vary) {
        vary += (vary.empty() ? "" : ",") + a.name + "=" + format_number(a.min) + ":" + format_number(a.max) + ":" +
                std::to_string(a.count);
    }
    out << "# vary = " << vary << "\n";
    std::string fix;
    for (std::size_t i = 0; i < m.dim_params(); ++i) {
        if (std::isnan(r.base_point[i])) continue;
        fix += (fix.empty() ? "" : ",") + m.param_names[i] + "=" + format_number(r.base_point[i]);
    }
    out << "# fix = " << fix << "\n";
    out << "# rel-tol = " << format_number(q.settings.rel_tol) << "\n";
    out << "# abs-tol = " << format_number(q.settings.abs_tol) << "\n";
    out << "# max-subdivisions = " << q.settings.max_subdivisions << "\n";
    out << "# tail-tol = " << format_number(q.settings.truncation_tail_tol) << "\n";
    const std::vector<GridPoint> grid = scan_grid(r);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!grid[i].note.empty()) out << "# clamped row " << i << ": " << grid[i].note << "\n";
    }

    for (std::size_t k = 0; k < q.vary.size(); ++k) out << q.vary[k].name << ",";
    for (const auto& c : value_columns(r)) out << c << ",";
    out << "reason\n";
    for (const Row& row : rows) {
        for (int p : r.axis_params) out << format_number(row.params[p]) << ",";
        for (double v : row.values) out << format_number(v) << ",";
        out << quoted(row.reason) << "\n";
    }
}

std::string gnuplot_script(const ResolvedRequest& r, const std::string& csv_path) {
    const auto& axes = r.request.vary;
    const std::vector<std::string> cols = value_columns(r);
    const std::string stem = csv_path.size() > 4 && csv_path.ends_with(".csv") ? csv_path.substr(0, csv_path.size() - 4)
                                                                               : csv_path;
    std::ostringstream gp;
    gp << "# gnuplot script for " << csv_path << "\n";
    gp << "set datafile separator ','\n";
    gp << "set datafile commentschars '#'\n";
    gp << "set datafile missing 'nan'\n";
    gp << "set key autotitle columnhead\n";
    gp << "set terminal pngcairo size 900,650\n";
    gp << "set xlabel '" << axes[0].name << "'\n";
    if (axes.size() == 2) {
        gp << "set ylabel '" << axes[1].name << "'\n";
        gp << "set palette defined (-1 'blue', 0 'white', 1 'red')\n";
    }
    const std::size_t first = axes.size() + 1;  // 1-based gnuplot column of the first value
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::string& name = cols[c];
        if (name.ends_with("_err") || name.ends_with("_imag") || name == "one_sided") continue;
        gp << "set output '" << stem << "_" << name << ".png'\n";
        gp << "set title '" << name << "' noenhanced\n";
        if (axes.size() == 1) {
            gp << "plot '" << csv_path << "' using 1:" << first + c << " with lines notitle\n";
        } else {
            gp << "plot '" << csv_path << "' using 1:2:" << first + c
               << " with points pointtype 5 pointsize 0.6 palette notitle\n";
        }
    }
    return gp.str();
}

void require_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::app);
    if (!probe) throw ValidationError("out: cannot open '" + path + "' for writing");
}

}  // namespace qgt::cli
