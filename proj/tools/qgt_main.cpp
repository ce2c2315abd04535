// qgt: grid scans of the generalized geometric tensor and Berry quantities,
// invariant checks, and exact-vs-perturbative comparisons.
//
//   qgt scan    --model M --quantity Q [--indices a,b] --vary p=min:max:count[,q=...] --fix r=v,... [--out f.csv]
//   qgt compare --model sym-toda --quantity Q [--orders analytic,1,2] ...        (same grid options)
//   qgt check   --model M --suite core|berry|zanardi --point v1,v2,... [--point ...]
//
// Every subcommand accepts --config FILE with one `key = value` per line,
// the keys being the long flag names; flags given on the command line win.
// Exit status: 0 success, 1 invalid request, 2 failed invariant check.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "qgt/cli.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitCheckFailed = 2;

struct Tolerances {
    double rel_tol = qgt::QuadratureSettings{}.rel_tol;
    double abs_tol = qgt::QuadratureSettings{}.abs_tol;
    int max_subdivisions = qgt::QuadratureSettings{}.max_subdivisions;
    double tail_tol = qgt::QuadratureSettings{}.truncation_tail_tol;

    qgt::QuadratureSettings settings() const {
        qgt::QuadratureSettings s;
        s.rel_tol = rel_tol;
        s.abs_tol = abs_tol;
        s.max_subdivisions = max_subdivisions;
        s.truncation_tail_tol = tail_tol;
        return s;
    }
};

void add_tolerances(CLI::App* app, Tolerances& t) {
    app->add_option("--rel-tol", t.rel_tol, "quadrature relative tolerance")->capture_default_str();
    app->add_option("--abs-tol", t.abs_tol, "quadrature absolute tolerance")->capture_default_str();
    app->add_option("--max-subdivisions", t.max_subdivisions, "bisection depth limit per panel")->capture_default_str();
    app->add_option("--tail-tol", t.tail_tol, "relative tail truncation of infinite ranges")->capture_default_str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Appends `--key value` for every config-file entry whose flag is absent
// from the command line.
std::vector<std::string> with_config(std::vector<std::string> args, const CLI::App& app) {
    std::string path;
    std::set<std::string> given;
    std::size_t sub = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (sub == args.size() && args[i].rfind("-", 0) != 0) sub = i;
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        if (args[i].rfind("--", 0) == 0) given.insert(args[i].substr(2, args[i].find('=') - 2));
    }
    if (path.empty() || sub == args.size()) return args;
    const CLI::App* cmd = nullptr;
    for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; })) {
        if (s->get_name() == args[sub]) cmd = s;
    }
    if (cmd == nullptr) return args;

    std::ifstream in(path);
    if (!in) throw qgt::ValidationError("config: cannot read '" + path + "'");
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw qgt::ValidationError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (given.count(key)) continue;
        const CLI::Option* opt = nullptr;
        try {
            opt = cmd->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw qgt::ValidationError("config: unknown key '" + key + "' for " + cmd->get_name());
        }
        if (opt->get_type_size() == 0) {
            if (value == "true" || value == "1" || value == "yes") args.push_back("--" + key);
            continue;
        }
        if (opt->get_expected_max() > 1) {
            // Repeatable options (e.g. point) may appear on several lines.
            args.push_back("--" + key);
            args.push_back(value);
            continue;
        }
        args.push_back("--" + key);
        args.push_back(value);
        given.insert(key);
    }
    return args;
}

struct GridOptions {
    std::string model;
    std::string quantity = "component";
    std::vector<std::string> indices, vary, fix, orders{"analytic", "1", "2"};
    std::string out;
    bool emit_plot = false;
    Tolerances tol;
};

void add_grid_options(CLI::App* app, GridOptions& g, bool compare) {
    app->add_option("--model", g.model, "model name (sym-toda, anh-toda, exp-gauge, flat-osc)")->required();
    app->add_option("--quantity", g.quantity,
                    compare ? "quantity evaluated per order (component, det, eigenvalues, ...)"
                            : "component, det, eigenvalues, berry-connection, berry-curvature, pv-vs-full, "
                              "compare-orders")
        ->capture_default_str();
    app->add_option("--indices", g.indices, "parameter names of the tensor block")->delimiter(',');
    app->add_option("--vary", g.vary, "name=min:max:count (one or two)")->delimiter(',')->required();
    app->add_option("--fix", g.fix, "name=value for every parameter not varied")->delimiter(',');
    if (compare) app->add_option("--orders", g.orders, "subset of analytic,1,2")->delimiter(',');
    app->add_option("--out", g.out, "output CSV (standard output when omitted)");
    app->add_flag("--emit-plot", g.emit_plot, "also write a gnuplot script next to the CSV");
    app->add_option("--config", "file of key = value lines");
    add_tolerances(app, g.tol);
}

qgt::cli::ScanRequest make_request(const GridOptions& g, bool compare) {
    using namespace qgt::cli;
    ScanRequest r;
    r.model = g.model;
    r.quantity = parse_quantity(g.quantity);
    if (compare) {
        r.base = r.quantity;
        r.quantity = Quantity::CompareOrders;
        r.orders.clear();
        for (const auto& o : g.orders) r.orders.push_back(parse_order(o));
    }
    r.indices = g.indices;
    for (const auto& v : g.vary) r.vary.push_back(parse_axis(v));
    for (const auto& f : g.fix) r.fixed.push_back(parse_fixed(f));
    r.settings = g.tol.settings();
    r.output = g.out;
    r.emit_plot = g.emit_plot;
    return r;
}

int run_grid(const GridOptions& g, bool compare) {
    using namespace qgt::cli;
    const ResolvedRequest r = resolve(make_request(g, compare));
    if (r.request.emit_plot && r.request.output.empty()) throw qgt::ValidationError("emit-plot: requires --out");
    if (!r.request.output.empty()) {
        require_writable(r.request.output);
        if (r.request.emit_plot) require_writable(r.request.output + ".gp");
    }
    const unsigned workers = worker_count();
    const std::vector<Row> rows = run_scan(r, workers);
    std::size_t failed = 0;
    for (const Row& row : rows) failed += row.reason.empty() ? 0 : 1;

    if (r.request.output.empty()) {
        write_csv(std::cout, r, rows);
    } else {
        std::ofstream out(r.request.output, std::ios::trunc);
        write_csv(out, r, rows);
        if (r.request.emit_plot) {
            std::ofstream gp(r.request.output + ".gp", std::ios::trunc);
            gp << gnuplot_script(r, r.request.output);
        }
        std::cerr << rows.size() << " rows written to " << r.request.output;
        if (failed) std::cerr << " (" << failed << " failed, see the reason column)";
        std::cerr << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized quantum geometric tensor on parameter-dependent curved spaces"};
    app.require_subcommand(1);

    GridOptions scan_opts;
    CLI::App* scan = app.add_subcommand("scan", "evaluate a quantity on a one- or two-parameter grid");
    add_grid_options(scan, scan_opts, false);

    GridOptions compare_opts;
    CLI::App* compare = app.add_subcommand("compare", "exact vs perturbative ground states on a grid (sym-toda)");
    add_grid_options(compare, compare_opts, true);

    std::string check_model, suite = "core", check_out;
    std::vector<std::string> points, check_indices;
    int truncation = -1;
    Tolerances check_tol;
    CLI::App* check = app.add_subcommand("check", "run an invariant suite at parameter points");
    check->add_option("--model", check_model, "model name")->required();
    check->add_option("--suite", suite, "core, berry or zanardi")->capture_default_str();
    check->add_option("--point", points, "comma-separated parameter values (repeatable)")->required();
    check->add_option("--indices", check_indices, "zanardi suite: tensor indices")->delimiter(',');
    check->add_option("--truncation", truncation, "zanardi suite: maximal total quanta M");
    check->add_option("--out", check_out, "report CSV (standard output when omitted)");
    check->add_option("--config", "file of key = value lines");
    add_tolerances(check, check_tol);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = with_config(std::move(args), app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    } catch (const qgt::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (*scan) return run_grid(scan_opts, false);
        if (*compare) return run_grid(compare_opts, true);

        qgt::cli::CheckRequest req;
        req.model = check_model;
        req.suite = qgt::cli::parse_suite(suite);
        for (const auto& p : points) req.points.push_back(qgt::cli::parse_point(p));
        req.indices = check_indices;
        if (truncation >= 0) req.truncation = truncation;
        else if (check->count("--truncation")) throw qgt::ValidationError("truncation: must be non-negative");
        req.settings = check_tol.settings();
        if (!check_out.empty()) qgt::cli::require_writable(check_out);
        const auto records = qgt::cli::run_check(req, qgt::cli::worker_count());
        if (check_out.empty()) {
            qgt::cli::write_check(std::cout, req, records);
        } else {
            std::ofstream out(check_out, std::ios::trunc);
            qgt::cli::write_check(out, req, records);
        }
        const bool ok = qgt::cli::all_passed(records);
        std::cerr << (ok ? "all invariants passed" : "invariant check failed") << "\n";
        return ok ? kExitOk : kExitCheckFailed;
    } catch (const qgt::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}
