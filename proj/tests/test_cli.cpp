#include "doctest.h"

#include <random>
#include <sstream>

#include "qgt/cli.hpp"

using namespace qgt;
using namespace qgt::cli;

namespace {

ScanRequest component_request() {
    ScanRequest r;
    r.model = "sym-toda";
    r.quantity = Quantity::Component;
    r.indices = {"kappa", "lambda"};
    r.vary = {parse_axis("k=0.5:10:3"), parse_axis("lambda=0.05:5:2")};
    r.fixed = {parse_fixed("kappa=1"), parse_fixed("beta=1")};
    return r;
}

std::string validation_message(const ScanRequest& r) {
    try {
        resolve(r);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("parsing of axes, fixed values and orders") {
    const Axis a = parse_axis("lambda=0.05:5:80");
    CHECK(a.name == "lambda");
    CHECK(a.min == 0.05);
    CHECK(a.max == 5.0);
    CHECK(a.count == 80);
    CHECK_THROWS_AS(parse_axis("k=1:2"), ValidationError);
    CHECK_THROWS_AS(parse_axis("k=a:2:3"), ValidationError);
    CHECK(parse_fixed("beta=1.5").second == 1.5);
    CHECK(parse_order("analytic") == 0);
    CHECK(parse_order("2") == 2);
    CHECK_THROWS_AS(parse_order("3"), ValidationError);
    CHECK(parse_quantity("pv-vs-full") == Quantity::PvVsFull);
    CHECK_THROWS_AS(parse_quantity("metric"), ValidationError);
}

TEST_CASE("validation names the offending field") {
    ScanRequest r = component_request();
    r.vary[0].count = 1;
    const std::string msg = validation_message(r);
    CHECK(msg.find("count") != std::string::npos);
    CHECK(msg.find("count=1") != std::string::npos);

    r = component_request();
    r.vary[1].max = r.vary[1].min;
    CHECK(validation_message(r).rfind("min/max", 0) == 0);

    r = component_request();
    r.fixed.pop_back();
    CHECK(validation_message(r).find("beta") != std::string::npos);

    r = component_request();
    r.fixed.push_back({"lambda", 1.0});
    CHECK(validation_message(r).rfind("fix", 0) == 0);

    r = component_request();
    r.indices = {"kappa"};
    CHECK(validation_message(r).rfind("indices", 0) == 0);

    r = component_request();
    r.model = "anh-toda";
    r.quantity = Quantity::CompareOrders;
    CHECK(validation_message(r).rfind("model", 0) == 0);

    r = component_request();
    r.settings.rel_tol = -1;
    CHECK(validation_message(r).rfind("settings", 0) == 0);

    CHECK(validation_message(component_request()).empty());
}

TEST_CASE("grid is row-major with the last axis fastest") {
    const ResolvedRequest r = resolve(component_request());
    const auto grid = scan_grid(r);
    REQUIRE(grid.size() == 6);
    CHECK(grid[0].params[0] == 0.5);
    CHECK(grid[0].params[2] == 0.05);
    CHECK(grid[1].params[0] == 0.5);
    CHECK(grid[1].params[2] == 5.0);
    CHECK(grid[2].params[0] == doctest::Approx(5.25));
    CHECK(grid[5].params[0] == 10.0);
    for (const auto& g : grid) CHECK(g.params[1] == 1.0);
}

TEST_CASE("inadmissible endpoints are clamped by a millionth of the range") {
    ScanRequest q = component_request();
    q.vary[1] = parse_axis("lambda=0:4:3");
    const ResolvedRequest r = resolve(q);
    const auto grid = scan_grid(r);
    CHECK(grid[0].params[2] == doctest::Approx(4e-6));
    CHECK(grid[0].params[0] == 0.5);  // only the offending coordinate moves
    CHECK_FALSE(grid[0].note.empty());
    CHECK(grid[1].note.empty());
    CHECK(grid[1].params[2] == 2.0);
}

TEST_CASE("interior points on a singular locus fail with a reason, not an abort") {
    ScanRequest q = component_request();
    q.vary = {parse_axis("lambda=-1:1:3")};
    q.fixed = {parse_fixed("k=1"), parse_fixed("kappa=1"), parse_fixed("beta=1")};
    const ResolvedRequest r = resolve(q);
    const auto rows = run_scan(r, 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].reason.empty());
    CHECK_FALSE(rows[1].reason.empty());
    CHECK(std::isnan(rows[1].values[0]));
    CHECK(rows[2].reason.empty());
}

TEST_CASE("columns per quantity") {
    ScanRequest q = component_request();
    CHECK(value_columns(resolve(q)) ==
          std::vector<std::string>{"G_kappa_lambda_re", "G_kappa_lambda_im", "G_kappa_lambda_err"});
    q.quantity = Quantity::Eigenvalues;
    q.indices.clear();
    CHECK(value_columns(resolve(q)).size() == 5);
    q.quantity = Quantity::CompareOrders;
    q.base = Quantity::Det;
    q.indices = {"k", "lambda"};
    q.orders = {0, 2};
    CHECK(value_columns(resolve(q)) ==
          std::vector<std::string>{"analytic_det", "analytic_det_err", "order2_det", "order2_det_err"});
}

TEST_CASE("CSV output is deterministic across worker counts") {
    ScanRequest q;
    q.model = "flat-osc";
    q.quantity = Quantity::Det;
    q.vary = {parse_axis("k=0.5:2:3"), parse_axis("kappa=0:1:2")};
    const ResolvedRequest r = resolve(q);
    std::ostringstream a, b;
    write_csv(a, r, run_scan(r, 1));
    write_csv(b, r, run_scan(r, 3));
    CHECK(a.str() == b.str());
    const std::string s = a.str();
    CHECK(s.rfind("# qgt scan\n# model = flat-osc\n", 0) == 0);
    CHECK(s.find("\nk,kappa,det,det_err,reason\n") != std::string::npos);
    CHECK(s.find("# vary = k=0.5:2:3,kappa=0:1:2") != std::string::npos);
}

TEST_CASE("number formatting uses 12 significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-2.5e-17) == "-2.5e-17");
    CHECK(format_number(6400) == "6400");
}

TEST_CASE("plot script references the CSV") {
    ScanRequest q = component_request();
    const std::string gp = gnuplot_script(resolve(q), "out/gkl.csv");
    CHECK(gp.find("set datafile separator ','") != std::string::npos);
    CHECK(gp.find("'out/gkl.csv' using 1:2:3") != std::string::npos);
    CHECK(gp.find("out/gkl_G_kappa_lambda_re.png") != std::string::npos);
    CHECK(gp.find("_err") == std::string::npos);
}

TEST_CASE("worker pool visits every index exactly once") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }, 3),
                    std::runtime_error);
}

TEST_CASE("check requests") {
    CHECK(parse_point("1, 2.5,3,4") == ParamVector{1, 2.5, 3, 4});
    CHECK_THROWS_AS(parse_point("1,x"), ValidationError);
    CHECK(parse_suite("berry") == Suite::Berry);
    CHECK_THROWS_AS(parse_suite("all"), ValidationError);

    CheckRequest req;
    req.model = "sym-toda";
    req.points = {ParamVector{1, 1, 0, 1}};
    CHECK_THROWS_AS(run_check(req, 1), ValidationError);
    req.points = {ParamVector{1, 1, 1}};
    CHECK_THROWS_AS(run_check(req, 1), ValidationError);

    req.model = "flat-osc";
    req.points = {ParamVector{1, 1}};
    const auto records = run_check(req, 1);
    CHECK(all_passed(records));
    CHECK(records.size() >= 6);
    std::ostringstream out;
    write_check(out, req, records);
    CHECK(out.str().find("core,\"(1,1)\",normalization,pass,") != std::string::npos);
}

TEST_CASE("property: random grids have row count equal to the product of counts") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> count(2, 7);
    std::uniform_real_distribution<double> lo(0.2, 1.0), width(0.1, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        ScanRequest q;
        q.model = "flat-osc";
        q.quantity = Quantity::Det;
        const double a = lo(rng), b = lo(rng);
        q.vary = {Axis{"k", a, a + width(rng), count(rng)}, Axis{"kappa", b, b + width(rng), count(rng)}};
        const ResolvedRequest r = resolve(q);
        const auto grid = scan_grid(r);
        CHECK(grid.size() == static_cast<std::size_t>(q.vary[0].count * q.vary[1].count));
        for (std::size_t n = 1; n < grid.size(); ++n) {
            // Lexicographic order: (k, kappa) strictly increasing.
            const bool ordered = grid[n - 1].params[0] < grid[n].params[0] ||
                                 (grid[n - 1].params[0] == grid[n].params[0] && grid[n - 1].params[1] < grid[n].params[1]);
            CHECK(ordered);
        }
    }
}
