#pragma once

// Grid scans, invariant checks and order comparisons behind the `qgt`
// command-line tool.  Everything here is independent of argument parsing so
// that requests can be built and executed programmatically.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qgt/models.hpp"
#include "qgt/quadrature.hpp"

namespace qgt::cli {

enum class Quantity { Component, Det, Eigenvalues, BerryConnection, BerryCurvature, PvVsFull, CompareOrders };

Quantity parse_quantity(const std::string& name);
const char* quantity_name(Quantity q);

struct Axis {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    int count = 0;
};

// Perturbative order of the symmetric Toda ground state; 0 is the exact state.
using Order = int;

struct ScanRequest {
    std::string model;
    Quantity quantity = Quantity::Component;
    // Quantity evaluated for every order when quantity == CompareOrders.
    Quantity base = Quantity::Component;
    std::vector<std::string> indices;                     // parameter names; empty means all
    std::vector<Axis> vary;                               // one or two axes, first is the slowest
    std::vector<std::pair<std::string, double>> fixed;
    std::vector<Order> orders{0, 1, 2};
    QuadratureSettings settings;
    std::string output;                                   // empty writes to the given stream
    bool emit_plot = false;
};

// "k=0.5:10:80", "kappa=1", "analytic" / "1" / "2".
Axis parse_axis(const std::string& text);
std::pair<std::string, double> parse_fixed(const std::string& text);
Order parse_order(const std::string& text);

// A request checked against its model: every parameter is either varied or
// fixed, exactly once.
struct ResolvedRequest {
    ScanRequest request;
    const ModelDefinition* model = nullptr;
    std::vector<int> axis_params;   // parameter index of each axis
    ParamVector base_point;         // fixed values, varied entries unset
    std::vector<int> indices;       // resolved parameter indices of the quantity
};

// Throws ValidationError naming the offending field.
ResolvedRequest resolve(const ScanRequest& request);

inline constexpr double kEndpointClamp = 1e-6;

struct GridPoint {
    ParamVector params;
    std::string note;   // non-empty when an endpoint was clamped
};

// Row-major grid (last axis fastest).  Endpoints that land on an inadmissible
// parameter point are moved inwards by kEndpointClamp times the axis range.
std::vector<GridPoint> scan_grid(const ResolvedRequest& r);

std::vector<std::string> value_columns(const ResolvedRequest& r);

struct Row {
    ParamVector params;
    std::vector<double> values;   // NaN on failure
    std::string reason;           // empty on success
};

// Evaluates one grid point; numerical failures are reported in the row.
Row evaluate_point(const ResolvedRequest& r, const GridPoint& point);

// Worker count: hardware concurrency, capped by QGT_THREADS when set.
unsigned worker_count();

// Runs body(i) for i in [0, n) on a worker pool.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned workers);

std::vector<Row> run_scan(const ResolvedRequest& r, unsigned workers);

// CSV with a '#' provenance block, a header row and 12 significant digits.
void write_csv(std::ostream& out, const ResolvedRequest& r, const std::vector<Row>& rows);
std::string format_number(double v);

// Gnuplot script plotting every value column of `csv_path`.
std::string gnuplot_script(const ResolvedRequest& r, const std::string& csv_path);

// Fails with ValidationError when the path cannot be opened for writing.
void require_writable(const std::string& path);

// ---------------------------------------------------------------------------
// Invariant checks

enum class Suite { Core, Berry, Zanardi };

Suite parse_suite(const std::string& name);
const char* suite_name(Suite s);

enum class Status { Pass, Fail, Info, Skip };
const char* status_name(Status s);

struct CheckRequest {
    std::string model;
    std::vector<ParamVector> points;
    Suite suite = Suite::Core;
    std::vector<std::string> indices;    // zanardi suite: tensor indices (default depends on the model)
    std::optional<int> truncation;       // zanardi suite: default 20 for flat-osc, 8 otherwise
    QuadratureSettings settings;
};

struct CheckRecord {
    std::string point;
    std::string invariant;
    Status status = Status::Info;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

ParamVector parse_point(const std::string& text);

// Throws ValidationError for unknown models or inadmissible points.
std::vector<CheckRecord> run_check(const CheckRequest& request, unsigned workers);

void write_check(std::ostream& out, const CheckRequest& request, const std::vector<CheckRecord>& records);

bool all_passed(const std::vector<CheckRecord>& records);

}  // namespace qgt::cli
