#pragma once

#include <optional>
#include <string>
#include <vector>

#include "backus/fem_solver.hpp"
#include "backus/potentials.hpp"
#include "backus/trace_data.hpp"

namespace backus {

struct ExperimentConfig {
    std::string instance = "u0";  // u0, u1, u0+u1, affine, or a potential JSON path
    std::vector<double> h_sequence{0.2, 0.1, 0.05, 0.025};
    SolveOptions options;
    std::string output_dir = ".";  // BACKUS_OUT_DIR wins when set
};

struct ConvergenceRow {
    double h = 0.0;  // realized mesh size, not the requested target
    double l2 = 0.0;
    double h1 = 0.0;
    int iterations = 0;
    long clamp_count = 0;
};

struct ConvergenceReport {
    std::string instance;
    std::vector<ConvergenceRow> rows;  // ordered by h descending
    std::optional<double> rate_l2;     // absent when errors sit at round-off
    std::optional<double> rate_h1;
    std::string failure;               // non-empty when the sweep stopped early
    std::vector<std::string> written_files;
};

// Least-squares slope of log(err) against log(h). Needs at least two
// points, all positive; anything else raises std::invalid_argument.
double fit_rate(const std::vector<double>& hs, const std::vector<double>& errs);

// Named instances: u0 (shifted quadratic background), u1 (unit monopole
// above the plane), u0+u1, affine (x1 + 2 x3). Anything else is read as
// a potential JSON file path.
Potential3D make_instance(const std::string& name_or_path);

// Full refinement sweep: builds the mesh sequence, runs the solver,
// fits rates, and writes {instance}_convergence.csv,
// {instance}_report.json and {instance}_loglog.dat into the output
// directory. A solver failure mid-sweep yields the completed rows plus
// a failure annotation instead of an exception.
ConvergenceReport run_convergence(const ExperimentConfig& cfg);

// Reads back a convergence CSV table written by run_convergence.
std::vector<ConvergenceRow> read_convergence_csv(const std::string& path);

// Config JSON: {"instance": ..., "h_sequence": [...], "options": {...},
// "output_dir": ...}; every key is optional, unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace backus
