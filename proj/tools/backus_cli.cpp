#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "backus/errors.hpp"
#include "backus/fem_solver.hpp"
#include "backus/harness.hpp"
#include "backus/mesh.hpp"
#include "backus/potentials.hpp"
#include "backus/source_count.hpp"
#include "backus/trace_data.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDataError = 1;
constexpr int kExitSolverFailure = 2;
constexpr int kExitUsage = 64;

struct CommonArgs {
    std::string config_path;
    std::string instance;
};

// Flags override the config file; an empty instance falls back to the
// config value (default u0).
backus::ExperimentConfig resolve_config(const CommonArgs& args) {
    backus::ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = backus::load_config(args.config_path);
    if (!args.instance.empty()) cfg.instance = args.instance;
    return cfg;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    return file;
}

nlohmann::json diagnostics_json(const backus::NewtonDiagnostics& d) {
    return {{"mesh_h", d.mesh_h},
            {"iterations", d.iterations},
            {"final_update_norm", d.final_update_norm},
            {"final_residual_norm", d.final_residual_norm},
            {"clamp_count", d.clamp_count},
            {"l2_error", d.l2_error},
            {"h1_error", d.h1_error}};
}

int run_solve(const CommonArgs& common, double hmax, const std::string& solution_path) {
    backus::ExperimentConfig cfg = resolve_config(common);
    const backus::Potential3D pot = backus::make_instance(cfg.instance);
    const backus::TraceData data = backus::make_trace(pot);
    std::vector<backus::TriMesh> meshes;
    meshes.push_back(backus::build_square_mesh(hmax));
    const backus::SolveResult result = backus::solve_backus(data, meshes, cfg.options);
    if (!solution_path.empty()) {
        std::ofstream out(solution_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + solution_path);
        backus::dump_solution_csv(result.solutions.back(), data, out);
    }
    std::cout << diagnostics_json(result.diagnostics.back()).dump(2) << "\n";
    return kExitOk;
}

int run_convergence_cmd(const CommonArgs& common, const std::vector<double>& hmax_list,
                        const std::string& out_dir) {
    backus::ExperimentConfig cfg = resolve_config(common);
    if (!hmax_list.empty()) cfg.h_sequence = hmax_list;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const backus::ConvergenceReport report = backus::run_convergence(cfg);
    for (const std::string& path : report.written_files) std::cout << path << "\n";
    if (!report.failure.empty()) {
        std::cerr << report.failure << "\n";
        return kExitSolverFailure;
    }
    return kExitOk;
}

int run_dump_data(const CommonArgs& common, int grid_n, const std::string& out_path) {
    backus::ExperimentConfig cfg = resolve_config(common);
    const backus::Potential3D pot = backus::make_instance(cfg.instance);
    const backus::TraceData data = backus::make_trace(pot);
    std::ofstream file;
    backus::dump_grid_csv(data, grid_n, open_or_stdout(out_path, file));
    return kExitOk;
}

int run_count_sources(const std::string& config_path, double radius,
                      const std::vector<double>& center, int quad_points) {
    const backus::PoleSet2D ps = backus::load_poleset2d(config_path);
    backus::BoundaryCurve curve;
    curve.radius = radius;
    curve.center = {center[0], center[1]};
    curve.quad_points = quad_points;
    const backus::CountReport report = backus::estimate_count(ps, curve);
    const nlohmann::json j = {{"estimate", report.estimate},
                              {"rounded", report.rounded},
                              {"exact_n_minus", report.exact_n_minus},
                              {"n_plus_detected", report.n_plus_detected},
                              {"p_min_on_curve", report.p_min_on_curve}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_check(const CommonArgs& common, int grid_n) {
    backus::ExperimentConfig cfg = resolve_config(common);
    const backus::Potential3D pot = backus::make_instance(cfg.instance);
    const backus::TraceData data = backus::make_trace(pot);
    const backus::AdmissibilityReport report = backus::check_admissible(data, grid_n);
    const nlohmann::json j = {{"admissible", report.admissible()},
                              {"min_p", report.min_p},
                              {"max_p", report.max_p},
                              {"min_margin", report.min_margin},
                              {"sigma_constant", report.sigma_constant},
                              {"sigma_value", report.sigma_value},
                              {"margin_flagged", report.margin_flagged}};
    std::cout << j.dump(2) << "\n";
    return report.admissible() ? kExitOk : kExitDataError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boundary-data potential recovery and pole counting"};
    app.require_subcommand(1);

    CommonArgs common;

    auto* solve = app.add_subcommand("solve", "Solve one instance on one mesh");
    double hmax = 0.1;
    std::string solution_path;
    solve->add_option("--config", common.config_path, "JSON config file");
    solve->add_option("--instance", common.instance, "u0, u1, u0+u1, affine, or a potential file");
    solve->add_option("--hmax", hmax, "target mesh size")->check(CLI::PositiveNumber);
    solve->add_option("--solution", solution_path, "also write the nodal solution CSV here");

    auto* convergence = app.add_subcommand("convergence", "Run a refinement sweep");
    std::vector<double> hmax_list;
    std::string out_dir;
    convergence->add_option("--config", common.config_path, "JSON config file");
    convergence->add_option("--instance", common.instance,
                            "u0, u1, u0+u1, affine, or a potential file");
    convergence->add_option("--hmax", hmax_list, "target mesh sizes, strictly decreasing");
    convergence->add_option("--out-dir", out_dir, "output directory (BACKUS_OUT_DIR overrides)");

    auto* dump = app.add_subcommand("dump-data", "Write the boundary-data grid as CSV");
    int grid_n = 33;
    std::string dump_path;
    dump->add_option("--config", common.config_path, "JSON config file");
    dump->add_option("--instance", common.instance, "u0, u1, u0+u1, affine, or a potential file");
    dump->add_option("--grid", grid_n, "lattice points per side")->check(CLI::Range(2, 100000));
    dump->add_option("--out", dump_path, "output file, '-' for stdout");

    auto* count = app.add_subcommand("count-sources", "Estimate the pole count inside a circle");
    std::string poles_path;
    double radius = 2.0;
    std::vector<double> center{0.0, 0.0};
    int quad_points = 256;
    count->add_option("--config", poles_path, "pole-set JSON file")->required();
    count->add_option("--radius", radius, "circle radius")->check(CLI::PositiveNumber);
    count->add_option("--center", center, "circle center")->expected(2);
    count->add_option("-M,--quad-points", quad_points, "quadrature points")
        ->check(CLI::Range(8, 1 << 24));

    auto* check = app.add_subcommand("check", "Admissibility report for an instance");
    int check_grid = 64;
    check->add_option("--config", common.config_path, "JSON config file");
    check->add_option("--instance", common.instance, "u0, u1, u0+u1, affine, or a potential file");
    check->add_option("--grid", check_grid, "lattice points per side")->check(CLI::Range(2, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Successful --help exits 0; anything malformed is a usage error.
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (solve->parsed()) return run_solve(common, hmax, solution_path);
        if (convergence->parsed()) return run_convergence_cmd(common, hmax_list, out_dir);
        if (dump->parsed()) return run_dump_data(common, grid_n, dump_path);
        if (count->parsed()) return run_count_sources(poles_path, radius, center, quad_points);
        if (check->parsed()) return run_check(common, check_grid);
    } catch (const backus::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const backus::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitUsage;
}
