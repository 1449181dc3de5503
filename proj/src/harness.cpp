#include "backus/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "backus/errors.hpp"
#include "backus/mesh.hpp"

namespace backus {

namespace {

// Below this the errors are round-off of an exactly representable
// solution and a power-law fit is meaningless.
constexpr double kRateFloor = 1e-12;

void validate_h_sequence(const std::vector<double>& hs) {
    if (hs.empty()) throw std::invalid_argument("h_sequence must not be empty");
    for (size_t i = 0; i < hs.size(); ++i) {
        if (!(hs[i] > 0.0) || !(hs[i] <= 1.0))
            throw std::invalid_argument("h_sequence entries must lie in (0, 1]");
        if (i > 0 && !(hs[i] < hs[i - 1]))
            throw std::invalid_argument("h_sequence must be strictly decreasing");
    }
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    const char* env = std::getenv("BACKUS_OUT_DIR");
    std::filesystem::path dir = (env && *env) ? env : cfg.output_dir;
    if (dir.empty()) dir = ".";
    std::filesystem::create_directories(dir);
    return dir;
}

// File-path instances keep only the stem so output names stay flat.
std::string instance_stem(const std::string& instance) {
    if (instance.find('/') == std::string::npos && instance.find('\\') == std::string::npos)
        return instance;
    return std::filesystem::path(instance).stem().string();
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::optional<double> fit_column(const std::vector<ConvergenceRow>& rows,
                                 double ConvergenceRow::*column) {
    if (rows.size() < 2) return std::nullopt;
    std::vector<double> hs, errs;
    for (const ConvergenceRow& r : rows) {
        if (!(r.*column > kRateFloor)) return std::nullopt;
        hs.push_back(r.h);
        errs.push_back(r.*column);
    }
    return fit_rate(hs, errs);
}

void write_csv(const ConvergenceReport& report, std::ostream& out) {
    out << "h,l2,h1,iterations,clamp_count\n";
    char line[256];
    for (const ConvergenceRow& r : report.rows) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d,%ld\n", r.h, r.l2, r.h1,
                      r.iterations, r.clamp_count);
        out << line;
    }
}

void write_json(const ConvergenceReport& report, const SolveOptions& opts, std::ostream& out) {
    nlohmann::json j;
    j["instance"] = report.instance;
    j["rows"] = nlohmann::json::array();
    for (const ConvergenceRow& r : report.rows)
        j["rows"].push_back({{"h", r.h},
                             {"l2", r.l2},
                             {"h1", r.h1},
                             {"iterations", r.iterations},
                             {"clamp_count", r.clamp_count}});
    if (report.rate_l2)
        j["rate_l2"] = *report.rate_l2;
    else
        j["rate_l2"] = nullptr;
    if (report.rate_h1)
        j["rate_h1"] = *report.rate_h1;
    else
        j["rate_h1"] = nullptr;
    j["options"] = {{"newton_tol", opts.newton_tol},
                    {"max_iters", opts.max_iters},
                    {"ellipticity_floor", opts.ellipticity_floor},
                    {"line_search", opts.line_search},
                    {"max_halvings", opts.max_halvings},
                    {"assembly_quadrature_degree", opts.assembly_quadrature_degree},
                    {"norm_quadrature_degree", opts.norm_quadrature_degree}};
    if (!report.failure.empty()) j["failure"] = report.failure;
    out << j.dump(2) << "\n";
}

void write_loglog(const ConvergenceReport& report, std::ostream& out) {
    out << "# log10(h)  log10(l2)  log10(h1)\n";
    char line[256];
    for (const ConvergenceRow& r : report.rows) {
        if (!(r.l2 > 0.0) || !(r.h1 > 0.0)) continue;  // round-off rows have no log
        std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", std::log10(r.h), std::log10(r.l2),
                      std::log10(r.h1));
        out << line;
    }
}

}  // namespace

double fit_rate(const std::vector<double>& hs, const std::vector<double>& errs) {
    if (hs.size() != errs.size()) throw std::invalid_argument("fit_rate: length mismatch");
    if (hs.size() < 2) throw std::invalid_argument("fit_rate: need at least two points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < hs.size(); ++i) {
        if (!(hs[i] > 0.0) || !(errs[i] > 0.0))
            throw std::invalid_argument("fit_rate: inputs must be positive");
        mx += std::log(hs[i]);
        my += std::log(errs[i]);
    }
    mx /= static_cast<double>(hs.size());
    my /= static_cast<double>(hs.size());
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < hs.size(); ++i) {
        const double dx = std::log(hs[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(errs[i]) - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: mesh sizes must not coincide");
    return sxy / sxx;
}

Potential3D make_instance(const std::string& name_or_path) {
    if (name_or_path == "u0") {
        Potential3D pot;
        pot.background = QuadraticBackground3D{{-2.0, -3.0, -2.5}};
        return pot;
    }
    if (name_or_path == "u1") {
        Potential3D pot;
        pot.terms.push_back(PointTerm3D{{0.2, 0.1, 0.5}, 1.0, {0, 0, 0}});
        return pot;
    }
    if (name_or_path == "u0+u1") {
        Potential3D pot;
        pot.background = QuadraticBackground3D{{-2.0, -3.0, -2.5}};
        pot.terms.push_back(PointTerm3D{{0.2, 0.1, 0.5}, 1.0, {0, 0, 0}});
        return pot;
    }
    if (name_or_path == "affine") {
        Potential3D pot;
        pot.affine = {0.0, 1.0, 0.0, 2.0};
        return pot;
    }
    return load_potential3d(name_or_path);
}

ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
    validate_h_sequence(cfg.h_sequence);
    const Potential3D pot = make_instance(cfg.instance);
    const TraceData data = make_trace(pot);

    std::vector<TriMesh> meshes;
    meshes.reserve(cfg.h_sequence.size());
    for (double h : cfg.h_sequence) meshes.push_back(build_square_mesh(h));
    for (size_t i = 1; i < meshes.size(); ++i)
        if (!(meshes[i].h_max_actual < meshes[i - 1].h_max_actual))
            throw std::invalid_argument(
                "h_sequence maps to a non-decreasing realized mesh size; spread the targets");

    ConvergenceReport report;
    report.instance = instance_stem(cfg.instance);

    std::vector<NewtonDiagnostics> diagnostics;
    try {
        SolveResult result = solve_backus(data, meshes, cfg.options);
        diagnostics = std::move(result.diagnostics);
    } catch (const NewtonFailure& failure) {
        diagnostics = failure.completed.diagnostics;
        std::ostringstream msg;
        msg << "solver failed at h = " << failure.diagnostics.mesh_h << ": " << failure.what();
        report.failure = msg.str();
    }

    for (const NewtonDiagnostics& d : diagnostics)
        report.rows.push_back({d.mesh_h, d.l2_error, d.h1_error, d.iterations, d.clamp_count});
    report.rate_l2 = fit_column(report.rows, &ConvergenceRow::l2);
    report.rate_h1 = fit_column(report.rows, &ConvergenceRow::h1);

    const std::filesystem::path dir = resolve_output_dir(cfg);
    const std::string stem = report.instance;
    const std::filesystem::path csv_path = dir / (stem + "_convergence.csv");
    const std::filesystem::path json_path = dir / (stem + "_report.json");
    const std::filesystem::path dat_path = dir / (stem + "_loglog.dat");
    {
        std::ofstream out = open_output(csv_path);
        write_csv(report, out);
    }
    {
        std::ofstream out = open_output(json_path);
        write_json(report, cfg.options, out);
    }
    {
        std::ofstream out = open_output(dat_path);
        write_loglog(report, out);
    }
    report.written_files = {csv_path.string(), json_path.string(), dat_path.string()};
    return report;
}

std::vector<ConvergenceRow> read_convergence_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "h,l2,h1,iterations,clamp_count")
        throw DataError(path + ": unexpected table header");
    std::vector<ConvergenceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ConvergenceRow r;
        char* end = nullptr;
        const char* s = line.c_str();
        r.h = std::strtod(s, &end);
        if (end == s || *end != ',') throw DataError(path + ": malformed row '" + line + "'");
        s = end + 1;
        r.l2 = std::strtod(s, &end);
        if (end == s || *end != ',') throw DataError(path + ": malformed row '" + line + "'");
        s = end + 1;
        r.h1 = std::strtod(s, &end);
        if (end == s || *end != ',') throw DataError(path + ": malformed row '" + line + "'");
        s = end + 1;
        r.iterations = static_cast<int>(std::strtol(s, &end, 10));
        if (end == s || *end != ',') throw DataError(path + ": malformed row '" + line + "'");
        s = end + 1;
        r.clamp_count = std::strtol(s, &end, 10);
        if (end == s || *end != '\0') throw DataError(path + ": malformed row '" + line + "'");
        rows.push_back(r);
    }
    return rows;
}

ExperimentConfig parse_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("config must be a JSON object");

    ExperimentConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "instance") {
                cfg.instance = value.get<std::string>();
            } else if (key == "h_sequence") {
                cfg.h_sequence = value.get<std::vector<double>>();
            } else if (key == "output_dir") {
                cfg.output_dir = value.get<std::string>();
            } else if (key == "options") {
                if (!value.is_object()) throw DataError("config: options must be an object");
                for (const auto& [opt_key, opt_value] : value.items()) {
                    if (opt_key == "newton_tol")
                        cfg.options.newton_tol = opt_value.get<double>();
                    else if (opt_key == "max_iters")
                        cfg.options.max_iters = opt_value.get<int>();
                    else if (opt_key == "ellipticity_floor")
                        cfg.options.ellipticity_floor = opt_value.get<double>();
                    else if (opt_key == "line_search")
                        cfg.options.line_search = opt_value.get<bool>();
                    else if (opt_key == "max_halvings")
                        cfg.options.max_halvings = opt_value.get<int>();
                    else
                        throw DataError("config: unknown option '" + opt_key + "'");
                }
            } else {
                throw DataError("config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config has a wrongly typed value: ") + e.what());
    }
    try {
        validate_h_sequence(cfg.h_sequence);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

}  // namespace backus
