#include "backus/fem_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace backus {

namespace {

struct QuadPoint {
    double l0, l1, l2, w;
};

// Degree-2 rule, interior points.
constexpr std::array<QuadPoint, 3> kAssemblyRule{{
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0},
}};

// Degree-4 rule (two symmetric orbits), weights normalized to 1.
constexpr double kNormA1 = 0.816847572980459;
constexpr double kNormB1 = 0.091576213509771;
constexpr double kNormW1 = 0.109951743655322;
constexpr double kNormA2 = 0.108103018168070;
constexpr double kNormB2 = 0.445948490915965;
constexpr double kNormW2 = 0.223381589678011;
constexpr std::array<QuadPoint, 6> kNormRule{{
    {kNormA1, kNormB1, kNormB1, kNormW1},
    {kNormB1, kNormA1, kNormB1, kNormW1},
    {kNormB1, kNormB1, kNormA1, kNormW1},
    {kNormA2, kNormB2, kNormB2, kNormW2},
    {kNormB2, kNormA2, kNormB2, kNormW2},
    {kNormB2, kNormB2, kNormA2, kNormW2},
}};

struct ElementGeometry {
    std::array<Vec2, 3> v;
    std::array<Vec2, 3> grad;  // gradients of the barycentric basis
    double area = 0.0;
};

ElementGeometry element_geometry(const TriMesh& mesh, int t) {
    ElementGeometry g;
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) g.v[k] = mesh.nodes[tri[k]];
    const double twice_area = (g.v[1].x - g.v[0].x) * (g.v[2].y - g.v[0].y) -
                              (g.v[2].x - g.v[0].x) * (g.v[1].y - g.v[0].y);
    if (!(twice_area > 1e-30)) {
        std::ostringstream msg;
        msg << "degenerate triangle " << t << " in assembly";
        throw std::runtime_error(msg.str());
    }
    g.area = 0.5 * twice_area;
    g.grad[0] = {(g.v[1].y - g.v[2].y) / twice_area, (g.v[2].x - g.v[1].x) / twice_area};
    g.grad[1] = {(g.v[2].y - g.v[0].y) / twice_area, (g.v[0].x - g.v[2].x) / twice_area};
    g.grad[2] = {(g.v[0].y - g.v[1].y) / twice_area, (g.v[1].x - g.v[0].x) / twice_area};
    return g;
}

Vec2 quad_position(const ElementGeometry& g, const QuadPoint& qp) {
    return qp.l0 * g.v[0] + qp.l1 * g.v[1] + qp.l2 * g.v[2];
}

void check_field(const TriMesh& mesh, const NodalField& u, const char* where) {
    if (u.mesh != &mesh || u.values.size() != mesh.nodes.size())
        throw std::invalid_argument(std::string(where) + ": field does not belong to the mesh");
}

std::vector<std::vector<int>> adjacency_pattern(const TriMesh& mesh) {
    std::vector<std::vector<int>> rows(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) rows[i].push_back(i);
    for (const auto& tri : mesh.triangles)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (a != b) rows[tri[a]].push_back(tri[b]);
    for (auto& r : rows) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
    return rows;
}

// Clamped coefficient state at one quadrature point.
struct CoefState {
    double s = 0.0;      // clamped p - |Du|^2
    double a = 0.0;      // s^(-1/2)
    bool clamped = false;
};

CoefState clamped_coefficient(double p, double du2, const SolveOptions& opts, const Vec2& where) {
    if (!(p > 0.0)) {
        std::ostringstream msg;
        msg << "nonpositive p = " << p << " at (" << where.x << ", " << where.y << ")";
        throw DataError(msg.str());
    }
    CoefState c;
    const double floor = opts.ellipticity_floor * p;
    c.s = p - du2;
    if (c.s < floor) {
        c.s = floor;
        c.clamped = true;
    }
    c.a = 1.0 / std::sqrt(c.s);
    return c;
}

void validate_options(const SolveOptions& opts) {
    if (!(opts.newton_tol > 0.0) || !(opts.ellipticity_floor > 0.0) || opts.max_iters < 1 ||
        opts.max_halvings < 0)
        throw std::invalid_argument("invalid solver options");
    if (opts.assembly_quadrature_degree != 2 || opts.norm_quadrature_degree != 4)
        throw std::invalid_argument("unsupported quadrature degrees");
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double euclid_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> exact_boundary_values(const TriMesh& mesh, const TraceData& data) {
    std::vector<double> g(mesh.nodes.size(), 0.0);
    for (int b : mesh.boundary_nodes) g[b] = data.u_exact(mesh.nodes[b]);
    return g;
}

NodalField laplace_initial_guess(const TriMesh& mesh, const TraceData& data) {
    SparseSystem sys = assemble_laplace(mesh);
    apply_dirichlet(sys, mesh, exact_boundary_values(mesh, data));
    NodalField u;
    u.mesh = &mesh;
    u.values = solve_linear(sys);
    return u;
}

}  // namespace

std::array<std::array<double, 3>, 3> element_stiffness(const Vec2& v0, const Vec2& v1,
                                                       const Vec2& v2) {
    const double twice_area = (v1.x - v0.x) * (v2.y - v0.y) - (v2.x - v0.x) * (v1.y - v0.y);
    if (!(twice_area > 1e-30)) throw std::runtime_error("degenerate triangle");
    const Vec2 grad[3] = {
        {(v1.y - v2.y) / twice_area, (v2.x - v1.x) / twice_area},
        {(v2.y - v0.y) / twice_area, (v0.x - v2.x) / twice_area},
        {(v0.y - v1.y) / twice_area, (v1.x - v0.x) / twice_area},
    };
    std::array<std::array<double, 3>, 3> k{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) k[a][b] = 0.5 * twice_area * dot(grad[a], grad[b]);
    return k;
}

SparseSystem assemble_laplace(const TriMesh& mesh) {
    SparseSystem sys = SparseSystem::from_pattern(mesh.node_count(), adjacency_pattern(mesh));
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                sys.add(tri[a], tri[b], g.area * dot(g.grad[a], g.grad[b]));
    }
    return sys;
}

std::vector<double> assemble_residual(const TriMesh& mesh, const NodalField& u,
                                      const TraceData& data, const SolveOptions& opts,
                                      long* clamp_count) {
    check_field(mesh, u, "assemble_residual");
    std::vector<double> r(mesh.nodes.size(), 0.0);
    long clamps = 0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        Vec2 du{};
        for (int k = 0; k < 3; ++k) du += u.values[tri[k]] * g.grad[k];
        const double du2 = norm_sq(du);
        for (const QuadPoint& qp : kAssemblyRule) {
            const Vec2 x = quad_position(g, qp);
            const TraceSample ts = data.sample(x);
            const CoefState c = clamped_coefficient(ts.p, du2, opts, x);
            if (c.clamped) ++clamps;
            const double w = qp.w * g.area;
            const double flux = w * c.a;
            // Integrating the divergence term by parts flips the sign of
            // the load relative to the strong equation.
            const double load = -w * 0.5 * ts.sigma * ts.q / c.s;
            const double lambda[3] = {qp.l0, qp.l1, qp.l2};
            for (int k = 0; k < 3; ++k) {
                const int i = tri[k];
                if (mesh.node_on_boundary[i]) continue;
                r[i] += flux * dot(du, g.grad[k]) + load * lambda[k];
            }
        }
    }
    for (int i = 0; i < mesh.node_count(); ++i)
        if (!std::isfinite(r[i])) {
            std::ostringstream msg;
            msg << "non-finite residual entry at node " << i << " (" << mesh.nodes[i].x << ", "
                << mesh.nodes[i].y << ")";
            throw std::runtime_error(msg.str());
        }
    if (clamp_count) *clamp_count += clamps;
    return r;
}

SparseSystem assemble_jacobian(const TriMesh& mesh, const NodalField& u, const TraceData& data,
                               const SolveOptions& opts) {
    check_field(mesh, u, "assemble_jacobian");
    SparseSystem sys = SparseSystem::from_pattern(mesh.node_count(), adjacency_pattern(mesh));
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        Vec2 du{};
        for (int k = 0; k < 3; ++k) du += u.values[tri[k]] * g.grad[k];
        const double du2 = norm_sq(du);
        for (const QuadPoint& qp : kAssemblyRule) {
            const Vec2 x = quad_position(g, qp);
            const TraceSample ts = data.sample(x);
            const CoefState c = clamped_coefficient(ts.p, du2, opts, x);
            const double w = qp.w * g.area;
            const double a3 = c.a * c.a * c.a;
            const double a4 = a3 * c.a;
            const double lambda[3] = {qp.l0, qp.l1, qp.l2};
            double du_dot_grad[3];
            for (int k = 0; k < 3; ++k) du_dot_grad[k] = dot(du, g.grad[k]);
            for (int kv = 0; kv < 3; ++kv) {
                const int i = tri[kv];
                if (mesh.node_on_boundary[i]) continue;  // Dirichlet test functions drop out
                for (int kw = 0; kw < 3; ++kw) {
                    double val = w * c.a * dot(g.grad[kv], g.grad[kw]);
                    if (!c.clamped) {
                        // Derivative of the clamped margin vanishes where the
                        // clamp is active; the load linearization carries the
                        // same sign flip as the residual.
                        val += w * (a3 * du_dot_grad[kw] * du_dot_grad[kv] -
                                    ts.sigma * ts.q * a4 * du_dot_grad[kw] * lambda[kv]);
                    }
                    sys.add(i, tri[kw], val);
                }
            }
        }
    }
    for (double v : sys.vals)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite Jacobian entry");
    return sys;
}

void apply_dirichlet(SparseSystem& system, const TriMesh& mesh, const std::vector<double>& g) {
    if (system.n != mesh.node_count())
        throw std::invalid_argument("apply_dirichlet: system size does not match the mesh");
    if (g.size() != mesh.nodes.size())
        throw std::invalid_argument("apply_dirichlet: boundary values missing");
    for (int b : mesh.boundary_nodes)
        if (!std::isfinite(g[b])) throw std::invalid_argument("apply_dirichlet: non-finite boundary value");

    for (int i = 0; i < system.n; ++i) {
        const bool row_is_boundary = mesh.node_on_boundary[i];
        for (int k = system.row_offsets[i]; k < system.row_offsets[i + 1]; ++k) {
            const int j = system.cols[k];
            if (row_is_boundary) {
                system.vals[k] = (j == i) ? 1.0 : 0.0;
            } else if (mesh.node_on_boundary[j]) {
                system.rhs[i] -= system.vals[k] * g[j];
                system.vals[k] = 0.0;
            }
        }
        if (row_is_boundary) system.rhs[i] = g[i];
    }
}

SolveResult solve_backus(const TraceData& data, const std::vector<TriMesh>& meshes,
                         const SolveOptions& opts) {
    validate_options(opts);
    if (meshes.empty()) throw std::invalid_argument("solve_backus: empty mesh sequence");
    for (size_t m = 1; m < meshes.size(); ++m)
        if (!(meshes[m].h_max_actual < meshes[m - 1].h_max_actual))
            throw std::invalid_argument("solve_backus: meshes must be ordered coarse to fine");

    const AdmissibilityReport adm = check_admissible(data, 32);
    if (!adm.admissible()) {
        std::ostringstream msg;
        msg << "inadmissible trace data: min p = " << adm.min_p << ", min margin = " << adm.min_margin
            << ", sigma " << (adm.sigma_constant ? "constant" : "not constant");
        throw DataError(msg.str());
    }

    SolveResult result;
    for (size_t m = 0; m < meshes.size(); ++m) {
        const TriMesh& mesh = meshes[m];
        NodalField u;
        if (m == 0) {
            u = laplace_initial_guess(mesh, data);
        } else {
            u = interpolate(meshes[m - 1], result.solutions[m - 1], mesh);
        }
        for (int b : mesh.boundary_nodes) u.values[b] = data.u_exact(mesh.nodes[b]);

        NewtonDiagnostics diag;
        diag.mesh_h = mesh.h_max_actual;

        long last_assembly_clamps = 0;
        std::vector<double> residual = assemble_residual(mesh, u, data, opts, &last_assembly_clamps);
        diag.clamp_count += last_assembly_clamps;
        double res_norm = euclid_norm(residual);

        bool converged = false;
        while (!converged) {
            if (diag.iterations >= opts.max_iters) {
                diag.final_residual_norm = res_norm;
                throw NewtonFailure("Newton did not converge within the iteration limit", diag,
                                    u.values, std::move(result));
            }
            SparseSystem sys = assemble_jacobian(mesh, u, data, opts);
            for (int i = 0; i < sys.n; ++i) sys.rhs[i] = -residual[i];
            apply_dirichlet(sys, mesh, std::vector<double>(mesh.nodes.size(), 0.0));
            const std::vector<double> delta = solve_linear(sys);

            double step = 1.0;
            NodalField trial;
            trial.mesh = &mesh;
            trial.values.resize(u.values.size());
            std::vector<double> trial_residual;
            double trial_norm = 0.0;
            int halvings = 0;
            for (;;) {
                for (size_t i = 0; i < u.values.size(); ++i)
                    trial.values[i] = u.values[i] + step * delta[i];
                last_assembly_clamps = 0;
                trial_residual = assemble_residual(mesh, trial, data, opts, &last_assembly_clamps);
                diag.clamp_count += last_assembly_clamps;
                trial_norm = euclid_norm(trial_residual);
                if (!opts.line_search || trial_norm <= res_norm) break;
                if (++halvings > opts.max_halvings) {
                    diag.final_residual_norm = res_norm;
                    diag.residual_monotone = false;
                    throw NewtonFailure("line search failed to reduce the residual", diag, u.values,
                                        std::move(result));
                }
                step *= 0.5;
            }
            if (trial_norm > res_norm) diag.residual_monotone = false;

            u.values.swap(trial.values);
            residual.swap(trial_residual);
            res_norm = trial_norm;
            ++diag.iterations;
            diag.final_update_norm = step * max_abs(delta);
            converged = diag.final_update_norm <= opts.newton_tol;
        }

        diag.final_residual_norm = res_norm;
        diag.clamped_at_convergence = last_assembly_clamps > 0;
        const ErrorNorms err = error_norms(u, data, opts);
        diag.l2_error = err.l2;
        diag.h1_error = err.h1;
        result.diagnostics.push_back(diag);
        result.solutions.push_back(std::move(u));
    }
    return result;
}

ErrorNorms error_norms(const NodalField& u, const TraceData& data, const SolveOptions& opts) {
    validate_options(opts);
    const TriMesh& mesh = *u.mesh;
    check_field(mesh, u, "error_norms");
    double l2_sq = 0.0;
    double semi_sq = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        Vec2 du{};
        for (int k = 0; k < 3; ++k) du += u.values[tri[k]] * g.grad[k];
        for (const QuadPoint& qp : kNormRule) {
            const Vec2 x = quad_position(g, qp);
            const double uh = qp.l0 * u.values[tri[0]] + qp.l1 * u.values[tri[1]] +
                              qp.l2 * u.values[tri[2]];
            const double diff = uh - data.u_exact(x);
            const Vec2 gdiff = du - data.tangential_gradient(x);
            const double w = qp.w * g.area;
            l2_sq += w * diff * diff;
            semi_sq += w * norm_sq(gdiff);
        }
    }
    ErrorNorms norms;
    norms.l2 = std::sqrt(l2_sq);
    norms.h1 = std::sqrt(l2_sq + semi_sq);
    return norms;
}

void dump_solution_csv(const NodalField& u, const TraceData& data, std::ostream& out) {
    const TriMesh& mesh = *u.mesh;
    check_field(mesh, u, "dump_solution_csv");
    out << "x,y,u_h,u_exact,abs_err\n";
    char line[256];
    for (int i = 0; i < mesh.node_count(); ++i) {
        const double exact = data.u_exact(mesh.nodes[i]);
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", mesh.nodes[i].x,
                      mesh.nodes[i].y, u.values[i], exact, std::abs(u.values[i] - exact));
        out << line;
    }
}

}  // namespace backus
