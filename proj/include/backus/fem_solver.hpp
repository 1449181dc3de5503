#pragma once

#include <array>
#include <vector>

#include "backus/errors.hpp"
#include "backus/mesh.hpp"
#include "backus/sparse.hpp"
#include "backus/trace_data.hpp"

namespace backus {

struct SolveOptions {
    double newton_tol = 1e-10;        // max-norm of the accepted update
    int max_iters = 50;
    double ellipticity_floor = 1e-8;  // relative to p
    bool line_search = true;
    int max_halvings = 20;
    int assembly_quadrature_degree = 2;  // 3-point rule
    int norm_quadrature_degree = 4;      // 6-point rule
};

struct NewtonDiagnostics {
    double mesh_h = 0.0;
    int iterations = 0;
    double final_update_norm = 0.0;
    double final_residual_norm = 0.0;
    long clamp_count = 0;               // cumulative over all assemblies on this mesh
    bool clamped_at_convergence = false;
    bool residual_monotone = true;
    double l2_error = 0.0;
    double h1_error = 0.0;
};

struct SolveResult {
    std::vector<NodalField> solutions;        // one per mesh, fields reference the input meshes
    std::vector<NewtonDiagnostics> diagnostics;
};

// Newton failed on a mesh; carries the diagnostics of the failing
// level, the last iterate there, and the levels completed before it.
struct NewtonFailure : SolverError {
    NewtonDiagnostics diagnostics;
    std::vector<double> last_iterate;
    SolveResult completed;

    NewtonFailure(const std::string& msg, NewtonDiagnostics diag, std::vector<double> iterate,
                  SolveResult done = {})
        : SolverError(msg),
          diagnostics(diag),
          last_iterate(std::move(iterate)),
          completed(std::move(done)) {}
};

// Stiffness matrix of the Laplace operator over P1 elements, all rows
// assembled, zero right-hand side.
SparseSystem assemble_laplace(const TriMesh& mesh);

// Weak residual of the trace equation at the current iterate. Entries
// for Dirichlet (boundary) nodes are zero. The ellipticity clamp
// replaces p - |Du_h|^2 by ellipticity_floor * p where the margin falls
// below it; occurrences are added to *clamp_count when given.
std::vector<double> assemble_residual(const TriMesh& mesh, const NodalField& u,
                                      const TraceData& data, const SolveOptions& opts,
                                      long* clamp_count = nullptr);

// Exact linearization of the clamped residual. Rows for Dirichlet nodes
// are left empty.
SparseSystem assemble_jacobian(const TriMesh& mesh, const NodalField& u, const TraceData& data,
                               const SolveOptions& opts);

// Replaces boundary rows by the identity with the prescribed value and
// moves boundary couplings to the right-hand side. `g` is indexed by
// node; only boundary entries are read.
void apply_dirichlet(SparseSystem& system, const TriMesh& mesh, const std::vector<double>& g);

// Damped Newton solve of the trace equation with exact Dirichlet data on
// a coarse-to-fine mesh sequence. The coarsest initial guess is the
// harmonic (Laplace) solution; finer meshes start from the interpolated
// previous solution. Throws DataError for inadmissible data and
// NewtonFailure on non-convergence.
SolveResult solve_backus(const TraceData& data, const std::vector<TriMesh>& meshes,
                         const SolveOptions& opts);

struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0;  // full norm, L2 part included
};

// L2 and H1 errors against the exact trace, degree-4 quadrature.
ErrorNorms error_norms(const NodalField& u, const TraceData& data, const SolveOptions& opts);

// Element stiffness matrix of a single triangle (exposed for tests).
std::array<std::array<double, 3>, 3> element_stiffness(const Vec2& v0, const Vec2& v1,
                                                       const Vec2& v2);

// CSV dump `x,y,u_h,u_exact,abs_err` per node.
void dump_solution_csv(const NodalField& u, const TraceData& data, std::ostream& out);

}  // namespace backus
