#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "backus/errors.hpp"
#include "backus/fem_solver.hpp"
#include "backus/mesh.hpp"
#include "backus/sparse.hpp"
#include "backus/trace_data.hpp"
#include "test_util.hpp"

using namespace backus;
using namespace btest;

namespace {

NodalField exact_interpolant(const TriMesh& mesh, const TraceData& data) {
    NodalField u{&mesh, {}};
    u.values.reserve(mesh.nodes.size());
    for (const Vec2& v : mesh.nodes) u.values.push_back(data.u_exact(v));
    return u;
}

std::vector<double> matvec(const SparseSystem& a, const std::vector<double>& x) {
    std::vector<double> y(a.n, 0.0);
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            y[i] += a.vals[k] * x[a.cols[k]];
    return y;
}

double norm2(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double max_abs(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc = std::max(acc, std::abs(x));
    return acc;
}

}  // namespace

TEST_CASE("fem: element stiffness of the reference triangle") {
    const auto k = element_stiffness({0, 0}, {1, 0}, {0, 1});
    const double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(k[i][j] == doctest::Approx(expected[i][j]).epsilon(1e-14));
}

TEST_CASE("fem: laplace system structure") {
    const TriMesh mesh = build_square_mesh(0.75);  // n = 2
    const SparseSystem sys = assemble_laplace(mesh);
    REQUIRE(sys.n == mesh.node_count());

    // Constants lie in the kernel before boundary conditions.
    for (int i = 0; i < sys.n; ++i) {
        double row_sum = 0.0;
        for (int k = sys.row_offsets[i]; k < sys.row_offsets[i + 1]; ++k) row_sum += sys.vals[k];
        CHECK(std::abs(row_sum) <= 1e-13);
    }

    // Symmetry to exact round-off.
    for (int i = 0; i < sys.n; ++i)
        for (int k = sys.row_offsets[i]; k < sys.row_offsets[i + 1]; ++k)
            CHECK(sys.vals[k] == doctest::Approx(sys.at(sys.cols[k], i)).epsilon(1e-15));

    // The interior node of the criss-cross pattern carries the classic
    // 5-point stencil: 4 on the diagonal, -1 to the axis neighbors, 0 to
    // the diagonal neighbors.
    int center = -1, north = -1, south = -1, east = -1, west = -1, corner = -1;
    for (int i = 0; i < mesh.node_count(); ++i) {
        const Vec2 v = mesh.nodes[i];
        if (v.x == 0.5 && v.y == 0.5) center = i;
        if (v.x == 0.5 && v.y == 1.0) north = i;
        if (v.x == 0.5 && v.y == 0.0) south = i;
        if (v.x == 1.0 && v.y == 0.5) east = i;
        if (v.x == 0.0 && v.y == 0.5) west = i;
        if (v.x == 0.0 && v.y == 0.0) corner = i;
    }
    REQUIRE(center >= 0);
    CHECK(sys.at(center, center) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(sys.at(center, north) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(sys.at(center, south) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(sys.at(center, east) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(sys.at(center, west) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(sys.at(center, corner)) <= 1e-15);
}

TEST_CASE("fem: dirichlet application and the harmonic solve") {
    const TriMesh mesh = build_square_mesh(0.36);  // n = 4
    SparseSystem sys = assemble_laplace(mesh);
    std::vector<double> g(mesh.nodes.size());
    for (size_t i = 0; i < mesh.nodes.size(); ++i) g[i] = mesh.nodes[i].x + 2.0 * mesh.nodes[i].y;
    apply_dirichlet(sys, mesh, g);

    for (int b : mesh.boundary_nodes) {
        CHECK(sys.at(b, b) == 1.0);
        CHECK(sys.rhs[b] == g[b]);
        for (int k = sys.row_offsets[b]; k < sys.row_offsets[b + 1]; ++k)
            if (sys.cols[k] != b) CHECK(sys.vals[k] == 0.0);
    }

    // P1 reproduces harmonic affine data exactly.
    const std::vector<double> u = solve_linear(sys);
    for (size_t i = 0; i < u.size(); ++i) CHECK(std::abs(u[i] - g[i]) <= 1e-12);
}

TEST_CASE("fem: dirichlet elimination moves couplings to the right-hand side") {
    const TriMesh mesh = build_square_mesh(0.75);  // n = 2, one interior node
    SparseSystem sys = assemble_laplace(mesh);
    std::vector<double> g(mesh.nodes.size(), 1.0);
    apply_dirichlet(sys, mesh, g);

    int center = -1;
    for (int i = 0; i < mesh.node_count(); ++i)
        if (mesh.nodes[i].x == 0.5 && mesh.nodes[i].y == 0.5) center = i;
    REQUIRE(center >= 0);
    // Four -1 couplings move over: rhs = 4; boundary columns are zeroed.
    CHECK(sys.rhs[center] == doctest::Approx(4.0).epsilon(1e-14));
    for (int k = sys.row_offsets[center]; k < sys.row_offsets[center + 1]; ++k)
        if (sys.cols[k] != center) CHECK(sys.vals[k] == 0.0);
    CHECK(solve_linear(sys)[center] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("fem: residual vanishes for the affine instance") {
    const TraceData data = make_trace(affine_potential());
    const TriMesh mesh = build_square_mesh(0.2);
    const NodalField u = exact_interpolant(mesh, data);
    const SolveOptions opts;
    long clamps = 0;
    const std::vector<double> r = assemble_residual(mesh, u, data, opts, &clamps);
    CHECK(max_abs(r) <= 1e-12);
    CHECK(clamps == 0);
    for (int b : mesh.boundary_nodes) CHECK(r[b] == 0.0);
}

TEST_CASE("fem: residual shrinks at the exact interpolant under refinement") {
    const TraceData data = make_trace(u0_potential());
    const SolveOptions opts;
    std::vector<double> norms;
    for (double h : {0.2, 0.1, 0.05}) {
        const TriMesh mesh = build_square_mesh(h);
        const NodalField u = exact_interpolant(mesh, data);
        norms.push_back(max_abs(assemble_residual(mesh, u, data, opts)));
    }
    CHECK(norms[1] < norms[0]);
    CHECK(norms[2] < norms[1]);
    CHECK(norms[2] < 0.75 * norms[1]);
}

TEST_CASE("fem: deliberate gradient overshoot trips the clamp counter") {
    const TraceData data = make_trace(u0_potential());
    const TriMesh mesh = build_square_mesh(0.2);
    NodalField u = exact_interpolant(mesh, data);
    for (double& v : u.values) v *= 3.0;  // |Du|^2 now exceeds p
    const SolveOptions opts;
    long clamps = 0;
    const std::vector<double> r = assemble_residual(mesh, u, data, opts, &clamps);
    CHECK(clamps > 0);
    for (double v : r) CHECK(std::isfinite(v));
}

TEST_CASE("fem: jacobian matches directional finite differences") {
    const TraceData data = make_trace(u0_potential());
    const TriMesh mesh = build_square_mesh(0.1);
    const SolveOptions opts;
    const NodalField base = exact_interpolant(mesh, data);

    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const double eps = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        NodalField u = base;
        std::vector<double> w(u.values.size(), 0.0);
        for (int i = 0; i < mesh.node_count(); ++i) {
            if (mesh.node_on_boundary[i]) continue;
            u.values[i] += 0.05 * sym(rng);
            w[i] = sym(rng);
        }

        const SparseSystem jac = assemble_jacobian(mesh, u, data, opts);
        const std::vector<double> jw = matvec(jac, w);

        NodalField up = u, um = u;
        for (size_t i = 0; i < w.size(); ++i) {
            up.values[i] += eps * w[i];
            um.values[i] -= eps * w[i];
        }
        const std::vector<double> rp = assemble_residual(mesh, up, data, opts);
        const std::vector<double> rm = assemble_residual(mesh, um, data, opts);
        std::vector<double> fd(w.size());
        for (size_t i = 0; i < w.size(); ++i) fd[i] = (rp[i] - rm[i]) / (2.0 * eps);

        std::vector<double> diff(w.size());
        for (size_t i = 0; i < w.size(); ++i) diff[i] = fd[i] - jw[i];
        CHECK(norm2(diff) <= 1e-5 * norm2(jw));
    }
}

TEST_CASE("fem: jacobian degenerations") {
    const TraceData data = make_trace(affine_potential());
    const TriMesh mesh = build_square_mesh(0.36);
    const SolveOptions opts;

    SUBCASE("zero iterate reduces to the scaled stiffness matrix") {
        NodalField zero{&mesh, std::vector<double>(mesh.nodes.size(), 0.0)};
        const SparseSystem jac = assemble_jacobian(mesh, zero, data, opts);
        const SparseSystem lap = assemble_laplace(mesh);
        const double scale = 1.0 / std::sqrt(5.0);
        for (int i = 0; i < jac.n; ++i) {
            if (mesh.node_on_boundary[i]) continue;
            for (int k = jac.row_offsets[i]; k < jac.row_offsets[i + 1]; ++k)
                CHECK(jac.vals[k] ==
                      doctest::Approx(scale * lap.at(i, jac.cols[k])).epsilon(1e-13));
        }
    }

    SUBCASE("q = 0 keeps the jacobian symmetric") {
        const NodalField u = exact_interpolant(mesh, data);
        const SparseSystem jac = assemble_jacobian(mesh, u, data, opts);
        for (int i = 0; i < jac.n; ++i) {
            if (mesh.node_on_boundary[i]) continue;
            for (int k = jac.row_offsets[i]; k < jac.row_offsets[i + 1]; ++k) {
                const int j = jac.cols[k];
                if (mesh.node_on_boundary[j]) continue;
                CHECK(jac.vals[k] == doctest::Approx(jac.at(j, i)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("fem: newton converges on the quadratic instance") {
    const TraceData data = make_trace(u0_potential());
    std::vector<TriMesh> meshes;
    meshes.push_back(build_square_mesh(0.2));
    const SolveOptions opts;
    const SolveResult result = solve_backus(data, meshes, opts);

    REQUIRE(result.solutions.size() == 1);
    REQUIRE(result.diagnostics.size() == 1);
    const NewtonDiagnostics& d = result.diagnostics[0];
    CHECK(d.mesh_h == doctest::Approx(std::sqrt(2.0) / 8.0).epsilon(1e-15));
    CHECK(d.iterations == 5);
    CHECK(d.final_update_norm <= 1e-10);
    CHECK(d.residual_monotone);
    CHECK_FALSE(d.clamped_at_convergence);
    CHECK(d.clamp_count == 0);
    // Frozen errors of this deterministic configuration.
    CHECK(d.l2_error == doctest::Approx(5.4490354713620827e-3).epsilon(1e-9));
    CHECK(d.h1_error == doctest::Approx(0.1022074591623955).epsilon(1e-9));
}

TEST_CASE("fem: refinement decreases the errors monotonically") {
    const TraceData data = make_trace(u0_potential());
    std::vector<TriMesh> meshes;
    for (double h : {0.2, 0.1, 0.05}) meshes.push_back(build_square_mesh(h));
    const SolveOptions opts;
    const SolveResult result = solve_backus(data, meshes, opts);

    REQUIRE(result.diagnostics.size() == 3);
    const int expected_iters[3] = {5, 4, 4};
    for (int l = 0; l < 3; ++l) {
        CHECK(result.diagnostics[l].iterations == expected_iters[l]);
        CHECK(result.solutions[l].values.size() == meshes[l].nodes.size());
        if (l > 0) {
            CHECK(result.diagnostics[l].l2_error < result.diagnostics[l - 1].l2_error);
            CHECK(result.diagnostics[l].h1_error < result.diagnostics[l - 1].h1_error);
        }
    }
}

TEST_CASE("fem: affine boundary data solves exactly") {
    const TraceData data = make_trace(affine_potential());
    std::vector<TriMesh> meshes;
    for (double h : {0.2, 0.1}) meshes.push_back(build_square_mesh(h));
    const SolveOptions opts;
    const SolveResult result = solve_backus(data, meshes, opts);
    for (size_t l = 0; l < meshes.size(); ++l) {
        CHECK(result.diagnostics[l].iterations <= 2);
        CHECK(result.diagnostics[l].l2_error <= 1e-10);
        double err = 0.0;
        for (int i = 0; i < meshes[l].node_count(); ++i)
            err = std::max(err, std::abs(result.solutions[l].values[i] - meshes[l].nodes[i].x));
        CHECK(err <= 1e-10);
    }
}

TEST_CASE("fem: nonconvergence surfaces the failing state") {
    const TraceData data = make_trace(u0_potential());
    std::vector<TriMesh> meshes;
    meshes.push_back(build_square_mesh(0.2));
    SolveOptions opts;
    opts.max_iters = 1;
    try {
        solve_backus(data, meshes, opts);
        FAIL("expected NewtonFailure");
    } catch (const NewtonFailure& e) {
        CHECK(e.diagnostics.iterations == 1);
        CHECK(e.diagnostics.final_update_norm > opts.newton_tol);
        CHECK(e.completed.solutions.empty());
        CHECK(e.last_iterate.size() == meshes[0].nodes.size());
    }
}

TEST_CASE("fem: solver input validation") {
    const TraceData data = make_trace(u0_potential());
    std::vector<TriMesh> backwards;
    backwards.push_back(build_square_mesh(0.1));
    backwards.push_back(build_square_mesh(0.2));
    const SolveOptions opts;
    CHECK_THROWS_AS(solve_backus(data, backwards, opts), std::invalid_argument);

    std::vector<TriMesh> meshes;
    meshes.push_back(build_square_mesh(0.2));
    CHECK_THROWS_AS(solve_backus(data, {}, opts), std::invalid_argument);

    SolveOptions bad = opts;
    bad.newton_tol = 0.0;
    CHECK_THROWS_AS(solve_backus(data, meshes, bad), std::invalid_argument);
    bad = opts;
    bad.assembly_quadrature_degree = 3;
    CHECK_THROWS_AS(solve_backus(data, meshes, bad), std::invalid_argument);

    // Data with a vanishing normal component is inadmissible.
    Potential3D flat;
    flat.affine = {0.0, 1.0, 0.0, 0.0};
    CHECK_THROWS_AS(solve_backus(make_trace(flat), meshes, opts), DataError);
}

TEST_CASE("fem: error norms integrate simple perturbations exactly") {
    const TraceData data = make_trace(affine_potential());
    const TriMesh mesh = build_square_mesh(0.36);
    const SolveOptions opts;

    NodalField exact = exact_interpolant(mesh, data);
    const ErrorNorms zero = error_norms(exact, data, opts);
    CHECK(zero.l2 <= 1e-14);
    CHECK(zero.h1 <= 1e-13);

    const double eps = 1e-3;
    NodalField shifted = exact;
    for (double& v : shifted.values) v += eps;
    const ErrorNorms shift = error_norms(shifted, data, opts);
    CHECK(shift.l2 == doctest::Approx(eps).epsilon(1e-12));
    CHECK(shift.h1 == doctest::Approx(eps).epsilon(1e-12));

    NodalField tilted{&mesh, {}};
    for (const Vec2& v : mesh.nodes) tilted.values.push_back((1.0 + eps) * v.x);
    const ErrorNorms tilt = error_norms(tilted, data, opts);
    // e = eps x: ||e|| = eps/sqrt(3), |e|_H1^2 = eps^2 (1/3 + 1).
    CHECK(tilt.l2 == doctest::Approx(eps / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(tilt.h1 == doctest::Approx(2.0 * eps / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("fem: direct linear solver") {
    SUBCASE("two by two") {
        SparseSystem sys = SparseSystem::from_pattern(2, {{0, 1}, {0, 1}});
        sys.add(0, 0, 2.0);
        sys.add(0, 1, 1.0);
        sys.add(1, 0, 1.0);
        sys.add(1, 1, 2.0);
        sys.rhs = {3.0, 3.0};
        const std::vector<double> x = solve_linear(sys);
        CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-13));
    }

    SUBCASE("random SPD system") {
        const int n = 50;
        std::mt19937_64 rng(59);
        std::uniform_real_distribution<double> sym(-1.0, 1.0);
        std::vector<std::vector<double>> b(n, std::vector<double>(n));
        for (auto& row : b)
            for (double& v : row) v = sym(rng);

        std::vector<std::vector<int>> pattern(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) pattern[i].push_back(j);
        SparseSystem sys = SparseSystem::from_pattern(n, pattern);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double v = i == j ? static_cast<double>(n) : 0.0;
                for (int k = 0; k < n; ++k) v += b[i][k] * b[j][k];
                sys.add(i, j, v);
            }
        std::vector<double> x_true(n);
        for (double& v : x_true) v = sym(rng);
        const std::vector<double> rhs_v = matvec(sys, x_true);
        sys.rhs = rhs_v;

        const std::vector<double> x = solve_linear(sys);
        std::vector<double> resid = matvec(sys, x);
        for (int i = 0; i < n; ++i) resid[i] -= rhs_v[i];
        CHECK(norm2(resid) <= 1e-12 * norm2(rhs_v));
    }

    SUBCASE("singular matrix is rejected") {
        SparseSystem sys = SparseSystem::from_pattern(2, {{0, 1}, {0, 1}});
        sys.add(0, 0, 1.0);
        sys.add(0, 1, 1.0);
        sys.add(1, 0, 1.0);
        sys.add(1, 1, 1.0);
        sys.rhs = {1.0, 0.0};
        CHECK_THROWS_AS(solve_linear(sys), SolverError);
    }

    SUBCASE("pattern discipline") {
        SparseSystem sys = SparseSystem::from_pattern(2, {{0}, {1}});
        CHECK_THROWS_AS(sys.add(0, 1, 1.0), std::logic_error);
        CHECK(sys.at(0, 1) == 0.0);
    }
}
