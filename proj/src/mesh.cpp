#include "backus/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace backus {

TriMesh build_square_mesh(double h_max) {
    if (!(h_max > 0.0) || h_max > 1.0)
        throw std::invalid_argument("build_square_mesh: h_max must lie in (0, 1]");
    const double root2 = std::sqrt(2.0);
    const int n = static_cast<int>(std::ceil(root2 / h_max - 1e-12));

    TriMesh mesh;
    mesh.cells_per_side = n;
    mesh.h_max_actual = root2 / n;
    mesh.nodes.reserve((n + 1) * (n + 1));
    mesh.node_on_boundary.assign((n + 1) * (n + 1), 0);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            mesh.nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
            if (i == 0 || i == n || j == 0 || j == n) {
                const int id = j * (n + 1) + i;
                mesh.node_on_boundary[id] = 1;
                mesh.boundary_nodes.push_back(id);
            }
        }
    std::sort(mesh.boundary_nodes.begin(), mesh.boundary_nodes.end());

    mesh.triangles.reserve(2 * n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int ll = j * (n + 1) + i;
            const int lr = ll + 1;
            const int ul = ll + (n + 1);
            const int ur = ul + 1;
            mesh.triangles.push_back({ll, lr, ur});
            mesh.triangles.push_back({ll, ur, ul});
        }
    return mesh;
}

Location locate(const TriMesh& mesh, const Vec2& x) {
    constexpr double kSlack = 1e-12;
    if (x.x < -kSlack || x.x > 1.0 + kSlack || x.y < -kSlack || x.y > 1.0 + kSlack)
        throw std::invalid_argument("locate: point outside the unit square");
    const int n = mesh.cells_per_side;
    const double sx = std::min(std::max(x.x, 0.0), 1.0) * n;
    const double sy = std::min(std::max(x.y, 0.0), 1.0) * n;
    const int i = std::min(static_cast<int>(sx), n - 1);
    const int j = std::min(static_cast<int>(sy), n - 1);
    const double xi = sx - i;
    const double eta = sy - j;

    Location loc;
    if (xi >= eta) {
        loc.triangle = 2 * (j * n + i);
        loc.bary = {1.0 - xi, xi - eta, eta};
    } else {
        loc.triangle = 2 * (j * n + i) + 1;
        loc.bary = {1.0 - eta, xi, eta - xi};
    }
    return loc;
}

NodalField interpolate(const TriMesh& coarse, const NodalField& field, const TriMesh& fine) {
    if (field.mesh != &coarse || field.values.size() != coarse.nodes.size())
        throw std::invalid_argument("interpolate: field does not belong to the coarse mesh");
    NodalField out;
    out.mesh = &fine;
    out.values.resize(fine.nodes.size());
    for (int k = 0; k < fine.node_count(); ++k) {
        const Location loc = locate(coarse, fine.nodes[k]);
        const auto& tri = coarse.triangles[loc.triangle];
        out.values[k] = loc.bary[0] * field.values[tri[0]] + loc.bary[1] * field.values[tri[1]] +
                        loc.bary[2] * field.values[tri[2]];
    }
    return out;
}

void dump_mesh_csv(const TriMesh& mesh, std::ostream& nodes_out, std::ostream& triangles_out) {
    char line[128];
    nodes_out << "x,y\n";
    for (const Vec2& v : mesh.nodes) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", v.x, v.y);
        nodes_out << line;
    }
    triangles_out << "v0,v1,v2\n";
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof line, "%d,%d,%d\n", t[0], t[1], t[2]);
        triangles_out << line;
    }
}

}  // namespace backus
