#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "backus/geometry.hpp"

namespace backus {

// Conforming triangulation of the unit square: n x n congruent cells,
// each split by the diagonal from its lower-left to its upper-right
// corner. Immutable after construction.
struct TriMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_nodes;  // sorted node indices on the square's boundary
    std::vector<char> node_on_boundary;
    int cells_per_side = 0;
    double h_max_actual = 0.0;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
};

// Builds the structured mesh with max edge length <= h_max,
// using n = ceil(sqrt(2)/h_max) cells per side. Requires 0 < h_max <= 1.
TriMesh build_square_mesh(double h_max);

struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

// O(1) point location in the structured mesh. Requires x in the closed
// unit square.
Location locate(const TriMesh& mesh, const Vec2& x);

// P1 coefficient vector over a TriMesh.
struct NodalField {
    const TriMesh* mesh = nullptr;
    std::vector<double> values;
};

// P1 interpolation of a coarse-mesh field onto the nodes of a fine mesh.
// Both meshes must cover the unit square.
NodalField interpolate(const TriMesh& coarse, const NodalField& field, const TriMesh& fine);

// CSV dumps for external visualization: `x,y` per node and `v0,v1,v2`
// per triangle.
void dump_mesh_csv(const TriMesh& mesh, std::ostream& nodes_out, std::ostream& triangles_out);

}  // namespace backus
