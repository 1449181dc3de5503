#pragma once

#include "backus/geometry.hpp"
#include "backus/potentials.hpp"

namespace backus {

// Circular integration contour x(t) = center + radius (cos t, sin t)
// with M equispaced quadrature points and the outward radial normal.
struct BoundaryCurve {
    Vec2 center{};
    double radius = 1.0;
    int quad_points = 256;
};

struct CountReport {
    double estimate = 0.0;     // -(1/2pi) contour integral of q/(2p)
    long rounded = 0;
    int exact_n_minus = 0;     // sum of (order + 1) over the pole list
    int n_plus_detected = 0;   // zeros of Du found by the grid scan
    double p_min_on_curve = 0.0;
};

// Weighted pole count: sum of (order + 1) over the pole list.
int exact_count(const PoleSet2D& ps);

// Heuristic zero detector for Du inside the curve: cells of a
// grid_n x grid_n lattice over the bounding square where both gradient
// components change sign are refined by bisection and confirmed by a
// small-gradient check. Counts simple zeros only, each with
// multiplicity 1; cells touching a pole center are skipped. Cells that
// straddle in sign but fail to confirm are added to *ambiguous when
// given. grid_n must be at least 32.
int scan_zeros(const PoleSet2D& ps, const BoundaryCurve& curve, int grid_n,
               int* ambiguous = nullptr);

// Trapezoid evaluation of -(1/2pi) * contour integral of q/(2p) with
// p = |Du|^2 and q the outward normal derivative of p, both analytic.
// For poles strictly inside and no zeros of Du in the disc the rounded
// value equals exact_count. Throws std::domain_error when a pole
// center lies on the curve (within 1e-9 relative) and DataError when p
// vanishes at a quadrature point. The zero scan runs on a 64-cell
// lattice to fill n_plus_detected.
CountReport estimate_count(const PoleSet2D& ps, const BoundaryCurve& curve);

}  // namespace backus
