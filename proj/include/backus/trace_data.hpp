#pragma once

#include <array>
#include <iosfwd>

#include "backus/potentials.hpp"

namespace backus {

struct TraceSample {
    double p = 0.0;   // |grad u|^2 at (x1, x2, 0)
    double q = 0.0;   // D3 of |grad u|^2
    int sigma = 0;    // sign of D3 u
};

// Augmented boundary data of a 3d potential on the plane x3 = 0: the
// squared field magnitude p, its normal derivative q = D3 p, the sign
// sigma of the normal component, and the exact trace of u.
struct TraceData {
    Potential3D source;

    double p(const Vec2& x) const;
    double q(const Vec2& x) const;
    int sigma(const Vec2& x) const;
    double u_exact(const Vec2& x) const;
    Vec2 tangential_gradient(const Vec2& x) const;
    TraceSample sample(const Vec2& x) const;
};

// Rejects sources with a singularity on the trace plane inside the
// closed unit square.
TraceData make_trace(const Potential3D& pot);

struct AdmissibilityReport {
    double min_p = 0.0;
    double max_p = 0.0;
    double min_margin = 0.0;  // min over the grid of p - |Du_tangential|^2
    bool sigma_constant = false;
    int sigma_value = 0;
    bool margin_flagged = false;  // margin fell below 1e-10 * max p

    bool admissible() const { return sigma_constant && min_p > 0.0 && !margin_flagged; }
};

// Samples a grid_n x grid_n lattice on the closed unit square.
AdmissibilityReport check_admissible(const TraceData& td, int grid_n);

// CSV dump `x,y,p,q,sigma,u_exact` over an n x n lattice including the
// endpoints, x varying slowest.
void dump_grid_csv(const TraceData& td, int n, std::ostream& out);

// The four addends of the non-divergence form of the trace equation at
// a plane point, evaluated analytically:
//   [0] (p - |Du|^2) * (D11 u + D22 u)
//   [1] sum_{i,j<=2} Di u Dj u Dij u
//   [2] -1/2 sum_{i<=2} Di p Di u
//   [3] (q/2) sigma sqrt(p - |Du|^2)
// Their sum vanishes identically for harmonic sources.
std::array<double, 4> nondiv_terms(const TraceData& td, const Vec2& x);

}  // namespace backus
