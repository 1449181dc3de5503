#include "backus/trace_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "backus/errors.hpp"

namespace backus {

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace

double TraceData::p(const Vec2& x) const { return norm_sq(eval_grad3(source, {x.x, x.y, 0.0})); }

double TraceData::q(const Vec2& x) const {
    const Vec3 g = eval_grad3(source, {x.x, x.y, 0.0});
    const Mat3 h = eval_hess3(source, {x.x, x.y, 0.0});
    return 2.0 * (g.x * h(0, 2) + g.y * h(1, 2) + g.z * h(2, 2));
}

int TraceData::sigma(const Vec2& x) const { return sign_of(eval_grad3(source, {x.x, x.y, 0.0}).z); }

double TraceData::u_exact(const Vec2& x) const { return eval_u3(source, {x.x, x.y, 0.0}); }

Vec2 TraceData::tangential_gradient(const Vec2& x) const {
    const Vec3 g = eval_grad3(source, {x.x, x.y, 0.0});
    return {g.x, g.y};
}

TraceSample TraceData::sample(const Vec2& x) const {
    const Vec3 g = eval_grad3(source, {x.x, x.y, 0.0});
    const Mat3 h = eval_hess3(source, {x.x, x.y, 0.0});
    TraceSample s;
    s.p = norm_sq(g);
    s.q = 2.0 * (g.x * h(0, 2) + g.y * h(1, 2) + g.z * h(2, 2));
    s.sigma = sign_of(g.z);
    return s;
}

TraceData make_trace(const Potential3D& pot) {
    for (const PointTerm3D& t : pot.terms) {
        const Vec3& loc = t.location;
        if (loc.z == 0.0 && loc.x >= 0.0 && loc.x <= 1.0 && loc.y >= 0.0 && loc.y <= 1.0) {
            std::ostringstream msg;
            msg << "point term at (" << loc.x << ", " << loc.y << ", 0) lies on the trace plane "
                << "inside the unit square";
            throw DataError(msg.str());
        }
    }
    return TraceData{pot};
}

AdmissibilityReport check_admissible(const TraceData& td, int grid_n) {
    if (grid_n < 2) throw std::invalid_argument("check_admissible: grid_n must be >= 2");
    AdmissibilityReport rep;
    rep.min_p = std::numeric_limits<double>::infinity();
    rep.max_p = -std::numeric_limits<double>::infinity();
    rep.min_margin = std::numeric_limits<double>::infinity();
    rep.sigma_constant = true;
    bool first = true;
    for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
            const Vec2 x{static_cast<double>(i) / (grid_n - 1), static_cast<double>(j) / (grid_n - 1)};
            const Vec3 g = eval_grad3(td.source, {x.x, x.y, 0.0});
            const double p = norm_sq(g);
            const double margin = p - (g.x * g.x + g.y * g.y);
            rep.min_p = std::min(rep.min_p, p);
            rep.max_p = std::max(rep.max_p, p);
            rep.min_margin = std::min(rep.min_margin, margin);
            const int s = sign_of(g.z);
            if (first) {
                rep.sigma_value = s;
                first = false;
            } else if (s != rep.sigma_value) {
                rep.sigma_constant = false;
            }
        }
    if (rep.sigma_value == 0) rep.sigma_constant = false;
    rep.margin_flagged = rep.min_margin < 1e-10 * rep.max_p;
    return rep;
}

void dump_grid_csv(const TraceData& td, int n, std::ostream& out) {
    if (n < 2) throw std::invalid_argument("dump_grid_csv: n must be >= 2");
    out << "x,y,p,q,sigma,u_exact\n";
    char line[256];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vec2 x{static_cast<double>(i) / (n - 1), static_cast<double>(j) / (n - 1)};
            const TraceSample s = td.sample(x);
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", x.x, x.y, s.p,
                          s.q, s.sigma, td.u_exact(x));
            out << line;
        }
}

std::array<double, 4> nondiv_terms(const TraceData& td, const Vec2& x) {
    const Vec3 g = eval_grad3(td.source, {x.x, x.y, 0.0});
    const Mat3 h = eval_hess3(td.source, {x.x, x.y, 0.0});
    const double p = norm_sq(g);
    const double du2 = g.x * g.x + g.y * g.y;
    const double s = p - du2;
    const double lap2 = h(0, 0) + h(1, 1);
    const double bterm = g.x * g.x * h(0, 0) + 2.0 * g.x * g.y * h(0, 1) + g.y * g.y * h(1, 1);
    // Tangential derivatives of p via the chain rule over the full gradient.
    const double dp1 = 2.0 * (g.x * h(0, 0) + g.y * h(1, 0) + g.z * h(2, 0));
    const double dp2 = 2.0 * (g.x * h(0, 1) + g.y * h(1, 1) + g.z * h(2, 1));
    const double q = 2.0 * (g.x * h(0, 2) + g.y * h(1, 2) + g.z * h(2, 2));
    const double sg = sign_of(g.z);
    return {s * lap2, bterm, -0.5 * (dp1 * g.x + dp2 * g.y), 0.5 * q * sg * std::sqrt(s)};
}

}  // namespace backus
