#include "backus/source_count.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "backus/errors.hpp"

namespace backus {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kScanGrid = 64;         // lattice used by estimate_count
// Halvings of the candidate cell. Going much deeper than ~1e-11 of the
// curve radius makes the subcell corners collapse onto the same
// representable double and kills the sign change spuriously.
constexpr int kBisectionLevels = 30;

void validate_curve(const BoundaryCurve& curve) {
    if (!(curve.radius > 0.0)) throw std::invalid_argument("curve radius must be positive");
    if (curve.quad_points < 8) throw std::invalid_argument("curve needs at least 8 quadrature points");
}

// Gradient evaluation that refuses points at a pole center instead of
// throwing, so lattice corners that land exactly on one can be skipped.
std::optional<Vec2> gradient_away_from_poles(const PoleSet2D& ps, const Vec2& x, double scale) {
    for (const Pole2D& pole : ps.poles)
        if (norm(x - pole.center) <= 1e-13 * scale) return std::nullopt;
    return eval_grad2(ps, x);
}

struct Cell {
    Vec2 lo;
    double size = 0.0;
};

struct CornerSigns {
    bool straddle_x = false;
    bool straddle_y = false;
    bool valid = false;
};

CornerSigns classify(const PoleSet2D& ps, const Cell& cell, double scale) {
    double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
    for (int c = 0; c < 4; ++c) {
        const Vec2 corner{cell.lo.x + (c & 1 ? cell.size : 0.0),
                          cell.lo.y + (c & 2 ? cell.size : 0.0)};
        const auto g = gradient_away_from_poles(ps, corner, scale);
        if (!g) return {};
        if (c == 0) {
            min_x = max_x = g->x;
            min_y = max_y = g->y;
        } else {
            min_x = std::min(min_x, g->x);
            max_x = std::max(max_x, g->x);
            min_y = std::min(min_y, g->y);
            max_y = std::max(max_y, g->y);
        }
    }
    CornerSigns s;
    s.valid = true;
    s.straddle_x = min_x <= 0.0 && max_x >= 0.0;
    s.straddle_y = min_y <= 0.0 && max_y >= 0.0;
    return s;
}

// Bisection on the straddling cell: descend into a quadrant that keeps
// the sign change in both components until the cell is negligibly
// small, then confirm with a direct gradient evaluation.
std::optional<Vec2> refine_zero(const PoleSet2D& ps, Cell cell, double scale) {
    const double gradient_scale = [&] {
        double m = 0.0;
        for (int c = 0; c < 4; ++c) {
            const Vec2 corner{cell.lo.x + (c & 1 ? cell.size : 0.0),
                              cell.lo.y + (c & 2 ? cell.size : 0.0)};
            if (const auto g = gradient_away_from_poles(ps, corner, scale)) m = std::max(m, norm(*g));
        }
        return m;
    }();
    for (int level = 0; level < kBisectionLevels; ++level) {
        const double half = 0.5 * cell.size;
        bool descended = false;
        for (int quadrant = 0; quadrant < 4 && !descended; ++quadrant) {
            const Cell sub{{cell.lo.x + (quadrant & 1 ? half : 0.0),
                            cell.lo.y + (quadrant & 2 ? half : 0.0)},
                           half};
            const CornerSigns s = classify(ps, sub, scale);
            if (s.valid && s.straddle_x && s.straddle_y) {
                cell = sub;
                descended = true;
            }
        }
        if (!descended) return std::nullopt;  // the straddle was spurious
    }
    const Vec2 center{cell.lo.x + 0.5 * cell.size, cell.lo.y + 0.5 * cell.size};
    const auto g = gradient_away_from_poles(ps, center, scale);
    if (!g || norm(*g) > 1e-6 * (1.0 + gradient_scale)) return std::nullopt;
    return center;
}

}  // namespace

int exact_count(const PoleSet2D& ps) {
    int n = 0;
    for (const Pole2D& pole : ps.poles) n += pole.order + 1;
    return n;
}

int scan_zeros(const PoleSet2D& ps, const BoundaryCurve& curve, int grid_n, int* ambiguous) {
    validate_curve(curve);
    if (grid_n < 32) throw std::invalid_argument("scan_zeros needs grid_n >= 32");
    if (ambiguous) *ambiguous = 0;

    const double R = curve.radius;
    const double cell_size = 2.0 * R / grid_n;
    const Vec2 origin{curve.center.x - R, curve.center.y - R};
    std::vector<Vec2> zeros;
    for (int j = 0; j < grid_n; ++j) {
        for (int i = 0; i < grid_n; ++i) {
            const Cell cell{{origin.x + i * cell_size, origin.y + j * cell_size}, cell_size};
            // Only cells whose corners all lie inside the disc count.
            bool inside = true;
            for (int c = 0; c < 4 && inside; ++c) {
                const Vec2 corner{cell.lo.x + (c & 1 ? cell_size : 0.0),
                                  cell.lo.y + (c & 2 ? cell_size : 0.0)};
                inside = norm(corner - curve.center) < R;
            }
            if (!inside) continue;
            const CornerSigns s = classify(ps, cell, R);
            if (!s.valid || !s.straddle_x || !s.straddle_y) continue;
            const auto zero = refine_zero(ps, cell, R);
            if (!zero) {
                // Poles also flip both components across a cell; the
                // confirmation step rejects them, which is expected,
                // so only count genuinely unresolved cells.
                bool near_pole = false;
                for (const Pole2D& pole : ps.poles)
                    near_pole = near_pole ||
                                (std::abs(pole.center.x - (cell.lo.x + 0.5 * cell_size)) <= cell_size &&
                                 std::abs(pole.center.y - (cell.lo.y + 0.5 * cell_size)) <= cell_size);
                if (!near_pole && ambiguous) ++*ambiguous;
                continue;
            }
            if (!(norm(*zero - curve.center) < R)) continue;
            bool duplicate = false;
            for (const Vec2& z : zeros) duplicate = duplicate || norm(z - *zero) <= 1e-8 * R;
            if (!duplicate) zeros.push_back(*zero);
        }
    }
    return static_cast<int>(zeros.size());
}

CountReport estimate_count(const PoleSet2D& ps, const BoundaryCurve& curve) {
    validate_curve(curve);
    const double R = curve.radius;
    for (const Pole2D& pole : ps.poles) {
        const double dist = norm(pole.center - curve.center);
        if (std::abs(dist - R) <= 1e-9 * R) {
            std::ostringstream msg;
            msg << "pole at (" << pole.center.x << ", " << pole.center.y << ") lies on the curve";
            throw std::domain_error(msg.str());
        }
    }

    const int M = curve.quad_points;
    double sum = 0.0;
    double p_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < M; ++k) {
        const double t = 2.0 * kPi * k / M;
        const Vec2 normal{std::cos(t), std::sin(t)};
        const Vec2 x{curve.center.x + R * normal.x, curve.center.y + R * normal.y};
        const Vec2 du = eval_grad2(ps, x);
        const double p = norm_sq(du);
        if (!(p > 0.0)) {
            std::ostringstream msg;
            msg << "p vanishes on the curve at t = " << t;
            throw DataError(msg.str());
        }
        p_min = std::min(p_min, p);
        const Mat2 h = eval_hess2(ps, x);
        // Dp = 2 H Du, q = normal . Dp.
        const Vec2 dp{2.0 * (h.xx * du.x + h.xy * du.y), 2.0 * (h.xy * du.x + h.yy * du.y)};
        sum += dot(normal, dp) / (2.0 * p);
    }

    CountReport report;
    report.estimate = -(R / M) * sum;
    report.rounded = std::llround(report.estimate);
    report.exact_n_minus = exact_count(ps);
    report.n_plus_detected = scan_zeros(ps, curve, kScanGrid);
    report.p_min_on_curve = p_min;
    return report;
}

}  // namespace backus
