#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "backus/geometry.hpp"

namespace backus {

// Harmonic quadratic background (x1-c1)^2 + (x2-c2)^2 - 2(x3-c3)^2.
struct QuadraticBackground3D {
    Vec3 center{};

    double value(const Vec3& x) const;
    Vec3 gradient(const Vec3& x) const;
    Mat3 hessian() const;
};

// Point singularity b * D^alpha Gamma(x - location), where
// Gamma(x) = -1/(4 pi |x|). Supported orders |alpha| are 0 (monopole)
// and 1 (dipole).
struct PointTerm3D {
    Vec3 location{};
    double moment = 1.0;
    std::array<int, 3> alpha{0, 0, 0};

    int order() const { return alpha[0] + alpha[1] + alpha[2]; }
};

// Sum of an optional quadratic background, an affine part
// a0 + a1 x1 + a2 x2 + a3 x3, and point terms. Harmonic away from the
// term locations.
struct Potential3D {
    std::optional<QuadraticBackground3D> background;
    std::array<double, 4> affine{0.0, 0.0, 0.0, 0.0};
    std::vector<PointTerm3D> terms;
};

double eval_u3(const Potential3D& pot, const Vec3& x);
Vec3 eval_grad3(const Potential3D& pot, const Vec3& x);
Mat3 eval_hess3(const Potential3D& pot, const Vec3& x);

// Planar singular term. Order 0 is (c/2pi) log|x - center| with real c;
// order m >= 1 is Re(c (z - z_c)^-m) in the complex coordinate
// z = x1 + i x2.
struct Pole2D {
    Vec2 center{};
    int order = 0;
    std::complex<double> coef{1.0, 0.0};
};

// Harmonic polynomial background of degree <= 2 (coefficients for
// 1, x, y, x^2 - y^2, xy) plus poles.
struct PoleSet2D {
    std::array<double, 5> background{0.0, 0.0, 0.0, 0.0, 0.0};
    std::vector<Pole2D> poles;
};

double eval_u2(const PoleSet2D& ps, const Vec2& x);
Vec2 eval_grad2(const PoleSet2D& ps, const Vec2& x);
Mat2 eval_hess2(const PoleSet2D& ps, const Vec2& x);

// JSON loaders; schemas are documented in the README. Malformed or
// invalid descriptions raise DataError.
Potential3D parse_potential3d(const std::string& json_text);
Potential3D load_potential3d(const std::string& path);
PoleSet2D parse_poleset2d(const std::string& json_text);
PoleSet2D load_poleset2d(const std::string& path);

}  // namespace backus
