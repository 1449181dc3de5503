#include "backus/potentials.hpp"

#include <fstream>
#include <sstream>

#include "backus/errors.hpp"
#include "json.hpp"

namespace backus {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_regular(double r2, const char* what) {
    if (r2 == 0.0) throw std::domain_error(std::string("evaluation at a singular point of ") + what);
}

void validate_term(const PointTerm3D& t) {
    for (int a : t.alpha)
        if (a < 0 || a > 1) throw std::invalid_argument("point term multiindex entries must be 0 or 1");
    if (t.order() > 1) throw std::invalid_argument("point term multiindex order must be 0 or 1");
}

void validate_pole(const Pole2D& p) {
    if (p.order < 0) throw std::invalid_argument("pole order must be >= 0");
    if (p.coef == std::complex<double>(0.0, 0.0)) throw std::invalid_argument("pole coefficient must be nonzero");
    if (p.order == 0 && p.coef.imag() != 0.0)
        throw std::invalid_argument("order-0 pole coefficient must be real");
}

// Derivatives of Gamma(d) = -1/(4 pi |d|):
//   D_i Gamma     = d_i / (4 pi r^3)
//   D_ij Gamma    = delta_ij/(4 pi r^3) - 3 d_i d_j/(4 pi r^5)
//   D_ijk Gamma   = -3 (delta_ik d_j + delta_ij d_k + delta_jk d_i)/(4 pi r^5)
//                   + 15 d_i d_j d_k/(4 pi r^7)
double gamma_value(double r) { return -1.0 / (4.0 * kPi * r); }

Vec3 gamma_gradient(const Vec3& d, double r) {
    const double c = 1.0 / (4.0 * kPi * r * r * r);
    return {c * d.x, c * d.y, c * d.z};
}

Mat3 gamma_hessian(const Vec3& d, double r) {
    const double c3 = 1.0 / (4.0 * kPi * r * r * r);
    const double c5 = 3.0 / (4.0 * kPi * std::pow(r, 5));
    Mat3 h;
    const double dd[3] = {d.x, d.y, d.z};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) h(i, j) = (i == j ? c3 : 0.0) - c5 * dd[i] * dd[j];
    return h;
}

// Third derivative slice D_ij(D_k Gamma) for a fixed k.
Mat3 gamma_third(const Vec3& d, double r, int k) {
    const double c5 = 3.0 / (4.0 * kPi * std::pow(r, 5));
    const double c7 = 15.0 / (4.0 * kPi * std::pow(r, 7));
    const double dd[3] = {d.x, d.y, d.z};
    Mat3 h;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double v = c7 * dd[i] * dd[j] * dd[k];
            if (i == k) v -= c5 * dd[j];
            if (i == j) v -= c5 * dd[k];
            if (j == k) v -= c5 * dd[i];
            h(i, j) = v;
        }
    return h;
}

int dipole_axis(const PointTerm3D& t) {
    for (int k = 0; k < 3; ++k)
        if (t.alpha[k] == 1) return k;
    return -1;
}

// Integer power of a complex number by plain repeated multiplication;
// exponents are small pole orders.
std::complex<double> cpow_int(std::complex<double> z, int n) {
    std::complex<double> r{1.0, 0.0};
    for (int i = 0; i < n; ++i) r *= z;
    return r;
}

}  // namespace

double QuadraticBackground3D::value(const Vec3& x) const {
    const Vec3 d = x - center;
    return d.x * d.x + d.y * d.y - 2.0 * d.z * d.z;
}

Vec3 QuadraticBackground3D::gradient(const Vec3& x) const {
    const Vec3 d = x - center;
    return {2.0 * d.x, 2.0 * d.y, -4.0 * d.z};
}

Mat3 QuadraticBackground3D::hessian() const {
    Mat3 h;
    h(0, 0) = 2.0;
    h(1, 1) = 2.0;
    h(2, 2) = -4.0;
    return h;
}

double eval_u3(const Potential3D& pot, const Vec3& x) {
    double v = pot.affine[0] + pot.affine[1] * x.x + pot.affine[2] * x.y + pot.affine[3] * x.z;
    if (pot.background) v += pot.background->value(x);
    for (const PointTerm3D& t : pot.terms) {
        validate_term(t);
        const Vec3 d = x - t.location;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 3d point term");
        const double r = std::sqrt(r2);
        if (t.order() == 0) {
            v += t.moment * gamma_value(r);
        } else {
            const int k = dipole_axis(t);
            v += t.moment * gamma_gradient(d, r)[k];
        }
    }
    return v;
}

Vec3 eval_grad3(const Potential3D& pot, const Vec3& x) {
    Vec3 g{pot.affine[1], pot.affine[2], pot.affine[3]};
    if (pot.background) g += pot.background->gradient(x);
    for (const PointTerm3D& t : pot.terms) {
        validate_term(t);
        const Vec3 d = x - t.location;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 3d point term");
        const double r = std::sqrt(r2);
        if (t.order() == 0) {
            g += t.moment * gamma_gradient(d, r);
        } else {
            const int k = dipole_axis(t);
            const Mat3 h = gamma_hessian(d, r);
            g += t.moment * Vec3{h(0, k), h(1, k), h(2, k)};
        }
    }
    return g;
}

Mat3 eval_hess3(const Potential3D& pot, const Vec3& x) {
    Mat3 h;
    if (pot.background) h += pot.background->hessian();
    for (const PointTerm3D& t : pot.terms) {
        validate_term(t);
        const Vec3 d = x - t.location;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 3d point term");
        const double r = std::sqrt(r2);
        Mat3 th;
        if (t.order() == 0) {
            th = gamma_hessian(d, r);
        } else {
            th = gamma_third(d, r, dipole_axis(t));
        }
        for (int i = 0; i < 9; ++i) h.m[i] += t.moment * th.m[i];
    }
    return h;
}

double eval_u2(const PoleSet2D& ps, const Vec2& x) {
    const auto& c = ps.background;
    double v = c[0] + c[1] * x.x + c[2] * x.y + c[3] * (x.x * x.x - x.y * x.y) + c[4] * x.x * x.y;
    for (const Pole2D& p : ps.poles) {
        validate_pole(p);
        const Vec2 d = x - p.center;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 2d pole");
        if (p.order == 0) {
            v += p.coef.real() / (2.0 * kPi) * 0.5 * std::log(r2);
        } else {
            const std::complex<double> zt{d.x, d.y};
            v += (p.coef * cpow_int(1.0 / zt, p.order)).real();
        }
    }
    return v;
}

Vec2 eval_grad2(const PoleSet2D& ps, const Vec2& x) {
    const auto& c = ps.background;
    Vec2 g{c[1] + 2.0 * c[3] * x.x + c[4] * x.y, c[2] - 2.0 * c[3] * x.y + c[4] * x.x};
    for (const Pole2D& p : ps.poles) {
        validate_pole(p);
        const Vec2 d = x - p.center;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 2d pole");
        if (p.order == 0) {
            const double s = p.coef.real() / (2.0 * kPi * r2);
            g += Vec2{s * d.x, s * d.y};
        } else {
            // u = Re F with F(z) = c z^-m; u_x = Re F', u_y = -Im F'.
            const std::complex<double> zt{d.x, d.y};
            const std::complex<double> fp =
                -static_cast<double>(p.order) * p.coef * cpow_int(1.0 / zt, p.order + 1);
            g += Vec2{fp.real(), -fp.imag()};
        }
    }
    return g;
}

Mat2 eval_hess2(const PoleSet2D& ps, const Vec2& x) {
    const auto& c = ps.background;
    Mat2 h{2.0 * c[3], c[4], -2.0 * c[3]};
    for (const Pole2D& p : ps.poles) {
        validate_pole(p);
        const Vec2 d = x - p.center;
        const double r2 = norm_sq(d);
        check_regular(r2, "a 2d pole");
        if (p.order == 0) {
            const double s = p.coef.real() / (2.0 * kPi);
            const double r4 = r2 * r2;
            h += Mat2{s * (r2 - 2.0 * d.x * d.x) / r4, s * (-2.0 * d.x * d.y) / r4,
                      s * (r2 - 2.0 * d.y * d.y) / r4};
        } else {
            const std::complex<double> zt{d.x, d.y};
            const double m = p.order;
            const std::complex<double> fpp = m * (m + 1.0) * p.coef * cpow_int(1.0 / zt, p.order + 2);
            h += Mat2{fpp.real(), -fpp.imag(), -fpp.real()};
        }
    }
    return h;
}

namespace {

using nlohmann::json;

Vec3 vec3_of(const json& a) {
    if (!a.is_array() || a.size() != 3) throw DataError("expected a 3-element array");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Vec2 vec2_of(const json& a) {
    if (!a.is_array() || a.size() != 2) throw DataError("expected a 2-element array");
    return {a[0].get<double>(), a[1].get<double>()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Potential3D parse_potential3d(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid potential JSON: ") + e.what());
    }
    try {
        Potential3D pot;
        if (j.contains("background") && !j["background"].is_null())
            pot.background = QuadraticBackground3D{vec3_of(j["background"].at("center"))};
        if (j.contains("affine")) {
            const json& a = j["affine"];
            if (!a.is_array() || a.size() != 4) throw DataError("affine must be a 4-element array");
            for (int i = 0; i < 4; ++i) pot.affine[i] = a[i].get<double>();
        }
        for (const json& t : j.value("terms", json::array())) {
            PointTerm3D term;
            term.location = vec3_of(t.at("loc"));
            term.moment = t.at("moment").get<double>();
            if (t.contains("alpha")) {
                const json& a = t["alpha"];
                if (!a.is_array() || a.size() != 3) throw DataError("alpha must be a 3-element array");
                for (int i = 0; i < 3; ++i) term.alpha[i] = a[i].get<int>();
            }
            validate_term(term);
            pot.terms.push_back(term);
        }
        return pot;
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid potential description: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid potential description: ") + e.what());
    }
}

Potential3D load_potential3d(const std::string& path) { return parse_potential3d(slurp(path)); }

PoleSet2D parse_poleset2d(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid pole set JSON: ") + e.what());
    }
    try {
        PoleSet2D ps;
        if (j.contains("background")) {
            const json& a = j["background"];
            if (!a.is_array() || a.size() != 5) throw DataError("background must be a 5-element array");
            for (int i = 0; i < 5; ++i) ps.background[i] = a[i].get<double>();
        }
        for (const json& p : j.value("poles", json::array())) {
            Pole2D pole;
            pole.center = vec2_of(p.at("center"));
            pole.order = p.at("order").get<int>();
            const json& c = p.at("coef");
            if (!c.is_array() || c.size() != 2) throw DataError("coef must be [re, im]");
            pole.coef = {c[0].get<double>(), c[1].get<double>()};
            validate_pole(pole);
            ps.poles.push_back(pole);
        }
        return ps;
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid pole set description: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid pole set description: ") + e.what());
    }
}

PoleSet2D load_poleset2d(const std::string& path) { return parse_poleset2d(slurp(path)); }

}  // namespace backus
