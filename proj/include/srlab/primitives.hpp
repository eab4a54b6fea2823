#pragma once

#include <cmath>
#include <vector>

#include "srlab/coord_map.hpp"
#include "srlab/linalg.hpp"

namespace srlab {

inline double wrap_to_pi(double t) {
    double r = std::remainder(t, 2.0 * M_PI);
    return r;
}

inline Vec gather(const Vec& x, const std::vector<int>& idx) {
    Vec r(static_cast<Eigen::Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) r[static_cast<Eigen::Index>(i)] = x[idx[i]];
    return r;
}

/// Apply a jet-carrying map to the whole chain state.
inline ChainStage stage_map(const SmoothCoordMap& m) {
    return {[m](const Vec& x) { return m.eval(x); },
            [m](const Jet2& j) {
                Jet2 o;
                o.y = m.eval(j.y);
                o.a = m.jet1(j.y, j.a);
                o.b = m.jet1(j.y, j.b);
                o.ab = m.jet2(j.y, j.a, j.b) + m.jet1(j.y, j.ab);
                return o;
            }};
}

/// Apply the map to the gathered sub-state and append its output, leaving the
/// existing state in place. Lets chains express small computation DAGs.
inline ChainStage stage_append(const SmoothCoordMap& m, std::vector<int> idx) {
    auto sub = [m, idx](const Jet2& j) {
        Jet2 s{gather(j.y, idx), gather(j.a, idx), gather(j.b, idx), gather(j.ab, idx)};
        Jet2 o;
        o.y = m.eval(s.y);
        o.a = m.jet1(s.y, s.a);
        o.b = m.jet1(s.y, s.b);
        o.ab = m.jet2(s.y, s.a, s.b) + m.jet1(s.y, s.ab);
        return o;
    };
    return {[m, idx](const Vec& x) { return concat(x, m.eval(gather(x, idx))); },
            [sub](const Jet2& j) {
                Jet2 e = sub(j);
                return Jet2{concat(j.y, e.y), concat(j.a, e.a), concat(j.b, e.b),
                            concat(j.ab, e.ab)};
            }};
}

inline ChainStage stage_select(std::vector<int> idx) {
    return {[idx](const Vec& x) { return gather(x, idx); },
            [idx](const Jet2& j) {
                return Jet2{gather(j.y, idx), gather(j.a, idx), gather(j.b, idx),
                            gather(j.ab, idx)};
            }};
}

inline SmoothCoordMap cm_affine(const Mat& A, const Vec& b) {
    return SmoothCoordMap::closed_form(
        static_cast<int>(A.cols()), static_cast<int>(A.rows()),
        [A, b](const Vec& x) { return Vec(A * x + b); },
        [A](const Vec&, const Vec& v) { return Vec(A * v); },
        [A](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(A.rows())); });
}

inline SmoothCoordMap cm_identity(int n) { return cm_affine(Mat::Identity(n, n), Vec::Zero(n)); }

/// Inverse stereographic chart map, pole coordinate last:
///   north (covers sphere minus north pole): x -> (2x, |x|^2 - 1) / (1 + |x|^2)
///   south (covers sphere minus south pole): x -> (2x, 1 - |x|^2) / (1 + |x|^2)
inline SmoothCoordMap cm_stereo_inv(int n, bool north) {
    double sg = north ? 1.0 : -1.0;
    auto ev = [n, sg](const Vec& x) {
        double u = 1.0 + x.squaredNorm();
        Vec y(n + 1);
        y.head(n) = 2.0 * x / u;
        y[n] = sg * (1.0 - 2.0 / u);
        return y;
    };
    auto j1 = [n, sg](const Vec& x, const Vec& v) {
        double u = 1.0 + x.squaredNorm();
        double a = x.dot(v);
        Vec y(n + 1);
        y.head(n) = 2.0 * v / u - (4.0 * a / (u * u)) * x;
        y[n] = sg * 4.0 * a / (u * u);
        return y;
    };
    auto j2 = [n, sg](const Vec& x, const Vec& v, const Vec& w) {
        double u = 1.0 + x.squaredNorm();
        double a = x.dot(v), b = x.dot(w), c = v.dot(w);
        double u2 = u * u, u3 = u2 * u;
        Vec y(n + 1);
        y.head(n) = -(4.0 * b / u2) * v - (4.0 * a / u2) * w - (4.0 * c / u2) * x +
                    (16.0 * a * b / u3) * x;
        y[n] = sg * (4.0 * c / u2 - 16.0 * a * b / u3);
        return y;
    };
    return SmoothCoordMap::closed_form(n, n + 1, ev, j1, j2);
}

/// Forward stereographic chart map, pole coordinate last: (w, z) -> w / (1 -+ z).
inline SmoothCoordMap cm_stereo_fwd(int n, bool north) {
    double sg = north ? 1.0 : -1.0;  // denominator 1 - sg * z
    auto ev = [n, sg](const Vec& q) {
        double D = 1.0 - sg * q[n];
        return Vec(q.head(n) / D);
    };
    auto j1 = [n, sg](const Vec& q, const Vec& v) {
        double D = 1.0 - sg * q[n];
        double dD = -sg * v[n];
        return Vec(v.head(n) / D - q.head(n) * dD / (D * D));
    };
    auto j2 = [n, sg](const Vec& q, const Vec& v, const Vec& w) {
        double D = 1.0 - sg * q[n];
        double dD1 = -sg * v[n], dD2 = -sg * w[n];
        return Vec(-(v.head(n) * dD2 + w.head(n) * dD1) / (D * D) +
                   2.0 * q.head(n) * dD1 * dD2 / (D * D * D));
    };
    return SmoothCoordMap::closed_form(n + 1, n, ev, j1, j2);
}

/// Sphere chart transition x -> x / |x|^2.
inline SmoothCoordMap cm_inversion(int n) {
    auto ev = [](const Vec& x) { return Vec(x / x.squaredNorm()); };
    auto j1 = [](const Vec& x, const Vec& v) {
        double r2 = x.squaredNorm();
        double a = x.dot(v);
        return Vec(v / r2 - (2.0 * a / (r2 * r2)) * x);
    };
    auto j2 = [](const Vec& x, const Vec& v, const Vec& w) {
        double r2 = x.squaredNorm();
        double r4 = r2 * r2, r6 = r4 * r2;
        double a = x.dot(v), b = x.dot(w), c = v.dot(w);
        return Vec(-(2.0 * b / r4) * v - (2.0 * a / r4) * w - (2.0 * c / r4) * x +
                   (8.0 * a * b / r6) * x);
    };
    return SmoothCoordMap::closed_form(n, n, ev, j1, j2);
}

/// Quadratic fibration formula R^4 -> R^3, written so that the image of a unit
/// quaternion (a,b,c,d) is the unit vector (2(bc+ad), 2(bd-ac), a^2+b^2-c^2-d^2).
/// The symmetric bilinear polarisation makes both jets one-liners.
inline Vec quat_fib_bilinear(const Vec& p, const Vec& q) {
    Vec r(3);
    r[0] = p[1] * q[2] + p[2] * q[1] + p[0] * q[3] + p[3] * q[0];
    r[1] = p[1] * q[3] + p[3] * q[1] - p[0] * q[2] - p[2] * q[0];
    r[2] = p[0] * q[0] + p[1] * q[1] - p[2] * q[2] - p[3] * q[3];
    return r;
}

inline SmoothCoordMap cm_quat_fibration() {
    return SmoothCoordMap::closed_form(
        4, 3, [](const Vec& q) { return quat_fib_bilinear(q, q); },
        [](const Vec& q, const Vec& v) { return Vec(2.0 * quat_fib_bilinear(q, v)); },
        [](const Vec&, const Vec& v, const Vec& w) { return Vec(2.0 * quat_fib_bilinear(v, w)); });
}

/// Local sections of the quadratic fibration over the two stereographic chart
/// domains of the base sphere (pole coordinate last):
///   alpha = 0 over {y3 < 1}:  s0(y) = (-y1, -y2, 0, y3 - 1) / sqrt(2 (1 - y3))
///   alpha = 1 over {y3 > -1}: s1(y) = (0, 1 + y3, y1, y2)  / sqrt(2 (1 + y3))
inline SmoothCoordMap cm_fib_section(int alpha) {
    if (alpha != 0 && alpha != 1) throw Error(ErrorCode::BadArgument, "section index");
    double sg = (alpha == 0) ? -1.0 : 1.0;  // g = (2 (1 + sg*y3))^(-1/2)
    Mat A = Mat::Zero(4, 3);
    Vec b0 = Vec::Zero(4);
    if (alpha == 0) {
        A(0, 0) = -1.0;
        A(1, 1) = -1.0;
        A(3, 2) = 1.0;
        b0[3] = -1.0;
    } else {
        A(1, 2) = 1.0;
        b0[1] = 1.0;
        A(2, 0) = 1.0;
        A(3, 1) = 1.0;
    }
    auto gfun = [sg](double t) { return 1.0 / std::sqrt(2.0 * (1.0 + sg * t)); };
    auto ev = [A, b0, gfun](const Vec& y) { return Vec(gfun(y[2]) * (A * y + b0)); };
    auto j1 = [A, b0, gfun, sg](const Vec& y, const Vec& v) {
        double g = gfun(y[2]);
        double gp = -sg * g * g * g;
        return Vec(gp * v[2] * (A * y + b0) + g * (A * v));
    };
    auto j2 = [A, b0, gfun, sg](const Vec& y, const Vec& v, const Vec& w) {
        double g = gfun(y[2]);
        double gp = -sg * g * g * g;
        double gpp = 3.0 * g * g * g * g * g;
        return Vec(gpp * v[2] * w[2] * (A * y + b0) + gp * v[2] * (A * w) + gp * w[2] * (A * v));
    };
    return SmoothCoordMap::closed_form(3, 4, ev, j1, j2);
}

/// Right multiplication by the unit complex number of angle phi:
/// (q, phi) -> q * (cos phi + i sin phi), a rotation matrix A(phi) acting on q.
inline SmoothCoordMap cm_quat_rotate() {
    auto mat = [](double c, double s) {
        Mat A(4, 4);
        A << c, -s, 0, 0, s, c, 0, 0, 0, 0, c, s, 0, 0, -s, c;
        return A;
    };
    auto ev = [mat](const Vec& z) {
        return Vec(mat(std::cos(z[4]), std::sin(z[4])) * z.head(4));
    };
    auto j1 = [mat](const Vec& z, const Vec& v) {
        double c = std::cos(z[4]), s = std::sin(z[4]);
        return Vec(mat(c, s) * v.head(4) + mat(-s, c) * z.head(4) * v[4]);
    };
    auto j2 = [mat](const Vec& z, const Vec& v, const Vec& w) {
        double c = std::cos(z[4]), s = std::sin(z[4]);
        return Vec(mat(-s, c) * (v.head(4) * w[4] + w.head(4) * v[4]) -
                   mat(c, s) * z.head(4) * v[4] * w[4]);
    };
    return SmoothCoordMap::closed_form(5, 4, ev, j1, j2);
}

/// Complex component of conj(s) * q for quaternions (s, q) stacked in R^8:
/// output (Re, Im) with Re = <s, q> and Im = s_a q_b - s_b q_a - s_c q_d + s_d q_c.
inline SmoothCoordMap cm_fibre_phase_pair() {
    auto bil = [](const Vec& s, const Vec& q) {
        Vec r(2);
        r[0] = s.dot(q);
        r[1] = s[0] * q[1] - s[1] * q[0] - s[2] * q[3] + s[3] * q[2];
        return r;
    };
    auto ev = [bil](const Vec& z) { return bil(z.head(4), z.tail(4)); };
    auto j1 = [bil](const Vec& z, const Vec& v) {
        return Vec(bil(v.head(4), z.tail(4)) + bil(z.head(4), v.tail(4)));
    };
    auto j2 = [bil](const Vec&, const Vec& v, const Vec& w) {
        return Vec(bil(v.head(4), w.tail(4)) + bil(w.head(4), v.tail(4)));
    };
    return SmoothCoordMap::closed_form(8, 2, ev, j1, j2);
}

/// theta = wrap(atan2(im, re) - shift) for input (re, im). The wrap is a
/// locally constant offset, so the jets are those of atan2.
inline SmoothCoordMap cm_atan2_shift(double shift) {
    auto ev = [shift](const Vec& z) {
        Vec r(1);
        r[0] = wrap_to_pi(std::atan2(z[1], z[0]) - shift);
        return r;
    };
    auto j1 = [](const Vec& z, const Vec& v) {
        double r2 = z[0] * z[0] + z[1] * z[1];
        Vec r(1);
        r[0] = (z[0] * v[1] - z[1] * v[0]) / r2;
        return r;
    };
    auto j2 = [](const Vec& z, const Vec& v, const Vec& w) {
        double x = z[0], y = z[1];
        double r2 = x * x + y * y;
        double n1 = x * v[1] - y * v[0];
        Vec r(1);
        r[0] = (w[0] * v[1] - w[1] * v[0]) / r2 - 2.0 * n1 * (x * w[0] + y * w[1]) / (r2 * r2);
        return r;
    };
    return SmoothCoordMap::closed_form(2, 1, ev, j1, j2);
}

}  // namespace srlab
