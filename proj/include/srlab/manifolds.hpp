#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "srlab/chart.hpp"
#include "srlab/primitives.hpp"

namespace srlab {

/// R^n as a single chart. The huge margin makes LeftDomain unreachable for
/// desk-scale flows while still catching numerical blow-ups.
inline ChartedManifold euclidean_space(int dim, const std::string& name = "R^n",
                                       double extent = 1e6) {
    ChartedManifold M(name);
    Chart c;
    c.dim = dim;
    c.label = "euclidean";
    c.margin = [extent](const Vec& x) { return extent - x.norm(); };
    c.sample = [dim](Rng& rng) { return rng.in_ball(dim, 2.0); };
    M.add_chart(c);
    return M;
}

/// S^n with the two stereographic charts, pole coordinate last.
/// Chart 0 projects from the north pole (and excludes it), chart 1 from the
/// south pole. The transition either way is x -> x / |x|^2; the equator sits
/// at |x| = 1 in both charts.
inline ChartedManifold sphere_stereographic(int n, const std::string& name = "S^n",
                                            double chart_radius = 3.0) {
    ChartedManifold M(name);
    for (int i = 0; i < 2; ++i) {
        Chart c;
        c.dim = n;
        c.label = (i == 0) ? "stereo_north" : "stereo_south";
        c.margin = [chart_radius](const Vec& x) { return chart_radius - x.norm(); };
        c.sample = [n](Rng& rng) { return rng.in_ball(n, 1.2); };
        M.add_chart(c);
    }
    M.add_transition(0, 1, cm_inversion(n));
    M.add_transition(1, 0, cm_inversion(n));
    return M;
}

/// Embedding of a stereographic chart into R^(n+1).
inline SmoothCoordMap sphere_chart_embedding(int n, int chart) {
    return cm_stereo_inv(n, chart == 0);
}

/// Chart coordinates of an embedded point near S^n.
inline SmoothCoordMap sphere_chart_projection(int n, int chart) {
    return cm_stereo_fwd(n, chart == 0);
}

inline Vec sphere_embed(const ChartedManifold&, int n, const Point& p) {
    return sphere_chart_embedding(n, p.chart).eval(p.x);
}

/// T^k with angle coordinates. 2^k charts, one per combination of angle
/// offsets {0, pi}; transitions are wrapped translations.
inline ChartedManifold torus_angles(int k, const std::string& name = "T^k") {
    ChartedManifold M(name);
    int n_charts = 1 << k;
    double half_width = 0.9 * M_PI;
    for (int b = 0; b < n_charts; ++b) {
        Chart c;
        c.dim = k;
        c.label = "angles_" + std::to_string(b);
        c.margin = [k, half_width](const Vec& th) {
            double m = half_width;
            for (int i = 0; i < k; ++i) m = std::min(m, half_width - std::abs(th[i]));
            return m;
        };
        c.sample = [k](Rng& rng) { return rng.vector(k, -2.0, 2.0); };
        M.add_chart(c);
    }
    for (int b = 0; b < n_charts; ++b) {
        for (int b2 = 0; b2 < n_charts; ++b2) {
            if (b == b2) continue;
            Vec shift(k);
            for (int i = 0; i < k; ++i)
                shift[i] = (((b >> i) & 1) - ((b2 >> i) & 1)) * M_PI;
            auto ev = [shift, k](const Vec& th) {
                Vec r(k);
                for (int i = 0; i < k; ++i) r[i] = wrap_to_pi(th[i] + shift[i]);
                return r;
            };
            M.add_transition(b, b2,
                             SmoothCoordMap::closed_form(
                                 k, k, ev, [](const Vec&, const Vec& v) { return v; },
                                 [k](const Vec&, const Vec&, const Vec&) {
                                     return Vec(Vec::Zero(k));
                                 }));
        }
    }
    return M;
}

/// Declarative manifold description: {"builtin": ..., "dim": ..., "name": ...}
/// with builtins "euclidean", "stereographic_pair" and "torus_angles".
inline ChartedManifold manifold_from_json(const nlohmann::json& j) {
    if (!j.contains("builtin"))
        throw Error(ErrorCode::ConfigParse, "manifold config needs a 'builtin' key");
    std::string builtin = j.at("builtin").get<std::string>();
    int dim = j.value("dim", 2);
    std::string name = j.value("name", builtin);
    if (builtin == "euclidean") return euclidean_space(dim, name);
    if (builtin == "stereographic_pair")
        return sphere_stereographic(dim, name, j.value("chart_radius", 3.0));
    if (builtin == "torus_angles") return torus_angles(dim, name);
    throw Error(ErrorCode::ConfigParse, "unknown builtin manifold '" + builtin + "'");
}

}  // namespace srlab
