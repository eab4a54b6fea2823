#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srlab/bundle.hpp"
#include "srlab/curve.hpp"
#include "srlab/ode.hpp"
#include "srlab/partition.hpp"
#include "srlab/primitives.hpp"

namespace srlab {

/// A spray on an anchored bundle, stored through its free acceleration slot:
/// the field on the total space at (x, w) is (anchor(x) w, accel(x, w)). The
/// base velocity is reconstructed from the anchor, which makes the section
/// property and anchor-lifting exact by construction; quadratic homogeneity
/// of accel in w is what the axiom checks actually probe.
struct Spray {
    const AnchoredBundle* bundle = nullptr;
    std::string name;
    std::function<Vec(int, const Vec&, const Vec&)> accel;
    std::vector<int> home_charts;  // empty: defined in every chart

    bool defined_in(int chart) const {
        return home_charts.empty() ||
               std::find(home_charts.begin(), home_charts.end(), chart) != home_charts.end();
    }

    /// S(e) as a tangent vector on the total space, in e's chart.
    TangentVec value(const Point& e) const {
        if (!defined_in(e.chart))
            throw Error(ErrorCode::NotInChart,
                        name + ": spray not defined in chart " + std::to_string(e.chart));
        int d = bundle->base_dim();
        Vec x = e.x.head(d), w = e.x.tail(bundle->fibre_dim);
        Vec xdot = bundle->anchor_block(e.chart, x) * w;
        return {e, concat(xdot, accel(e.chart, x, w))};
    }

    VectorFieldOnManifold field() const {
        Spray copy = *this;
        return {&bundle->total, [copy](const Point& e) { return copy.value(e); }};
    }
};

/// Local spray in one trivialized chart from a symmetric bilinear form:
/// accel(x, w) = B(x)(w, w). Symmetry of B is sampled at construction.
inline Spray quadratic_local_spray(
    const AnchoredBundle* bundle, int chart,
    std::function<Vec(const Vec&, const Vec&, const Vec&)> B, const std::string& name = "") {
    Rng rng(0x5ca1ab1e);
    const Chart& c = bundle->base_manifold->chart(chart);
    for (int i = 0; i < 24; ++i) {
        Vec x = c.sample(rng);
        Vec v = rng.in_ball(bundle->fibre_dim, 1.5), w = rng.in_ball(bundle->fibre_dim, 1.5);
        Vec d = B(x, v, w) - B(x, w, v);
        if (d.norm() > 1e-10 * (1.0 + B(x, v, w).norm()))
            throw Error(ErrorCode::AsymmetricB,
                        "quadratic spray: B(v,w) != B(w,v) at a sampled point");
    }
    Spray s;
    s.bundle = bundle;
    s.name = name.empty() ? ("quadratic@" + std::to_string(chart)) : name;
    s.accel = [B](int, const Vec& x, const Vec& w) { return B(x, w, w); };
    s.home_charts = {chart};
    return s;
}

/// Convex gluing of local sprays by a partition of unity on the base:
/// S(e) = sum_a h_a(pi(e)) S_a(e), each term transported into the working
/// trivialization with the exact derivative of the fibre transition.
inline Spray glue_sprays(const std::vector<Spray>& locals, const ChartPartitionOfUnity& pu) {
    if (locals.empty()) throw Error(ErrorCode::BadArgument, "glue_sprays: no local sprays");
    const AnchoredBundle* E = locals[0].bundle;
    for (const auto& s : locals)
        if (s.bundle != E || s.home_charts.size() != 1)
            throw Error(ErrorCode::BadArgument,
                        "glue_sprays: locals must share the bundle and have one home chart");

    std::vector<std::pair<int, std::function<Vec(int, const Vec&, const Vec&)>>> parts;
    for (const auto& s : locals) parts.push_back({s.home_charts[0], s.accel});

    Spray g;
    g.bundle = E;
    g.name = "glued(" + std::to_string(locals.size()) + ")";
    g.accel = [E, parts, pu](int c, const Vec& x, const Vec& w) -> Vec {
        const ChartedManifold& B = *E->base_manifold;
        Vec acc = Vec::Zero(E->fibre_dim);
        for (auto& [alpha, h] : pu.weights(Point{c, x})) {
            auto it = std::find_if(parts.begin(), parts.end(),
                                   [a = alpha](const auto& pr) { return pr.first == a; });
            if (it == parts.end())
                throw Error(ErrorCode::CoverageGap,
                            "glue_sprays: positive weight on a chart with no local spray");
            if (alpha == c) {
                acc += h * it->second(c, x, w);
                continue;
            }
            Vec xa = B.transition(Point{c, x}, alpha).x;
            Vec wa = E->fibre_transition(c, alpha, x) * w;
            Vec aa = it->second(alpha, xa, wa);
            Vec xdot_a = E->anchor_block(alpha, xa) * wa;
            acc += h * (E->fibre_transition_deriv(alpha, c, xa, xdot_a) * wa +
                        E->fibre_transition(alpha, c, xa) * aa);
        }
        return acc;
    };
    return g;
}

/// Conjugate a spray through a fibre-wise linear bundle isomorphism covering
/// the identity, given per chart as w -> Phi(x) w with directional derivative
/// dPhi(x; dx). The target bundle's anchor must satisfy rho' o phi = rho,
/// sampled at construction.
inline Spray conjugate_spray(const AnchoredBundle* target,
                             std::function<Mat(int, const Vec&)> Phi,
                             std::function<Mat(int, const Vec&, const Vec&)> dPhi,
                             const Spray& S) {
    const AnchoredBundle* E = S.bundle;
    if (target->base_manifold != E->base_manifold || target->fibre_dim != E->fibre_dim)
        throw Error(ErrorCode::BadArgument, "conjugate_spray: incompatible bundles");
    Rng rng(0xd1ce);
    for (int i = 0; i < 24; ++i) {
        Point e = E->total.sample_point(rng);
        if (!S.defined_in(e.chart)) continue;
        Vec x = e.x.head(E->base_dim());
        Mat lhs = target->anchor_block(e.chart, x) * Phi(e.chart, x);
        Mat rhs = E->anchor_block(e.chart, x);
        if ((lhs - rhs).norm() > 1e-9 * (1.0 + rhs.norm()))
            throw Error(ErrorCode::AnchorMismatch,
                        "conjugate_spray: target anchor does not intertwine with phi");
    }
    auto accel = S.accel;
    int d = E->base_dim();
    Spray out;
    out.bundle = target;
    out.name = S.name + "~phi";
    out.home_charts = S.home_charts;
    out.accel = [E, Phi, dPhi, accel, d](int c, const Vec& x, const Vec& wp) -> Vec {
        Vec w = Phi(c, x).partialPivLu().solve(wp);
        Vec xdot = E->anchor_block(c, x) * w;
        return dPhi(c, x, xdot) * w + Phi(c, x) * accel(c, x, w);
    };
    return out;
}

/// The projected base path of a spray trajectory, as a curve whose velocity
/// comes from the anchor (never from finite differences).
inline CurveOnManifold base_curve(const Spray& S, const Point& e, double t_max,
                                  const IntegratorConfig& cfg = {}) {
    CurveOnManifold up = CurveOnManifold::from_flow(S.field(), e, t_max, cfg);
    const AnchoredBundle* E = S.bundle;
    auto at = [up, E](double t) { return E->project(up.at(t)); };
    auto vel = [up, E](double t) { return E->anchor(up.at(t)); };
    return {E->base_manifold, at, vel};
}

/// exp_S = (bundle projection) after the time-1 flow of S.
struct SprayExpResult {
    Point point;           // base point when status == Complete
    FlowStatus status = FlowStatus::Complete;
};

inline SprayExpResult spray_exponential(const Spray& S, const Point& e,
                                        const IntegratorConfig& cfg = {}) {
    FlowResult r = flow(S.field(), e, 1.0, cfg);
    return {S.bundle->project(r.end), r.status};
}

/// Axiom residuals, evaluated through the generic machinery rather than the
/// storage layout: (S1) the field is a section over E, (S2) the projection
/// differential of S equals the anchor, (S3) quadratic homogeneity under
/// fibre scaling at several lambda including zero and negatives.
struct SprayAxiomResult {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int n_samples = 0;
};

inline SprayAxiomResult check_spray_axioms(const Spray& S, Rng& rng, int n) {
    SprayAxiomResult r;
    const AnchoredBundle& E = *S.bundle;
    SmoothMap proj = E.projection();
    int d = E.base_dim(), k = E.fibre_dim;
    const double lambdas[] = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
    for (int i = 0; i < n; ++i) {
        Point e = E.total.sample_point(rng);
        if (!S.defined_in(e.chart)) {
            if (S.home_charts.empty()) continue;
            e.chart = S.home_charts[static_cast<size_t>(
                rng.uniform_int(static_cast<int>(S.home_charts.size())))];
            e.x = E.total.chart(e.chart).sample(rng);
        }
        TangentVec v = S.value(e);
        r.s1 = std::max(r.s1, (v.base.x - e.x).norm());

        TangentVec tp = differential(proj, v, e.chart);
        TangentVec rho = E.anchor(e);
        r.s2 = std::max(r.s2, (tp.v - rho.v).norm() + (tp.base.x - rho.base.x).norm());

        Mat D = Mat::Identity(d + k, d + k);
        for (double lam : lambdas) {
            for (int j = d; j < d + k; ++j) D(j, j) = lam;
            SmoothCoordMap hl = cm_affine(D, Vec::Zero(d + k));
            Point le{e.chart, hl.eval(e.x)};
            Vec lhs = S.value(le).v;
            Vec rhs = hl.jet1(e.x, lam * v.v);
            r.s3 = std::max(r.s3, (lhs - rhs).norm());
        }
        ++r.n_samples;
    }
    return r;
}

/// Base-projection homogeneity of the flow: pi Fl_s(t v) = pi Fl_{st}(v),
/// compared over completing sample pairs.
struct HomogeneityResult {
    double max_residual = 0.0;
    int n_complete = 0;
    int n_samples = 0;
};

inline HomogeneityResult flow_homogeneity_check(const Spray& S, Rng& rng, int n,
                                                const IntegratorConfig& cfg = {}) {
    HomogeneityResult r;
    const AnchoredBundle& E = *S.bundle;
    const ChartedManifold& B = *E.base_manifold;
    auto f = S.field();
    for (int i = 0; i < n; ++i) {
        Point e = E.total.sample_point(rng);
        if (!S.defined_in(e.chart)) {
            --i;
            continue;
        }
        double s = (i % 7 == 0) ? 1.0 : rng.uniform(0.3, 1.2);
        double t = (i % 5 == 0) ? 0.0 : rng.uniform(-1.2, 1.2);
        if (i % 11 == 0) { s = 0.5; t = 2.0; }
        ++r.n_samples;
        FlowResult lhs = flow(f, E.scale(e, t), s, cfg);
        FlowResult rhs = flow(f, e, s * t, cfg);
        if (lhs.status != FlowStatus::Complete || rhs.status != FlowStatus::Complete) continue;
        ++r.n_complete;
        double dist = B.distance(E.project(lhs.end), E.project(rhs.end));
        r.max_residual = std::max(r.max_residual, dist);
    }
    return r;
}

/// Anchored-path defect of a sampled curve in E: the anchor evaluated along
/// the curve against a central difference of the projected base path.
inline double anchored_path_defect(const std::vector<std::pair<double, Point>>& trace,
                                   const AnchoredBundle& E) {
    const ChartedManifold& B = *E.base_manifold;
    double worst = 0.0;
    for (size_t i = 1; i + 1 < trace.size(); ++i) {
        const auto& [tm, em] = trace[i - 1];
        const auto& [t0, e0] = trace[i];
        const auto& [tp, ep] = trace[i + 1];
        Point bm = B.transition(E.project(em), e0.chart);
        Point bp = B.transition(E.project(ep), e0.chart);
        Vec fd = (bp.x - bm.x) / (tp - tm);
        worst = std::max(worst, (fd - E.anchor(e0).v).norm());
    }
    return worst;
}

/// Fibre derivative of exp at the zero vector against the anchor:
/// d/dt|_0 exp_S(t d) = rho(d), via central differences in the base chart
/// of m.
struct FibreDerivativeResult {
    double max_residual = 0.0;
    int n_samples = 0;
};

inline FibreDerivativeResult fibre_derivative_check(const Spray& S, const Point& m, Rng& rng,
                                                    int n_dirs, double h = 1e-4,
                                                    const IntegratorConfig& cfg = {}) {
    FibreDerivativeResult r;
    const AnchoredBundle& E = *S.bundle;
    const ChartedManifold& B = *E.base_manifold;
    int k = E.fibre_dim;
    for (int i = 0; i < n_dirs; ++i) {
        Vec d = (i < k) ? Vec(Vec::Unit(k, i)) : rng.unit_vector(k);
        auto ep = spray_exponential(S, E.point(m.chart, m.x, h * d), cfg);
        auto em = spray_exponential(S, E.point(m.chart, m.x, -h * d), cfg);
        if (ep.status != FlowStatus::Complete || em.status != FlowStatus::Complete) continue;
        Vec xp = B.transition(ep.point, m.chart).x;
        Vec xm = B.transition(em.point, m.chart).x;
        Vec fd = (xp - xm) / (2.0 * h);
        Vec rho = E.anchor_block(m.chart, m.x) * d;
        r.max_residual = std::max(r.max_residual, (fd - rho).norm());
        ++r.n_samples;
    }
    return r;
}

namespace detail {

inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 48) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return std::min(fc, fd);
}

/// Global minimum over [lo, hi]: coarse scan, then golden-section refinement
/// inside the bracketing grid cells. Robust against multiple local minima
/// (e.g. a gap function that wraps around a closed geodesic several times).
inline double scan_min(const std::function<double(double)>& f, double lo, double hi,
                       int n_scan = 48, int refine_iters = 32) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i <= n_scan; ++i) {
        double t = lo + (hi - lo) * i / n_scan;
        double v = f(t);
        if (v < best) {
            best = v;
            best_i = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best_i - 1) / n_scan;
    double b = lo + (hi - lo) * std::min(n_scan, best_i + 1) / n_scan;
    return std::min(best, golden_min(f, a, b, refine_iters));
}

}  // namespace detail

/// Empirical radius over the fibre at m within which (a) time-1 flows
/// complete and (b) exp stays injective. Injectivity is probed with
/// opposite-ray sweeps: for each direction, the distance between exp(r d) and
/// exp(-b d) is minimized over b; a vanishing minimum witnesses a collision
/// of (pi, exp) at separated inputs. Bisection refines the largest passing
/// radius over [0, r_max].
struct DomainProbeResult {
    double radius = 0.0;
    int n_flow_failures = 0;
    int n_collisions = 0;
};

inline DomainProbeResult domain_probe(const Spray& S, const Point& m, Rng& rng,
                                      double r_max = 4.0, int bisect_iters = 12,
                                      const IntegratorConfig& cfg = {}) {
    const AnchoredBundle& E = *S.bundle;
    const ChartedManifold& B = *E.base_manifold;
    int k = E.fibre_dim;
    std::vector<Vec> dirs;
    for (int i = 0; i < 6; ++i) dirs.push_back(rng.unit_vector(k));

    DomainProbeResult out;
    auto exp_at = [&](const Vec& w) -> std::optional<Point> {
        auto r = spray_exponential(S, E.point(m.chart, m.x, w), cfg);
        if (r.status != FlowStatus::Complete) return std::nullopt;
        return r.point;
    };

    auto radius_ok = [&](double r) -> bool {
        for (const Vec& d : dirs) {
            auto fwd = exp_at(r * d);
            auto bwd = exp_at(-r * d);
            if (!fwd || !bwd) {
                ++out.n_flow_failures;
                return false;
            }
            auto gap = [&](double b) {
                auto q = exp_at(-b * d);
                if (!q) return 1e6;
                return B.distance(*fwd, *q);
            };
            double m_gap = detail::scan_min(gap, 1e-3 * r, r);
            if (m_gap < 1e-6) {
                ++out.n_collisions;
                return false;
            }
        }
        return true;
    };

    if (radius_ok(r_max)) {
        out.radius = r_max;
        return out;
    }
    double lo = 0.0, hi = r_max;
    for (int i = 0; i < bisect_iters; ++i) {
        double mid = 0.5 * (lo + hi);
        if (radius_ok(mid))
            lo = mid;
        else
            hi = mid;
    }
    out.radius = lo;
    return out;
}

}  // namespace srlab
