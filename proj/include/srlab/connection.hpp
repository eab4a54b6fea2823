#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "srlab/bundle.hpp"
#include "srlab/curve.hpp"
#include "srlab/ode.hpp"
#include "srlab/spray.hpp"

namespace srlab {

/// A linear connection on an anchored bundle, stored through its Christoffel
/// action: parallel sections along a base curve satisfy
///     dw/dt + gamma(chart, x, xdot, w) = 0,
/// with gamma linear in both xdot and w.
struct LinearConnection {
    const AnchoredBundle* bundle = nullptr;
    std::string name;
    std::function<Vec(int, const Vec&, const Vec&, const Vec&)> gamma;
};

/// The connection whose geodesics are the spray's base curves, recovered by
/// polarizing the quadratic acceleration: the spray satisfies
/// xdotdot = accel(x, w), so gamma(v, w) = -(accel(v+w) - accel(v-w)) / 4.
/// Exact for any fibre-quadratic spray, including glued ones.
inline LinearConnection connection_from_spray(const Spray& S) {
    LinearConnection c;
    c.bundle = S.bundle;
    c.name = S.name + ":connection";
    auto accel = S.accel;
    c.gamma = [accel](int chart, const Vec& x, const Vec& v, const Vec& w) -> Vec {
        return -0.25 * (accel(chart, x, v + w) - accel(chart, x, v - w));
    };
    return c;
}

namespace detail {

/// Adaptive 5(4) integration of a chart-local ODE driven by a base curve:
///     y' = rhs(chart, t, x_chart(t), y),
/// where the base position is re-expressed into the working chart at every
/// stage and `reexpress` migrates the state when the tracked point's margin
/// falls below the switch threshold. Supports either time direction.
struct TrackedResult {
    int chart = 0;
    Vec y;
    FlowStatus status = FlowStatus::Complete;
    double t_exit = 0.0;
};

inline TrackedResult integrate_tracked(
    const ChartedManifold& B, const std::function<Point(double)>& base_at,
    const std::function<Vec(int, double, const Vec&, const Vec&)>& rhs,
    const std::function<Vec(int, int, const Vec&, const Vec&)>& reexpress, double t0, double t1,
    int chart0, const Vec& y0, const IntegratorConfig& cfg = {}) {
    TrackedResult res{chart0, y0, FlowStatus::Complete, t0};
    if (t1 == t0) return res;
    double dir = (t1 > t0) ? 1.0 : -1.0;
    double T = std::abs(t1 - t0);
    double tau = 0.0;
    double h = std::min(0.01 * std::max(1.0, T), T);
    const double h_floor = 1e-14 * std::max(1.0, T);
    std::vector<Vec> k(Dopri5::stages);
    int steps = 0;

    auto x_in_chart = [&](double tq, int chart) -> std::optional<Vec> {
        auto q = B.try_transition(base_at(t0 + dir * tq), chart);
        if (!q) return std::nullopt;
        return q->x;
    };

    while (tau < T) {
        if (++steps > cfg.max_steps) {
            res.status = FlowStatus::MaxSteps;
            return res;
        }
        h = std::min(h, T - tau);
        double hs = dir * h;

        bool stages_ok = true;
        for (int s = 0; s < Dopri5::stages && stages_ok; ++s) {
            Vec ys = res.y;
            for (int j = 0; j < s; ++j)
                if (Dopri5::a[s][j] != 0.0) ys += hs * Dopri5::a[s][j] * k[static_cast<size_t>(j)];
            auto xs = x_in_chart(tau + Dopri5::c[s] * h, res.chart);
            if (!xs || !finite(ys)) {
                stages_ok = false;
                break;
            }
            Vec f = rhs(res.chart, t0 + dir * (tau + Dopri5::c[s] * h), *xs, ys);
            if (!finite(f)) {
                stages_ok = false;
                break;
            }
            k[static_cast<size_t>(s)] = f;
        }
        if (!stages_ok) {
            h *= 0.5;
            if (h < h_floor) {
                res.status = FlowStatus::LeftDomain;
                return res;
            }
            continue;
        }

        Vec y5 = res.y, y4 = res.y;
        for (int s = 0; s < Dopri5::stages; ++s) {
            y5 += hs * Dopri5::b5[s] * k[static_cast<size_t>(s)];
            y4 += hs * Dopri5::b4[s] * k[static_cast<size_t>(s)];
        }
        double err = 0.0;
        for (int i = 0; i < res.y.size(); ++i) {
            double sc = cfg.atol + cfg.rtol * std::max(std::abs(res.y[i]), std::abs(y5[i]));
            double e = (y5[i] - y4[i]) / sc;
            err += e * e;
        }
        err = std::sqrt(err / static_cast<double>(res.y.size()));

        if (err <= 1.0 || h <= h_floor * 2.0) {
            tau += h;
            res.y = y5;
            res.t_exit = t0 + dir * tau;
            // Chart maintenance at the accepted position.
            Point p = base_at(res.t_exit);
            auto q = B.try_transition(p, res.chart);
            if (!q) {
                res.status = FlowStatus::LeftDomain;
                return res;
            }
            if (B.chart(res.chart).margin(q->x) < cfg.chart_switch_margin) {
                Point b = B.best_chart(Point{res.chart, q->x});
                if (b.chart != res.chart) {
                    res.y = reexpress(res.chart, b.chart, q->x, res.y);
                    res.chart = b.chart;
                }
            }
        }
        double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
        if (h < h_floor) h = h_floor;
    }
    return res;
}

}  // namespace detail

/// Result of transporting a single fibre vector along a base curve.
struct TransportResult {
    Point base_end;  // where the transport finished, in the tracking chart
    Vec w;           // transported fibre coordinates in base_end's chart
    FlowStatus status = FlowStatus::Complete;
};

/// Parallel transport of w0 (given in chart w_chart over the point c.at(t0))
/// along the curve from t0 to t1.
inline TransportResult parallel_transport_vector(const LinearConnection& conn,
                                                 const CurveOnManifold& c, double t0, double t1,
                                                 const Vec& w0, int w_chart,
                                                 const IntegratorConfig& cfg = {}) {
    const AnchoredBundle& E = *conn.bundle;
    const ChartedManifold& B = *E.base_manifold;
    Point start = B.best_chart(c.at(t0));
    Vec w = w0;
    if (w_chart != start.chart) {
        Point in_w = B.transition(start, w_chart);
        w = E.fibre_transition(w_chart, start.chart, in_w.x) * w;
    }
    auto gamma = conn.gamma;
    auto vel = c.velocity;
    auto rhs = [gamma, vel, &B](int chart, double t, const Vec& x, const Vec& y) -> Vec {
        TangentVec v = vel(t);
        Vec xdot = B.conjugate_tangent(v, chart).v;
        return -gamma(chart, x, xdot, y);
    };
    auto reexpress = [&E](int i, int j, const Vec& x, const Vec& y) -> Vec {
        return E.fibre_transition(i, j, x) * y;
    };
    detail::TrackedResult r =
        detail::integrate_tracked(B, c.at, rhs, reexpress, t0, t1, start.chart, w, cfg);
    TransportResult out;
    out.status = r.status;
    out.w = r.y;
    out.base_end = (r.status == FlowStatus::Complete)
                       ? B.transition(c.at(t1), r.chart)
                       : Point{r.chart, Vec()};
    return out;
}

/// The full transport operator between two parameter values, built by
/// integrating the matrix-valued transport equation once (columns share the
/// step sequence and chart track).
struct TransportOperator {
    const AnchoredBundle* bundle = nullptr;
    Point from;  // base point and chart of the domain fibre
    Point to;    // base point and chart of the codomain fibre
    Mat P;

    Vec apply(const Vec& w) const { return P * w; }
};

inline TransportOperator parallel_transport(const LinearConnection& conn,
                                            const CurveOnManifold& c, double t0, double t1,
                                            const IntegratorConfig& cfg = {}) {
    const AnchoredBundle& E = *conn.bundle;
    const ChartedManifold& B = *E.base_manifold;
    int k = E.fibre_dim;
    Point start = B.best_chart(c.at(t0));
    Vec y0(k * k);
    for (int j = 0; j < k; ++j) y0.segment(j * k, k) = Vec::Unit(k, j);

    auto gamma = conn.gamma;
    auto vel = c.velocity;
    auto rhs = [gamma, vel, &B, k](int chart, double t, const Vec& x, const Vec& y) -> Vec {
        TangentVec v = vel(t);
        Vec xdot = B.conjugate_tangent(v, chart).v;
        Vec out(k * k);
        for (int j = 0; j < k; ++j)
            out.segment(j * k, k) = -gamma(chart, x, xdot, Vec(y.segment(j * k, k)));
        return out;
    };
    auto reexpress = [&E, k](int i, int j, const Vec& x, const Vec& y) -> Vec {
        Mat A = E.fibre_transition(i, j, x);
        Vec out(k * k);
        for (int c2 = 0; c2 < k; ++c2) out.segment(c2 * k, k) = A * y.segment(c2 * k, k);
        return out;
    };
    detail::TrackedResult r =
        detail::integrate_tracked(B, c.at, rhs, reexpress, t0, t1, start.chart, y0, cfg);
    if (r.status != FlowStatus::Complete)
        throw Error(ErrorCode::InsufficientData, conn.name + ": transport did not complete");

    TransportOperator op;
    op.bundle = &E;
    op.from = start;
    op.to = B.transition(c.at(t1), r.chart);
    op.P = Mat(k, k);
    for (int j = 0; j < k; ++j) op.P.col(j) = r.y.segment(j * k, k);
    return op;
}

/// second o first, re-expressing through the bundle's fibre transition when
/// the meeting charts differ. The meeting base points must agree.
inline TransportOperator compose(const TransportOperator& second, const TransportOperator& first) {
    const AnchoredBundle& E = *first.bundle;
    const ChartedManifold& B = *E.base_manifold;
    Mat bridge = Mat::Identity(E.fibre_dim, E.fibre_dim);
    Point meet = first.to;
    if (second.from.chart != first.to.chart) {
        meet = B.transition(first.to, second.from.chart);
        bridge = E.fibre_transition(first.to.chart, second.from.chart, first.to.x);
    }
    if ((meet.x - second.from.x).norm() > 1e-7)
        throw Error(ErrorCode::BadArgument, "transport composition: base points do not meet");
    TransportOperator op;
    op.bundle = &E;
    op.from = first.from;
    op.to = second.to;
    op.P = second.P * bridge * first.P;
    return op;
}

/// Forward-then-backward transport against the identity.
inline double transport_roundtrip_defect(const LinearConnection& conn, const CurveOnManifold& c,
                                         double t0, double t1,
                                         const IntegratorConfig& cfg = {}) {
    TransportOperator fwd = parallel_transport(conn, c, t0, t1, cfg);
    TransportOperator bwd = parallel_transport(conn, c, t1, t0, cfg);
    TransportOperator round = compose(bwd, fwd);
    Mat bridge = Mat::Identity(conn.bundle->fibre_dim, conn.bundle->fibre_dim);
    if (round.to.chart != round.from.chart)
        bridge = conn.bundle->fibre_transition(round.to.chart, round.from.chart, round.to.x);
    return (bridge * round.P - Mat::Identity(conn.bundle->fibre_dim, conn.bundle->fibre_dim))
        .norm();
}

/// Transport of a random combination against the combination of transports.
inline double transport_linearity_defect(const LinearConnection& conn, const CurveOnManifold& c,
                                         double t0, double t1, Rng& rng, int n,
                                         const IntegratorConfig& cfg = {}) {
    const AnchoredBundle& E = *conn.bundle;
    int k = E.fibre_dim;
    Point start = E.base_manifold->best_chart(c.at(t0));
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec w1 = rng.in_ball(k, 1.5), w2 = rng.in_ball(k, 1.5);
        double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        auto r1 = parallel_transport_vector(conn, c, t0, t1, w1, start.chart, cfg);
        auto r2 = parallel_transport_vector(conn, c, t0, t1, w2, start.chart, cfg);
        auto rc = parallel_transport_vector(conn, c, t0, t1, Vec(a * w1 + b * w2), start.chart, cfg);
        if (r1.status != FlowStatus::Complete || r2.status != FlowStatus::Complete ||
            rc.status != FlowStatus::Complete)
            continue;
        Vec w2_in_r1 = r2.w, wc_in_r1 = rc.w;
        if (r2.base_end.chart != r1.base_end.chart)
            w2_in_r1 = E.fibre_transition(r2.base_end.chart, r1.base_end.chart, r2.base_end.x) * r2.w;
        if (rc.base_end.chart != r1.base_end.chart)
            wc_in_r1 = E.fibre_transition(rc.base_end.chart, r1.base_end.chart, rc.base_end.x) * rc.w;
        worst = std::max(worst, (wc_in_r1 - a * r1.w - b * w2_in_r1).norm());
    }
    return worst;
}

/// One row of a sampled transport history: parameter value, base point in the
/// tracking chart, and the transported fibre coordinates in that chart.
struct TransportSample {
    double t = 0.0;
    Point base;
    Vec w;
};

/// Transport of w0 (in w_chart over c.at(t0)) recorded at n_samples uniform
/// parameter values; consecutive legs chain through the tracking chart, so the
/// final row agrees with a single end-to-end transport.
inline std::vector<TransportSample> transport_trace(const LinearConnection& conn,
                                                    const CurveOnManifold& c, double t0, double t1,
                                                    const Vec& w0, int w_chart, int n_samples,
                                                    const IntegratorConfig& cfg = {}) {
    if (n_samples < 2)
        throw Error(ErrorCode::BadArgument, "transport_trace needs at least two samples");
    const AnchoredBundle& E = *conn.bundle;
    const ChartedManifold& B = *E.base_manifold;
    Point start = B.best_chart(c.at(t0));
    Vec w = w0;
    if (w_chart != start.chart) {
        Point in_w = B.transition(start, w_chart);
        w = E.fibre_transition(w_chart, start.chart, in_w.x) * w;
    }
    std::vector<TransportSample> rows;
    rows.reserve(static_cast<size_t>(n_samples));
    rows.push_back({t0, start, w});
    for (int k = 1; k < n_samples; ++k) {
        double t = t0 + (t1 - t0) * k / (n_samples - 1);
        const TransportSample& prev = rows.back();
        TransportResult leg =
            parallel_transport_vector(conn, c, prev.t, t, prev.w, prev.base.chart, cfg);
        if (leg.status != FlowStatus::Complete)
            throw Error(ErrorCode::InsufficientData,
                        conn.name + ": transport trace left the atlas");
        rows.push_back({t, leg.base_end, leg.w});
    }
    return rows;
}

/// CSV export of a transport history: t, chart, base coordinates, fibre
/// components.
inline void write_transport_trace_csv(const std::vector<TransportSample>& rows, std::ostream& os) {
    auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    int bd = rows.empty() ? 0 : static_cast<int>(rows.front().base.x.size());
    int fd = rows.empty() ? 0 : static_cast<int>(rows.front().w.size());
    os << "t,chart";
    for (int i = 0; i < bd; ++i) os << ",x" << i;
    for (int i = 0; i < fd; ++i) os << ",w" << i;
    os << "\n";
    for (const TransportSample& r : rows) {
        os << r.t << "," << r.base.chart;
        for (int i = 0; i < r.base.x.size(); ++i) os << "," << r.base.x[i];
        for (int i = 0; i < r.w.size(); ++i) os << "," << r.w[i];
        os << "\n";
    }
    os.precision(old_precision);
}

/// Joint integration: flow the spray upstairs while parallel-transporting a
/// fibre of `conn`'s bundle along the projected base path. Both fibres ride
/// one chart-tracked flow on the direct-sum bundle, so the transported vector
/// never sees an interpolated base curve.
struct JointTransportResult {
    Point end_e;  // end state in the spray's total space
    Vec w;        // transported fibre, in end_e's chart
    FlowStatus status = FlowStatus::Complete;
};

inline JointTransportResult transport_along_spray(const LinearConnection& conn, const Spray& S,
                                                  const Point& e0, const Vec& w0, double T,
                                                  const IntegratorConfig& cfg = {}) {
    const AnchoredBundle* E = S.bundle;
    const AnchoredBundle* F = conn.bundle;
    if (E->base_manifold != F->base_manifold)
        throw Error(ErrorCode::BadArgument, "joint transport needs a common base manifold");
    AnchoredBundle sum = direct_sum_bundle(E, F);
    int d = E->base_dim(), ke = E->fibre_dim, kf = F->fibre_dim;

    VectorFieldOnManifold joint;
    joint.manifold = &sum.total;
    auto gamma = conn.gamma;
    auto accel = S.accel;
    joint.eval = [E, gamma, accel, d, ke, kf](const Point& p) {
        Vec x = p.x.head(d), we = p.x.segment(d, ke), wf = p.x.tail(kf);
        Vec xdot = E->anchor_block(p.chart, x) * we;
        return TangentVec{p, concat(xdot, accel(p.chart, x, we), Vec(-gamma(p.chart, x, xdot, wf)))};
    };

    FlowResult r = flow(joint, Point{e0.chart, concat(e0.x, w0)}, T, cfg);
    JointTransportResult out;
    out.status = r.status;
    out.end_e = Point{r.end.chart, Vec(r.end.x.head(d + ke))};
    out.w = r.end.x.tail(kf);
    return out;
}

}  // namespace srlab
