#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srlab/chart.hpp"
#include "srlab/manifolds.hpp"
#include "srlab/smooth_map.hpp"

namespace srlab {

/// A vector bundle E over a charted base, trivialized over every base chart,
/// equipped with an anchor: a fibre-wise linear map E -> TM covering the
/// identity. Total-space charts are products (base coords, fibre coords);
/// fibre coordinates change between charts by the linear maps A_ij(x), whose
/// directional derivatives are supplied so that glued fields can push tangent
/// data between trivializations exactly.
class AnchoredBundle {
  public:
    std::string name;
    const ChartedManifold* base_manifold = nullptr;
    int fibre_dim = 0;
    double fibre_extent = 50.0;

    /// Anchor block in a base chart: rho(x, w) = anchor_block(chart, x) * w.
    std::function<Mat(int, const Vec&)> anchor_block;
    /// Fibre transition A_ij(x) at chart-i coordinates x.
    std::function<Mat(int, int, const Vec&)> fibre_transition;
    /// Directional derivative dA_ij(x; dx).
    std::function<Mat(int, int, const Vec&, const Vec&)> fibre_transition_deriv;

    ChartedManifold total;

    int base_dim() const { return base_manifold->dim(); }

    Point point(int chart, const Vec& x, const Vec& w) const { return {chart, concat(x, w)}; }

    Point project(const Point& e) const { return {e.chart, Vec(e.x.head(base_dim()))}; }

    Vec fibre(const Point& e) const { return e.x.tail(fibre_dim); }

    /// rho(e) as a tangent vector on the base, in e's chart.
    TangentVec anchor(const Point& e) const {
        Vec x = e.x.head(base_dim());
        return {Point{e.chart, x}, Vec(anchor_block(e.chart, x) * fibre(e))};
    }

    /// Fibre scaling h_lambda, an endomorphism of E covering the identity.
    Point scale(const Point& e, double lambda) const {
        return point(e.chart, e.x.head(base_dim()), lambda * fibre(e));
    }

    /// The bundle projection as a smooth map (exact block-projection reps).
    SmoothMap projection() const {
        SmoothMap p(&total, base_manifold);
        int d = base_dim();
        Mat P = Mat::Zero(d, d + fibre_dim);
        P.topLeftCorner(d, d) = Mat::Identity(d, d);
        for (int c = 0; c < base_manifold->n_charts(); ++c)
            p.add_rep(c, c, cm_affine(P, Vec::Zero(d)));
        return p;
    }

    /// Assemble the total-space manifold from the base atlas and the fibre
    /// transition data. Total transitions have exact first jets; second jets
    /// fall back to finite differences (nothing downstream consumes them).
    void finalize() {
        const ChartedManifold& B = *base_manifold;
        int d = B.dim(), k = fibre_dim;
        total = ChartedManifold(name);
        for (int c = 0; c < B.n_charts(); ++c) {
            Chart ch;
            ch.dim = d + k;
            ch.label = B.chart(c).label + "+fibre";
            auto base_margin = B.chart(c).margin;
            double ext = fibre_extent;
            ch.margin = [base_margin, d, k, ext](const Vec& z) {
                return std::min(base_margin(z.head(d)), ext - z.tail(k).norm());
            };
            auto base_sample = B.chart(c).sample;
            ch.sample = [base_sample, k](Rng& rng) {
                return concat(base_sample(rng), rng.in_ball(k, 1.2));
            };
            total.add_chart(ch);
        }
        for (int i = 0; i < B.n_charts(); ++i) {
            for (int j = 0; j < B.n_charts(); ++j) {
                if (i == j || !B.has_transition(i, j)) continue;
                SmoothCoordMap t = B.transition_map(i, j);
                auto A = fibre_transition;
                auto dA = fibre_transition_deriv;
                auto ev = [t, A, i, j, d, k](const Vec& z) -> Vec {
                    Vec x = z.head(d), w = z.tail(k);
                    return concat(t.eval(x), Vec(A(i, j, x) * w));
                };
                auto j1 = [t, A, dA, i, j, d, k](const Vec& z, const Vec& v) -> Vec {
                    Vec x = z.head(d), w = z.tail(k);
                    Vec dx = v.head(d), dw = v.tail(k);
                    return concat(t.jet1(x, dx), Vec(dA(i, j, x, dx) * w + A(i, j, x) * dw));
                };
                auto j2 = [ev](const Vec& z, const Vec& v, const Vec& w) -> Vec {
                    return fd::jet2(ev, z, v, w);
                };
                total.add_transition(i, j,
                                     SmoothCoordMap::closed_form(d + k, d + k, ev, j1, j2));
            }
        }
    }
};

/// Tangent bundle TM as an anchored bundle with identity anchor. Fibre
/// transitions are the base transition Jacobians; their derivatives come from
/// the exact second jets of the base transitions.
inline AnchoredBundle tangent_anchored_bundle(const ChartedManifold* M,
                                              double fibre_extent = 50.0) {
    AnchoredBundle E;
    E.name = "T(" + M->name() + ")";
    E.base_manifold = M;
    E.fibre_dim = M->dim();
    E.fibre_extent = fibre_extent;
    int d = M->dim();
    E.anchor_block = [d](int, const Vec&) { return Mat(Mat::Identity(d, d)); };
    E.fibre_transition = [M, d](int i, int j, const Vec& x) {
        const SmoothCoordMap& t = M->transition_map(i, j);
        Mat A(d, d);
        for (int c = 0; c < d; ++c) {
            Vec e = Vec::Zero(d);
            e[c] = 1.0;
            A.col(c) = t.jet1(x, e);
        }
        return A;
    };
    E.fibre_transition_deriv = [M, d](int i, int j, const Vec& x, const Vec& dx) {
        const SmoothCoordMap& t = M->transition_map(i, j);
        Mat A(d, d);
        for (int c = 0; c < d; ++c) {
            Vec e = Vec::Zero(d);
            e[c] = 1.0;
            A.col(c) = t.jet2(x, e, dx);
        }
        return A;
    };
    E.finalize();
    return E;
}

/// Fibre-wise direct sum of two anchored bundles over the same base, with
/// block-diagonal transitions and the summed anchor. Used to integrate
/// coupled fibre quantities through one chart-tracked flow.
inline AnchoredBundle direct_sum_bundle(const AnchoredBundle* A, const AnchoredBundle* B) {
    if (A->base_manifold != B->base_manifold)
        throw Error(ErrorCode::BadArgument, "direct sum needs a common base manifold");
    AnchoredBundle S;
    S.name = A->name + "(+)" + B->name;
    S.base_manifold = A->base_manifold;
    S.fibre_dim = A->fibre_dim + B->fibre_dim;
    S.fibre_extent = std::min(A->fibre_extent, B->fibre_extent);
    int ka = A->fibre_dim, kb = B->fibre_dim, d = A->base_dim();
    S.anchor_block = [A, B, ka, kb, d](int c, const Vec& x) {
        Mat R(d, ka + kb);
        R.leftCols(ka) = A->anchor_block(c, x);
        R.rightCols(kb) = B->anchor_block(c, x);
        return R;
    };
    S.fibre_transition = [A, B, ka, kb](int i, int j, const Vec& x) {
        Mat T = Mat::Zero(ka + kb, ka + kb);
        T.topLeftCorner(ka, ka) = A->fibre_transition(i, j, x);
        T.bottomRightCorner(kb, kb) = B->fibre_transition(i, j, x);
        return T;
    };
    S.fibre_transition_deriv = [A, B, ka, kb](int i, int j, const Vec& x, const Vec& dx) {
        Mat T = Mat::Zero(ka + kb, ka + kb);
        T.topLeftCorner(ka, ka) = A->fibre_transition_deriv(i, j, x, dx);
        T.bottomRightCorner(kb, kb) = B->fibre_transition_deriv(i, j, x, dx);
        return T;
    };
    S.finalize();
    return S;
}

/// Residuals of the anchored-bundle structure: fibre-linearity of the anchor,
/// base-point consistency of the anchor, and covariance of the anchor under
/// chart changes (rho computed in one trivialization, pushed to another,
/// agrees with rho computed there directly).
struct BundleCheckResult {
    double anchor_linearity = 0.0;
    double projection_match = 0.0;
    double anchor_covariance = 0.0;
    int n_samples = 0;
};

inline BundleCheckResult check_bundle(const AnchoredBundle& E, Rng& rng, int n) {
    BundleCheckResult r;
    const ChartedManifold& B = *E.base_manifold;
    for (int s = 0; s < n; ++s) {
        Point e = E.total.sample_point(rng);
        Vec x = e.x.head(E.base_dim());
        Vec w = E.fibre(e), w2 = rng.in_ball(E.fibre_dim, 1.0);
        double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);

        Mat R = E.anchor_block(e.chart, x);
        Vec lin = R * (a * w + b * w2) - a * (R * w) - b * (R * w2);
        r.anchor_linearity = std::max(r.anchor_linearity, lin.norm());

        TangentVec rho = E.anchor(e);
        r.projection_match =
            std::max(r.projection_match, (rho.base.x - E.project(e).x).norm());

        for (int j = 0; j < B.n_charts(); ++j) {
            if (j == e.chart) continue;
            auto q = B.try_transition(Point{e.chart, x}, j);
            if (!q) continue;
            Vec wj = E.fibre_transition(e.chart, j, x) * w;
            Vec rho_j = E.anchor_block(j, q->x) * wj;
            Vec pushed = B.transition_map(e.chart, j).jet1(x, R * w);
            r.anchor_covariance = std::max(r.anchor_covariance, (rho_j - pushed).norm());
        }
        ++r.n_samples;
    }
    return r;
}

}  // namespace srlab
