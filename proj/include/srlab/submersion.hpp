#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srlab/bundle.hpp"
#include "srlab/connection.hpp"
#include "srlab/partition.hpp"
#include "srlab/spray.hpp"

namespace srlab {

/// A surjective submersion p: P -> N presented in adapted charts: chart c of
/// P carries coordinates (x, theta) where x are coordinates of chart
/// base_chart[c] of N and p is the coordinate projection onto x. Transitions
/// of P respect the split: the x-part of any transition depends on x alone.
struct SubmersionGeometry {
    const ChartedManifold* P = nullptr;
    const ChartedManifold* N = nullptr;
    std::vector<int> base_chart;  // total chart -> base chart
    int n_dim = 0;                // dim N

    int v_dim() const { return P->dim() - n_dim; }

    /// Coordinate projection matrix (x, theta) -> x.
    Mat top_block() const {
        Mat T = Mat::Zero(n_dim, P->dim());
        T.topLeftCorner(n_dim, n_dim) = Mat::Identity(n_dim, n_dim);
        return T;
    }

    /// The submersion as a smooth map (exact block reps in adapted charts).
    SmoothMap projection() const {
        SmoothMap p(P, N);
        for (int c = 0; c < P->n_charts(); ++c)
            p.add_rep(c, base_chart[static_cast<size_t>(c)], cm_affine(top_block(), Vec::Zero(n_dim)));
        return p;
    }

    /// Columns spanning ker T_z p; constant in adapted charts.
    Mat vertical_basis(int, const Vec&) const {
        Mat V = Mat::Zero(P->dim(), v_dim());
        V.bottomRows(v_dim()) = Mat::Identity(v_dim(), v_dim());
        return V;
    }

    /// Jacobian of the base transition between base charts of two total
    /// charts, evaluated at the base part of z (identity when both total
    /// charts sit over the same base chart).
    Mat base_jacobian(int ci, int cj, const Vec& x) const {
        int bi = base_chart[static_cast<size_t>(ci)], bj = base_chart[static_cast<size_t>(cj)];
        if (bi == bj) return Mat::Identity(n_dim, n_dim);
        const SmoothCoordMap& t = N->transition_map(bi, bj);
        Mat J(n_dim, n_dim);
        for (int k = 0; k < n_dim; ++k) J.col(k) = t.jet1(x, Vec(Vec::Unit(n_dim, k)));
        return J;
    }
};

/// Residuals of the adapted-chart axioms: the x-part of every total
/// transition equals the base transition of the base parts, and vertical
/// vectors stay vertical across transitions.
struct SubmersionCheckResult {
    double base_consistency = 0.0;
    double vertical_invariance = 0.0;
    int n_samples = 0;
};

inline SubmersionCheckResult check_submersion(const SubmersionGeometry& g, Rng& rng, int n) {
    SubmersionCheckResult r;
    int nd = g.n_dim, vd = g.v_dim();
    for (int s = 0; s < n; ++s) {
        Point z = g.P->sample_point(rng);
        for (int j = 0; j < g.P->n_charts(); ++j) {
            if (j == z.chart) continue;
            auto zj = g.P->try_transition(z, j);
            if (!zj) continue;
            int bi = g.base_chart[static_cast<size_t>(z.chart)];
            int bj = g.base_chart[static_cast<size_t>(j)];
            Vec x = z.x.head(nd);
            Vec xj = (bi == bj) ? x : g.N->transition(Point{bi, x}, bj).x;
            r.base_consistency = std::max(r.base_consistency, (zj->x.head(nd) - xj).norm());

            const SmoothCoordMap& t = g.P->transition_map(z.chart, j);
            for (int k = 0; k < vd; ++k) {
                Vec push = t.jet1(z.x, Vec(Vec::Unit(nd + vd, nd + k)));
                r.vertical_invariance = std::max(r.vertical_invariance, push.head(nd).norm());
            }
        }
        ++r.n_samples;
    }
    return r;
}

/// A horizontal-lift operator: at every point of every chart, a d_P x n right
/// inverse of T p. Either glued from chart-wise coordinate lifts with a
/// partition of unity on the total space (the canonical construction: in
/// every chart the top block is the identity and the bottom block mixes in
/// the theta-sensitivity of foreign chart lifts), or supplied directly as a
/// custom block function (for closed-form scenarios).
class EhresmannConnection {
  public:
    EhresmannConnection(const SubmersionGeometry* geom, ChartPartitionOfUnity pu)
        : geom_(geom), pu_(std::move(pu)) {}

    EhresmannConnection(const SubmersionGeometry* geom,
                        std::function<Mat(int, const Vec&)> sigma)
        : geom_(geom), custom_(std::move(sigma)) {}

    const SubmersionGeometry& geometry() const { return *geom_; }

    /// d_P x n right inverse of the coordinate projection at z in chart c.
    Mat sigma_block(int c, const Vec& z) const {
        if (custom_) return custom_(c, z);
        const SubmersionGeometry& g = *geom_;
        int d = g.P->dim(), nd = g.n_dim;
        Mat sigma = Mat::Zero(d, nd);
        sigma.topRows(nd) = Mat::Identity(nd, nd);
        for (auto& [alpha, h] : pu_->weights(Point{c, z})) {
            if (alpha == c) continue;  // the home lift has zero bottom block
            Point za = g.P->transition(Point{c, z}, alpha);
            Mat fwd = g.base_jacobian(c, alpha, Vec(z.head(nd)));
            const SmoothCoordMap& back = g.P->transition_map(alpha, c);
            for (int k = 0; k < nd; ++k) {
                Vec lift = Vec::Zero(d);
                lift.head(nd) = fwd.col(k);
                sigma.col(k).tail(d - nd) += h * back.jet1(za.x, lift).tail(d - nd);
            }
        }
        return sigma;
    }

    Mat horizontal_projector(int c, const Vec& z) const {
        return sigma_block(c, z) * geom_->top_block();
    }

    Mat vertical_projector(int c, const Vec& z) const {
        int d = geom_->P->dim();
        return Mat::Identity(d, d) - horizontal_projector(c, z);
    }

  private:
    const SubmersionGeometry* geom_;
    std::optional<ChartPartitionOfUnity> pu_;
    std::function<Mat(int, const Vec&)> custom_;
};

/// Residuals of the Ehresmann axioms: Tp o sigma = id, covariance of sigma
/// under chart changes, idempotence and complementarity of the projectors,
/// and verticality of the vertical projector's image.
struct EhresmannCheckResult {
    double right_inverse = 0.0;
    double covariance = 0.0;
    double idempotent = 0.0;
    double vertical_image = 0.0;
    int n_samples = 0;
};

inline EhresmannCheckResult check_ehresmann(const EhresmannConnection& ehr, Rng& rng, int n) {
    EhresmannCheckResult r;
    const SubmersionGeometry& g = ehr.geometry();
    int d = g.P->dim(), nd = g.n_dim;
    Mat T = g.top_block();
    for (int s = 0; s < n; ++s) {
        Point z = g.P->sample_point(rng);
        Mat sig = ehr.sigma_block(z.chart, z.x);
        r.right_inverse = std::max(r.right_inverse, (T * sig - Mat::Identity(nd, nd)).norm());

        Mat H = ehr.horizontal_projector(z.chart, z.x);
        Mat V = ehr.vertical_projector(z.chart, z.x);
        r.idempotent = std::max({r.idempotent, (H * H - H).norm(), (V * V - V).norm(),
                                 (H * V).norm()});
        r.vertical_image = std::max(r.vertical_image, (T * V).norm());

        for (int j = 0; j < g.P->n_charts(); ++j) {
            if (j == z.chart) continue;
            auto zj = g.P->try_transition(z, j);
            if (!zj) continue;
            Mat sig_j = ehr.sigma_block(j, zj->x);
            Mat fwd = g.base_jacobian(z.chart, j, Vec(z.x.head(nd)));
            const SmoothCoordMap& t = g.P->transition_map(z.chart, j);
            for (int k = 0; k < nd; ++k) {
                Vec lhs = sig_j * fwd.col(k);
                Vec rhs = t.jet1(z.x, Vec(sig.col(k)));
                r.covariance = std::max(r.covariance, (lhs - rhs).norm());
            }
        }
        ++r.n_samples;
    }
    return r;
}

/// Pullback of TN to P, anchored into TP by the horizontal lift: fibre
/// coordinates are base tangent coordinates in the chart under c, the anchor
/// is sigma, and transitions are base Jacobians.
inline AnchoredBundle horizontal_bundle(const SubmersionGeometry* geom,
                                        const EhresmannConnection& ehr) {
    AnchoredBundle E;
    E.name = geom->P->name() + ":horizontal";
    E.base_manifold = geom->P;
    E.fibre_dim = geom->n_dim;
    EhresmannConnection ec = ehr;
    E.anchor_block = [ec](int c, const Vec& z) { return ec.sigma_block(c, z); };
    int nd = geom->n_dim;
    E.fibre_transition = [geom, nd](int i, int j, const Vec& z) {
        return geom->base_jacobian(i, j, Vec(z.head(nd)));
    };
    E.fibre_transition_deriv = [geom, nd](int i, int j, const Vec& z, const Vec& dz) {
        int bi = geom->base_chart[static_cast<size_t>(i)];
        int bj = geom->base_chart[static_cast<size_t>(j)];
        if (bi == bj) return Mat(Mat::Zero(nd, nd));
        const SmoothCoordMap& t = geom->N->transition_map(bi, bj);
        Mat dJ(nd, nd);
        for (int k = 0; k < nd; ++k)
            dJ.col(k) = t.jet2(Vec(z.head(nd)), Vec(Vec::Unit(nd, k)), Vec(dz.head(nd)));
        return dJ;
    };
    E.finalize();
    return E;
}

/// The vertical subbundle ker Tp, anchored into TP by coordinate inclusion.
/// Transitions are the theta-blocks of the total transitions (exact jets).
inline AnchoredBundle vertical_bundle(const SubmersionGeometry* geom) {
    AnchoredBundle E;
    E.name = geom->P->name() + ":vertical";
    E.base_manifold = geom->P;
    E.fibre_dim = geom->v_dim();
    int nd = geom->n_dim, vd = geom->v_dim(), d = nd + vd;
    E.anchor_block = [geom](int c, const Vec& z) { return geom->vertical_basis(c, z); };
    E.fibre_transition = [geom, nd, vd, d](int i, int j, const Vec& z) {
        const SmoothCoordMap& t = geom->P->transition_map(i, j);
        Mat A(vd, vd);
        for (int k = 0; k < vd; ++k) A.col(k) = t.jet1(z, Vec(Vec::Unit(d, nd + k))).tail(vd);
        return A;
    };
    E.fibre_transition_deriv = [geom, nd, vd, d](int i, int j, const Vec& z, const Vec& dz) {
        const SmoothCoordMap& t = geom->P->transition_map(i, j);
        Mat A(vd, vd);
        for (int k = 0; k < vd; ++k) A.col(k) = t.jet2(z, Vec(Vec::Unit(d, nd + k)), dz).tail(vd);
        return A;
    };
    E.finalize();
    return E;
}

/// Lift of a base spray through the horizontal bundle: the acceleration of
/// the fibre coordinates is the base spray's acceleration at the projected
/// point, so base paths of horizontal trajectories are base-spray geodesics.
inline Spray lifted_spray(const AnchoredBundle* EH, const SubmersionGeometry* geom,
                          const Spray& SN) {
    Spray s;
    s.bundle = EH;
    s.name = SN.name + ":lifted";
    auto accel = SN.accel;
    std::vector<int> bc = geom->base_chart;
    int nd = geom->n_dim;
    s.accel = [accel, bc, nd](int c, const Vec& z, const Vec& eta) -> Vec {
        return accel(bc[static_cast<size_t>(c)], Vec(z.head(nd)), eta);
    };
    return s;
}

/// Spray on the vertical bundle; accel defaults to zero (fibrewise straight
/// lines), which is chart-consistent whenever the vertical transitions are
/// affine in theta.
inline Spray vertical_spray(const AnchoredBundle* EV,
                            std::function<Vec(int, const Vec&, const Vec&)> accel = nullptr) {
    Spray s;
    s.bundle = EV;
    s.name = EV->name + ":spray";
    int vd = EV->fibre_dim;
    if (accel) {
        s.accel = std::move(accel);
    } else {
        s.accel = [vd](int, const Vec&, const Vec&) { return Vec(Vec::Zero(vd)); };
    }
    return s;
}

/// A local addition on a charted manifold: a map TM -> M defined near the
/// zero section with Sigma(0_z) = z and T Sigma|_0 = id.
struct AdditionResult {
    Point point;
    FlowStatus status = FlowStatus::Complete;
};

struct LocalAddition {
    const ChartedManifold* M = nullptr;
    std::string name;
    std::function<AdditionResult(const TangentVec&)> apply;
};

/// Local addition from a spray on the tangent bundle: v -> exp_S(v).
inline LocalAddition addition_from_spray(const Spray& S, const IntegratorConfig& cfg = {}) {
    LocalAddition a;
    a.M = S.bundle->base_manifold;
    a.name = S.name + ":exp";
    Spray copy = S;
    a.apply = [copy, cfg](const TangentVec& v) {
        auto r = spray_exponential(copy, copy.bundle->point(v.base.chart, v.base.x, v.v), cfg);
        return AdditionResult{r.point, r.status};
    };
    return a;
}

/// The submersion-adapted composite addition on P: split v into the
/// horizontal-lift coordinates eta = Tp(v) and the vertical remainder xi;
/// flow the lifted spray from (z, eta) while parallel-transporting xi in the
/// vertical bundle along the same path; finish with the vertical exponential
/// of the transported xi.
struct CompositeAddition {
    const SubmersionGeometry* geom = nullptr;
    EhresmannConnection ehr;
    const AnchoredBundle* EH = nullptr;
    const AnchoredBundle* EV = nullptr;
    Spray SH;
    Spray SV;
    LinearConnection connV;
    IntegratorConfig cfg;

    AdditionResult apply(const TangentVec& v) const {
        const SubmersionGeometry& g = *geom;
        int nd = g.n_dim;
        Vec eta = v.v.head(nd);
        Mat sig = ehr.sigma_block(v.base.chart, v.base.x);
        Vec xi = v.v.tail(g.v_dim()) - (sig * eta).tail(g.v_dim());

        JointTransportResult joint =
            transport_along_spray(connV, SH, EH->point(v.base.chart, v.base.x, eta), xi, 1.0, cfg);
        if (joint.status != FlowStatus::Complete) return {Point{}, joint.status};

        Point z1 = EH->project(joint.end_e);
        auto fin = spray_exponential(SV, EV->point(z1.chart, z1.x, joint.w), cfg);
        return {fin.point, fin.status};
    }

    LocalAddition as_addition() const {
        LocalAddition a;
        a.M = geom->P;
        a.name = geom->P->name() + ":composite-addition";
        CompositeAddition copy = *this;
        a.apply = [copy](const TangentVec& v) { return copy.apply(v); };
        return a;
    }
};

/// Headline diagram: p(Sigma_P(v)) = Sigma_N(Tp(v)) over sampled tangent
/// vectors, measured in the base manifold's distance.
struct DiagramCheckResult {
    double max_residual = 0.0;
    int n_complete = 0;
    int n_samples = 0;
};

inline DiagramCheckResult diagram_commutativity_check(
    const SubmersionGeometry& g, const LocalAddition& sigmaP, const LocalAddition& sigmaN,
    Rng& rng, int n, double fibre_radius = 1.0,
    std::vector<std::pair<double, double>>* residual_vs_norm = nullptr) {
    DiagramCheckResult r;
    SmoothMap proj = g.projection();
    for (int i = 0; i < n; ++i) {
        Point z = g.P->sample_point(rng);
        TangentVec v{z, rng.in_ball(g.P->dim(), fibre_radius)};
        ++r.n_samples;

        AdditionResult up = sigmaP.apply(v);
        TangentVec tpv = proj.differential(v, g.base_chart[static_cast<size_t>(z.chart)]);
        AdditionResult down = sigmaN.apply(tpv);
        if (up.status != FlowStatus::Complete || down.status != FlowStatus::Complete) continue;
        ++r.n_complete;
        double dist = g.N->distance(proj.eval(up.point), down.point);
        if (residual_vs_norm) residual_vs_norm->emplace_back(v.v.norm(), dist);
        r.max_residual = std::max(r.max_residual, dist);
    }
    return r;
}

/// Sigma(0_z) = z and T_0 Sigma = id, probed with central differences.
struct AdditionDerivativeResult {
    double zero_residual = 0.0;
    double identity_residual = 0.0;
    int n_samples = 0;
};

inline AdditionDerivativeResult addition_derivative_check(const LocalAddition& sigma, Rng& rng,
                                                          int n, double h_scale = 1e-5) {
    AdditionDerivativeResult r;
    const ChartedManifold& M = *sigma.M;
    int d = M.dim();
    for (int i = 0; i < n; ++i) {
        Point z = M.sample_point(rng);
        AdditionResult at0 = sigma.apply(TangentVec{z, Vec(Vec::Zero(d))});
        if (at0.status != FlowStatus::Complete) continue;
        r.zero_residual =
            std::max(r.zero_residual, (M.transition(at0.point, z.chart).x - z.x).norm());

        Vec w = rng.unit_vector(d);
        double h = h_scale * (1.0 + z.x.norm());
        AdditionResult plus = sigma.apply(TangentVec{z, Vec(h * w)});
        AdditionResult minus = sigma.apply(TangentVec{z, Vec(-h * w)});
        if (plus.status != FlowStatus::Complete || minus.status != FlowStatus::Complete) continue;
        Vec fd = (M.transition(plus.point, z.chart).x - M.transition(minus.point, z.chart).x) /
                 (2.0 * h);
        r.identity_residual = std::max(r.identity_residual, (fd - w).norm());
        ++r.n_samples;
    }
    return r;
}

/// Injectivity evidence for u -> Sigma(z, u) on the fibre ball of the given
/// radius, probed along the canonical axes plus random directions.
///
///  - min_singular: smallest singular value of finite-difference Jacobians at
///    the ball boundary; near-zero values witness degenerate derivative
///    (conjugate-point style failure).
///  - min_pair_gap: opposite-ray sweep as in the spray domain probe; for each
///    direction d the output distance between Sigma(radius d) and
///    Sigma(-b d) is minimized over b. A vanishing minimum witnesses two
///    separated inputs with the same output (e.g. wrapping a closed fibre).
///
/// Incomplete flows count as failures: they zero the corresponding field.
struct AdditionInjectivityResult {
    double min_singular = std::numeric_limits<double>::infinity();
    double min_pair_gap = std::numeric_limits<double>::infinity();
    int n_flow_failures = 0;
};

inline AdditionInjectivityResult addition_injectivity_probe(const LocalAddition& sigma,
                                                            const Point& z, double radius,
                                                            Rng& rng, int n_dirs = 4,
                                                            double h_scale = 1e-5) {
    AdditionInjectivityResult out;
    const ChartedManifold& M = *sigma.M;
    int d = M.dim();
    double h = h_scale * (1.0 + radius);

    auto apply_at = [&](const Vec& u) -> std::optional<Point> {
        AdditionResult r = sigma.apply(TangentVec{z, u});
        if (r.status != FlowStatus::Complete) return std::nullopt;
        return r.point;
    };

    std::vector<Vec> dirs;
    for (int k = 0; k < d; ++k) dirs.push_back(Vec(Vec::Unit(d, k)));
    for (int i = 0; i < n_dirs; ++i) dirs.push_back(rng.unit_vector(d));

    for (const Vec& dir : dirs) {
        Vec u = radius * dir;
        auto centre = apply_at(u);
        if (!centre) {
            ++out.n_flow_failures;
            out.min_singular = 0.0;
            out.min_pair_gap = 0.0;
            continue;
        }

        Mat J(d, d);
        bool ok = true;
        for (int k = 0; k < d && ok; ++k) {
            auto p = apply_at(Vec(u + h * Vec::Unit(d, k)));
            auto m = apply_at(Vec(u - h * Vec::Unit(d, k)));
            if (!p || !m) {
                ok = false;
                break;
            }
            auto pp = M.try_transition(*p, centre->chart);
            auto mm = M.try_transition(*m, centre->chart);
            if (!pp || !mm) {
                ok = false;
                break;
            }
            J.col(k) = (pp->x - mm->x) / (2.0 * h);
        }
        if (ok) {
            out.min_singular = std::min(out.min_singular, min_singular_value(J));
        } else {
            ++out.n_flow_failures;
            out.min_singular = 0.0;
        }

        auto gap = [&](double b) {
            auto q = apply_at(Vec(-b * dir));
            if (!q) return 1e6;
            return M.distance(*centre, *q);
        };
        out.min_pair_gap = std::min(out.min_pair_gap, detail::scan_min(gap, 1e-3 * radius, radius));
    }
    return out;
}

}  // namespace srlab
