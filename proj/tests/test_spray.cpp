#include <catch2/catch_amalgamated.hpp>

#include "srlab/bundle.hpp"
#include "srlab/manifolds.hpp"
#include "srlab/partition.hpp"
#include "srlab/spray.hpp"

using namespace srlab;

namespace {

// Round-metric geodesic form, polarized: B(x)(v, w) such that B(x)(v, v) is
// the stereographic geodesic acceleration. Symmetric by construction.
Vec round_B(const Vec& x, const Vec& v, const Vec& w) {
    double u = 1.0 + x.squaredNorm();
    return Vec((2.0 / u) * (x.dot(v) * w + x.dot(w) * v - v.dot(w) * x));
}

// Oracle: great circle in the ambient embedding, exp_p(tV) for unit sphere.
Vec great_circle(const Vec& p_emb, const Vec& v_emb, double t) {
    double s = v_emb.norm();
    if (s == 0.0) return p_emb;
    return Vec(std::cos(s * t) * p_emb + (std::sin(s * t) / s) * v_emb);
}

struct SphereSetup {
    ChartedManifold M = sphere_stereographic(2);
    AnchoredBundle E;
    ChartPartitionOfUnity pu = ChartPartitionOfUnity::radial(&M, 3.0);
    Spray spray;

    SphereSetup() {
        E = tangent_anchored_bundle(&M);
        std::vector<Spray> locals;
        for (int c = 0; c < 2; ++c)
            locals.push_back(quadratic_local_spray(&E, c, round_B));
        spray = glue_sprays(locals, pu);
    }
};

}  // namespace

TEST_CASE("partition of unity on the stereographic sphere", "[partition]") {
    ChartedManifold M = sphere_stereographic(2);
    ChartPartitionOfUnity pu = ChartPartitionOfUnity::radial(&M, 3.0);
    Rng rng(7);
    PartitionCheckResult r = check_partition(pu, rng, 200);
    REQUIRE(r.n_samples == 200);
    CHECK(r.sum_residual < 1e-14);

    // Weights depend only on the underlying point, not its representation.
    for (int i = 0; i < 50; ++i) {
        Point p = M.sample_point(rng);
        auto q = M.try_transition(p, 1 - p.chart);
        if (!q) continue;
        for (auto& [c, w] : pu.weights(p)) {
            for (auto& [c2, w2] : pu.weights(*q))
                if (c2 == c) CHECK(std::abs(w - w2) < 1e-12);
        }
    }

    // Shrunken supports miss the equator entirely.
    ChartPartitionOfUnity tiny = ChartPartitionOfUnity::radial(&M, 0.5);
    CHECK_THROWS_AS(tiny.weights(Point{0, vec_of({1.0, 0.0})}), Error);
}

TEST_CASE("tangent bundle of the sphere is a consistent anchored bundle", "[bundle]") {
    ChartedManifold M = sphere_stereographic(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    REQUIRE(E.total.n_charts() == 2);
    REQUIRE(E.total.dim() == 4);

    Rng arng(11);
    AtlasCheckResult atlas = check_atlas(E.total, arng, 150);
    CHECK(atlas.roundtrip < 1e-9);
    CHECK(atlas.cocycle < 1e-8);

    Rng rng(13);
    BundleCheckResult r = check_bundle(E, rng, 200);
    REQUIRE(r.n_samples == 200);
    CHECK(r.anchor_linearity < 1e-12);
    CHECK(r.projection_match < 1e-12);
    CHECK(r.anchor_covariance < 1e-10);
}

TEST_CASE("flat spray on T R^2: exponential is vector addition", "[spray]") {
    ChartedManifold M = euclidean_space(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    Spray S = quadratic_local_spray(
        &E, 0, [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(2)); }, "flat");

    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        Vec x = rng.in_ball(2, 3.0), w = rng.in_ball(2, 3.0);
        auto r = spray_exponential(S, E.point(0, x, w));
        REQUIRE(r.status == FlowStatus::Complete);
        CHECK((r.point.x - (x + w)).norm() < 1e-12);
    }

    SprayAxiomResult ax = check_spray_axioms(S, rng, 60);
    REQUIRE(ax.n_samples == 60);
    CHECK(ax.s1 < 1e-12);
    CHECK(ax.s2 < 1e-12);
    CHECK(ax.s3 < 1e-12);
}

TEST_CASE("asymmetric quadratic form is rejected", "[spray]") {
    ChartedManifold M = euclidean_space(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    auto bad = [](const Vec& x, const Vec& v, const Vec& w) { return Vec(x.dot(w) * v); };
    CHECK_THROWS_AS(quadratic_local_spray(&E, 0, bad), Error);
}

TEST_CASE("local spray refuses evaluation outside its home chart", "[spray]") {
    SphereSetup s;
    Spray local = quadratic_local_spray(&s.E, 0, round_B);
    CHECK_THROWS_AS(local.value(s.E.point(1, vec_of({0.1, 0.2}), vec_of({1.0, 0.0}))), Error);
}

TEST_CASE("glued round spray agrees with both local sprays", "[spray]") {
    SphereSetup s;
    Rng rng(23);
    for (int c = 0; c < 2; ++c) {
        Spray local = quadratic_local_spray(&s.E, c, round_B);
        for (int i = 0; i < 40; ++i) {
            Vec x = rng.in_ball(2, 2.5), w = rng.in_ball(2, 1.5);
            Vec a_glued = s.spray.accel(c, x, w);
            Vec a_local = local.accel(c, x, w);
            CHECK((a_glued - a_local).norm() < 1e-9 * (1.0 + a_local.norm()));
        }
    }
}

TEST_CASE("glued round spray exponential matches the great-circle oracle", "[spray]") {
    SphereSetup s;
    Rng rng(29);
    SmoothCoordMap emb0 = sphere_chart_embedding(2, 0), emb1 = sphere_chart_embedding(2, 1);
    for (int i = 0; i < 15; ++i) {
        int c = i % 2;
        Vec x = rng.in_ball(2, 2.0), w = rng.in_ball(2, 1.4);
        auto r = spray_exponential(s.spray, s.E.point(c, x, w));
        REQUIRE(r.status == FlowStatus::Complete);

        const SmoothCoordMap& emb = (c == 0) ? emb0 : emb1;
        Vec p_emb = emb.eval(x);
        Vec v_emb = emb.jet1(x, w);
        Vec oracle = great_circle(p_emb, v_emb, 1.0);
        Vec got = sphere_embed(s.M, 2, r.point);
        CHECK((got - oracle).norm() < 1e-6);
    }
}

TEST_CASE("spray axioms hold for the glued round spray", "[spray]") {
    SphereSetup s;
    Rng rng(31);
    SprayAxiomResult ax = check_spray_axioms(s.spray, rng, 80);
    REQUIRE(ax.n_samples > 0);
    CHECK(ax.s1 < 1e-12);
    CHECK(ax.s2 < 1e-12);
    CHECK(ax.s3 < 1e-9);
}

TEST_CASE("gluing conflicting local sprays still yields a spray", "[spray]") {
    // Chart-flat sprays disagree on the overlap (the transition is nonlinear),
    // so the convex combination is a genuinely new field -- but the quadratic
    // structure survives gluing.
    SphereSetup s;
    auto flat = [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(2)); };
    std::vector<Spray> locals = {quadratic_local_spray(&s.E, 0, flat),
                                 quadratic_local_spray(&s.E, 1, flat)};
    Spray odd = glue_sprays(locals, s.pu);

    // Not the flat spray of either chart on the overlap:
    Vec x = vec_of({1.2, 0.4}), w = vec_of({0.8, -0.3});
    CHECK(odd.accel(0, x, w).norm() > 1e-3);

    Rng rng(37);
    SprayAxiomResult ax = check_spray_axioms(odd, rng, 60);
    CHECK(ax.s1 < 1e-12);
    CHECK(ax.s2 < 1e-12);
    CHECK(ax.s3 < 1e-9);
}

TEST_CASE("partition support gaps surface as CoverageGap when gluing", "[spray]") {
    SphereSetup s;
    auto flat = [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(2)); };
    std::vector<Spray> only0 = {quadratic_local_spray(&s.E, 0, flat)};
    Spray g = glue_sprays(only0, s.pu);
    // (0.5, 0) also carries chart-1 weight, where no local spray lives.
    CHECK_THROWS_AS(g.accel(0, vec_of({0.5, 0.0}), vec_of({1.0, 0.0})), Error);
}

TEST_CASE("flow homogeneity of the glued round spray", "[spray]") {
    SphereSetup s;
    Rng rng(41);
    HomogeneityResult r = flow_homogeneity_check(s.spray, rng, 25);
    REQUIRE(r.n_complete >= 20);
    CHECK(r.max_residual < 1e-8);
}

TEST_CASE("spray flows project to anchored paths", "[spray]") {
    SphereSetup s;
    IntegratorConfig cfg;
    cfg.method = OdeMethod::Rk4Fixed;
    cfg.h = 0.01;
    cfg.record_trace = true;
    Point e = s.E.point(0, vec_of({0.4, -0.1}), vec_of({0.9, 0.7}));
    FlowResult fr = flow(s.spray.field(), e, 0.8, cfg);
    REQUIRE(fr.status == FlowStatus::Complete);
    REQUIRE(fr.trace.size() > 50);
    CHECK(anchored_path_defect(fr.trace, s.E) < 1e-3);
}

TEST_CASE("fibre derivative of the exponential is the anchor", "[spray]") {
    SphereSetup s;
    Rng rng(43);
    Point m{0, vec_of({0.3, -0.2})};
    FibreDerivativeResult r = fibre_derivative_check(s.spray, m, rng, 6);
    REQUIRE(r.n_samples == 6);
    CHECK(r.max_residual < 1e-5);
}

TEST_CASE("conjugating a spray through a fibre rescaling", "[spray]") {
    ChartedManifold M = euclidean_space(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);

    // Same base, same trivial transitions, anchor halved: the target of the
    // fibre-wise isomorphism w -> 2w.
    AnchoredBundle half;
    half.name = "half-anchored";
    half.base_manifold = &M;
    half.fibre_dim = 2;
    half.anchor_block = [](int, const Vec&) { return Mat(0.5 * Mat::Identity(2, 2)); };
    half.fibre_transition = [](int, int, const Vec&) { return Mat(Mat::Identity(2, 2)); };
    half.fibre_transition_deriv = [](int, int, const Vec&, const Vec&) {
        return Mat(Mat::Zero(2, 2));
    };
    half.finalize();

    Vec c0 = vec_of({0.7, -0.4});
    auto B = [c0](const Vec& x, const Vec& v, const Vec& w) {
        return Vec(v.dot(w) * c0 + 0.3 * (x.dot(v) * w + x.dot(w) * v));
    };
    Spray S = quadratic_local_spray(&E, 0, B);

    auto Phi = [](int, const Vec&) { return Mat(2.0 * Mat::Identity(2, 2)); };
    auto dPhi = [](int, const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
    Spray Sp = conjugate_spray(&half, Phi, dPhi, S);

    Rng rng(47);
    SprayAxiomResult ax = check_spray_axioms(Sp, rng, 40);
    CHECK(ax.s1 < 1e-12);
    CHECK(ax.s2 < 1e-12);
    CHECK(ax.s3 < 1e-10);

    // Conjugation intertwines the flows: exp'(x, 2w) = exp(x, w).
    for (int i = 0; i < 12; ++i) {
        Vec x = rng.in_ball(2, 1.0), w = rng.in_ball(2, 0.5);
        auto a = spray_exponential(Sp, half.point(0, x, 2.0 * w));
        auto b = spray_exponential(S, E.point(0, x, w));
        REQUIRE(a.status == FlowStatus::Complete);
        REQUIRE(b.status == FlowStatus::Complete);
        CHECK((a.point.x - b.point.x).norm() < 1e-9);
    }

    // The identity anchor does not intertwine with w -> 2w.
    CHECK_THROWS_AS(conjugate_spray(&E, Phi, dPhi, S), Error);
}

TEST_CASE("domain probe: flat spray is complete and injective out to the cap", "[spray]") {
    ChartedManifold M = euclidean_space(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    Spray S = quadratic_local_spray(
        &E, 0, [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(2)); });
    Rng rng(53);
    DomainProbeResult r = domain_probe(S, Point{0, vec_of({0.2, 0.1})}, rng);
    CHECK(r.radius == 4.0);
    CHECK(r.n_collisions == 0);
    CHECK(r.n_flow_failures == 0);
}

TEST_CASE("domain probe: round sphere loses injectivity near the antipode", "[spray]") {
    SphereSetup s;
    Rng rng(59);
    DomainProbeResult r = domain_probe(s.spray, Point{0, vec_of({0.0, 0.0})}, rng);
    // At the chart origin the metric doubles coordinate lengths, so opposite
    // rays collide at the antipode when the fibre radius reaches pi/2.
    CHECK(r.radius > 1.35);
    CHECK(r.radius < 1.75);
    CHECK(r.radius < 3.141592653589793);
    CHECK(r.n_collisions > 0);
}

TEST_CASE("domain probe: blow-up spray has a small completeness radius", "[spray]") {
    ChartedManifold M = euclidean_space(1);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    auto B = [](const Vec&, const Vec& v, const Vec& w) { return Vec(10.0 * v.cwiseProduct(w)); };
    Spray S = quadratic_local_spray(&E, 0, B);
    Rng rng(61);
    DomainProbeResult r = domain_probe(S, Point{0, vec_of({0.0})}, rng);
    // dw/dt = 10 w^2 escapes in finite time once w(0) reaches 1/10.
    CHECK(r.radius < 1.0);
    CHECK(r.radius > 0.05);
    CHECK(r.n_flow_failures > 0);
}
