#include <catch2/catch_amalgamated.hpp>

#include "srlab/chart.hpp"
#include "srlab/coord_map.hpp"
#include "srlab/dual.hpp"
#include "srlab/manifolds.hpp"
#include "srlab/primitives.hpp"
#include "srlab/smooth_map.hpp"
#include "srlab/tangent.hpp"

using namespace srlab;

namespace {

std::function<Vec(Rng&)> ball_sampler(int dim, double radius) {
    return [dim, radius](Rng& rng) { return rng.in_ball(dim, radius); };
}

std::function<Vec(Rng&)> shell_sampler(int dim, double lo, double hi) {
    return [dim, lo, hi](Rng& rng) -> Vec {
        double r = rng.uniform(lo, hi);
        return r * rng.unit_vector(dim);
    };
}

// Near-sphere points bounded away from the projection pole of the given
// stereographic chart, where the forward map is singular.
std::function<Vec(Rng&)> offpole_sampler(int n, bool north) {
    return [n, north](Rng& rng) -> Vec {
        Vec x = rng.in_ball(n, 2.0);
        Vec q = cm_stereo_inv(n, north).eval(x);
        double r = rng.uniform(0.9, 1.1);
        return r * q;
    };
}

// Unit quaternion sampler for maps defined near S^3.
std::function<Vec(Rng&)> unit_sampler(int dim) {
    return [dim](Rng& rng) { return rng.unit_vector(dim); };
}

}  // namespace

TEST_CASE("finite difference oracle matches polynomial derivatives") {
    auto f = [](const Vec& x) {
        Vec y(1);
        y[0] = x[0] * x[0] * x[0];
        return y;
    };
    Vec x = vec_of({1.0}), e = vec_of({1.0});
    CHECK(std::abs(fd::jet1(f, x, e)[0] - 3.0) < 1e-9);
    CHECK(std::abs(fd::jet2(f, x, e, e)[0] - 6.0) < 1e-5);
}

TEST_CASE("dual numbers differentiate a transcendental expression exactly") {
    auto expr = [](auto x) { return sin(x) * exp(x) + 1.0 / (1.0 + x * x); };
    double x0 = 0.7;
    double d1 = std::cos(x0) * std::exp(x0) + std::sin(x0) * std::exp(x0) -
                2.0 * x0 / std::pow(1.0 + x0 * x0, 2);
    Dual1 r1 = expr(Dual1(x0, 1.0));
    CHECK(r1.b == Catch::Approx(d1).epsilon(1e-14));

    Dual2 r2 = expr(Dual2(Dual1(x0, 1.0), Dual1(1.0, 0.0)));
    double d2 = 2.0 * std::cos(x0) * std::exp(x0) +
                (8.0 * x0 * x0 / std::pow(1.0 + x0 * x0, 3) - 2.0 / std::pow(1.0 + x0 * x0, 2));
    CHECK(r2.b.b == Catch::Approx(d2).epsilon(1e-12));
}

TEST_CASE("generic dual-number maps produce exact jets") {
    auto m = SmoothCoordMap::from_generic(2, 2, [](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        std::vector<S> y(2);
        y[0] = x[0] * x[1] + sin(x[0]);
        y[1] = exp(x[1]) - x[0] * x[0];
        return y;
    });
    REQUIRE(m.mode() == DerivMode::DualNumber);
    Rng rng(7);
    auto r = check_jets(m, rng, ball_sampler(2, 2.0), 50);
    CHECK(r.linearity < 1e-12);
    CHECK(r.symmetry < 1e-12);
    CHECK(r.jet1_vs_fd < 1e-7);
    CHECK(r.jet2_vs_fd < 1e-5);
}

TEST_CASE("closed form primitives agree with the finite difference oracle") {
    Rng rng(11);
    struct Case {
        SmoothCoordMap map;
        std::function<Vec(Rng&)> sample;
        const char* name;
    };
    Mat A(2, 3);
    A << 1, 2, 0, -1, 0, 3;
    std::vector<Case> cases;
    cases.push_back({cm_affine(A, vec_of({0.5, -1.0})), ball_sampler(3, 2.0), "affine"});
    cases.push_back({cm_stereo_inv(2, true), ball_sampler(2, 2.5), "stereo_inv_north"});
    cases.push_back({cm_stereo_inv(2, false), ball_sampler(2, 2.5), "stereo_inv_south"});
    cases.push_back({cm_stereo_inv(3, true), ball_sampler(3, 2.5), "stereo_inv_s3"});
    cases.push_back({cm_stereo_fwd(2, true), offpole_sampler(2, true), "stereo_fwd_north"});
    cases.push_back({cm_stereo_fwd(2, false), offpole_sampler(2, false), "stereo_fwd_south"});
    cases.push_back({cm_inversion(2), shell_sampler(2, 0.4, 2.5), "inversion"});
    cases.push_back({cm_quat_fibration(), ball_sampler(4, 1.5), "quat_fibration"});
    cases.push_back({cm_fib_section(0), [](Rng& rng) {
                         Vec y = rng.unit_vector(3);
                         if (y[2] > 0.8) y[2] = -y[2];
                         return Vec(y);
                     },
                     "section0"});
    cases.push_back({cm_fib_section(1), [](Rng& rng) {
                         Vec y = rng.unit_vector(3);
                         if (y[2] < -0.8) y[2] = -y[2];
                         return Vec(y);
                     },
                     "section1"});
    cases.push_back({cm_quat_rotate(), [](Rng& rng) {
                         return concat(rng.unit_vector(4), vec_of({rng.uniform(-3.0, 3.0)}));
                     },
                     "quat_rotate"});
    cases.push_back({cm_fibre_phase_pair(), [](Rng& rng) {
                         return concat(rng.unit_vector(4), rng.unit_vector(4));
                     },
                     "fibre_phase"});
    cases.push_back({cm_atan2_shift(0.0), shell_sampler(2, 0.7, 1.3), "atan2"});

    for (auto& c : cases) {
        INFO(c.name);
        auto r = check_jets(c.map, rng, c.sample, 60);
        CHECK(r.linearity < 1e-10);
        CHECK(r.symmetry < 1e-10);
        CHECK(r.jet1_vs_fd < 5e-7);
        CHECK(r.jet2_vs_fd < 5e-5);
        REQUIRE(c.map.mode() == DerivMode::ClosedForm);
    }
}

TEST_CASE("composition carries the exact chain rule") {
    auto f = cm_stereo_inv(2, true);
    auto g = cm_stereo_fwd(2, false);
    auto gf = SmoothCoordMap::compose(g, f);
    auto inv = cm_inversion(2);
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        Vec x = shell_sampler(2, 0.3, 2.5)(rng);
        Vec v = rng.in_ball(2, 1.0), w = rng.in_ball(2, 1.0);
        CHECK((gf.eval(x) - inv.eval(x)).norm() < 1e-13);
        CHECK((gf.jet1(x, v) - inv.jet1(x, v)).norm() < 1e-12);
        CHECK((gf.jet2(x, v, w) - inv.jet2(x, v, w)).norm() < 1e-11);
    }
}

TEST_CASE("chain stages with gather and append reproduce compositions") {
    // State (x) -> append y = stereo_inv(x) -> select y -> project to the
    // south chart: altogether the chart transition x / |x|^2.
    std::vector<ChainStage> stages;
    stages.push_back(stage_append(cm_stereo_inv(2, true), {0, 1}));
    stages.push_back(stage_select({2, 3, 4}));
    stages.push_back(stage_map(cm_stereo_fwd(2, false)));
    auto chained = SmoothCoordMap::from_chain(2, 2, stages);
    auto inv = cm_inversion(2);
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        Vec x = shell_sampler(2, 0.3, 2.5)(rng);
        Vec v = rng.in_ball(2, 1.0), w = rng.in_ball(2, 1.0);
        CHECK((chained.eval(x) - inv.eval(x)).norm() < 1e-13);
        CHECK((chained.jet1(x, v) - inv.jet1(x, v)).norm() < 1e-12);
        CHECK((chained.jet2(x, v, w) - inv.jet2(x, v, w)).norm() < 1e-11);
    }
}

TEST_CASE("stereographic transition sends (0.5, 0) to (2, 0)") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    Point p{0, vec_of({0.5, 0.0})};
    Point q = S2.transition(p, 1);
    CHECK(q.x[0] == Catch::Approx(2.0).margin(1e-14));
    CHECK(q.x[1] == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("sphere atlas satisfies round trip and cocycle identities") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    Rng rng(13);
    auto r = check_atlas(S2, rng, 200);
    CHECK(r.roundtrip < 1e-12);
    CHECK(r.cocycle < 1e-12);
    CHECK(r.n_samples > 100);
}

TEST_CASE("torus atlas wraps angles consistently") {
    ChartedManifold T1 = torus_angles(1, "S^1");
    REQUIRE(T1.n_charts() == 2);
    Rng rng(17);
    auto r = check_atlas(T1, rng, 200);
    CHECK(r.roundtrip < 1e-12);

    ChartedManifold T2 = torus_angles(2, "T^2");
    REQUIRE(T2.n_charts() == 4);
    auto r2 = check_atlas(T2, rng, 200);
    CHECK(r2.roundtrip < 1e-12);
    CHECK(r2.cocycle < 1e-12);
}

TEST_CASE("transition outside the overlap is rejected") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    Point origin{0, vec_of({0.0, 0.0})};  // south pole, not visible from chart 1
    CHECK_THROWS_AS(S2.transition(origin, 1), Error);
    Point outside{0, vec_of({5.0, 0.0})};
    CHECK_THROWS_AS(S2.transition(outside, 1), Error);
}

TEST_CASE("best chart migrates points away from chart boundaries") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    Point near_edge{0, vec_of({2.9, 0.0})};
    Point b = S2.best_chart(near_edge);
    CHECK(b.chart == 1);
    CHECK(b.x.norm() == Catch::Approx(1.0 / 2.9).margin(1e-12));
    Point comfy{0, vec_of({0.1, 0.2})};
    CHECK(S2.best_chart(comfy).chart == 0);
}

TEST_CASE("manifold distance is chart independent for nearby points") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    Point a{0, vec_of({1.1, 0.3})};
    Point b = S2.transition(a, 1);
    CHECK(S2.distance(a, b) < 1e-13);
}

TEST_CASE("builtin manifold configs construct the declared atlases") {
    auto j = nlohmann::json::parse(R"({"builtin": "stereographic_pair", "dim": 2})");
    ChartedManifold M = manifold_from_json(j);
    CHECK(M.n_charts() == 2);
    CHECK(M.dim() == 2);
    auto j2 = nlohmann::json::parse(R"({"builtin": "euclidean", "dim": 3})");
    CHECK(manifold_from_json(j2).n_charts() == 1);
    auto j3 = nlohmann::json::parse(R"({"builtin": "torus_angles", "dim": 2})");
    CHECK(manifold_from_json(j3).n_charts() == 4);
    auto bad = nlohmann::json::parse(R"({"builtin": "moebius"})");
    CHECK_THROWS_AS(manifold_from_json(bad), Error);
}

TEST_CASE("tangent manifold transitions carry the transition Jacobian") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    REQUIRE(TS2.dim() == 4);
    Rng rng(23);
    const auto& lift = TS2.transition_map(0, 1);
    auto base_eval = [&S2](const Vec& x) { return S2.transition_map(0, 1).eval(x); };
    for (int i = 0; i < 40; ++i) {
        Vec x = shell_sampler(2, 0.4, 2.5)(rng);
        Vec v = rng.in_ball(2, 1.0);
        Vec z = concat(x, v);
        Vec lifted = lift.eval(z);
        Vec jac_v = fd::jet1(base_eval, x, v);
        CHECK((lifted.tail(2) - jac_v).norm() < 1e-7);

        // First jet of the lifted transition against finite differences.
        Vec d = rng.in_ball(4, 1.0);
        auto lift_eval = [&lift](const Vec& q) { return lift.eval(q); };
        CHECK((lift.jet1(z, d) - fd::jet1(lift_eval, z, d)).norm() < 1e-6);
    }
    auto r = check_atlas(TS2, rng, 100);
    CHECK(r.roundtrip < 1e-11);

    // The construction applies to its own output.
    ChartedManifold TTS2 = tangent_manifold(TS2);
    CHECK(TTS2.dim() == 8);
    CHECK(TTS2.n_charts() == 2);
}

TEST_CASE("smooth map differentials match finite differences") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold R2 = euclidean_space(2, "R^2");

    // Chart 0 coordinates of S^2 seen as a map R^2 -> R^2 doubling angles is
    // arbitrary enough: use the transition composed with a linear stretch.
    SmoothMap f(&S2, &R2);
    Mat A(2, 2);
    A << 2, 1, 0, 1;
    f.add_rep(0, 0, cm_affine(A, Vec::Zero(2)));
    f.add_rep(1, 0, SmoothCoordMap::compose(cm_affine(A, Vec::Zero(2)), cm_inversion(2)));

    Rng rng(29);
    for (int i = 0; i < 30; ++i) {
        Point p{1, shell_sampler(2, 0.5, 1.5)(rng)};
        Vec v = rng.in_ball(2, 1.0);
        TangentVec tv{p, v};
        TangentVec out = f.differential(tv);
        auto eval0 = [&](const Vec& x) { return f.eval(Point{1, x}, 0).x; };
        CHECK((out.v - fd::jet1(eval0, p.x, v)).norm() < 1e-7);
    }
}

TEST_CASE("local representatives agree on chart overlaps") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold R3 = euclidean_space(3, "R^3");
    SmoothMap embed(&S2, &R3);
    embed.add_rep(0, 0, cm_stereo_inv(2, true));
    embed.add_rep(1, 0, cm_stereo_inv(2, false));
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        Point p{0, shell_sampler(2, 0.4, 2.5)(rng)};
        Point q = S2.transition(p, 1);
        Vec via0 = embed.rep(0, 0).eval(p.x);
        Vec via1 = embed.rep(1, 0).eval(q.x);
        CHECK((via0 - via1).norm() < 1e-13);
    }
}

TEST_CASE("fibre product tangents are exactly the Tp-compatible pairs") {
    ChartedManifold R2 = euclidean_space(2, "M");
    ChartedManifold R1 = euclidean_space(1, "N");
    SmoothMap p(&R2, &R1);
    Mat P(1, 2);
    P << 1, 0;
    p.add_rep(0, 0, cm_affine(P, Vec::Zero(1)));

    Rng rng(37);
    std::vector<FibreProductSample> samples;
    for (int i = 0; i < 30; ++i) {
        Vec base = rng.in_ball(2, 1.0);
        Point m1{0, base};
        Point m2{0, vec_of({base[0], rng.uniform(-1.0, 1.0)})};
        double shared = rng.uniform(-1.0, 1.0);
        // Tangent pair: equal first components.
        samples.push_back({{m1, vec_of({shared, rng.uniform(-1.0, 1.0)})},
                           {m2, vec_of({shared, rng.uniform(-1.0, 1.0)})}});
        // Rejected pair: mismatched first components.
        samples.push_back({{m1, vec_of({shared, 0.0})}, {m2, vec_of({shared + 1.0, 0.0})}});
    }
    auto r = fibre_product_tangent_check(p, p, samples);
    CHECK(r.accepted_residual < 1e-9);
    CHECK(r.rejected_min_defect > 0.5);
    CHECK(r.consistency < 1e-4);
}
