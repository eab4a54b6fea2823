#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "srlab/curve.hpp"
#include "srlab/manifolds.hpp"
#include "srlab/ode.hpp"
#include "srlab/primitives.hpp"
#include "srlab/tangent.hpp"

using namespace srlab;

namespace {

// Round-metric geodesic acceleration in stereographic coordinates:
//   x'' = (2 / (1 + |x|^2)) [ (x.v) v + (x.v) v - (v.v) x ]   (hand-derived
// from the conformal metric 4 dx^2 / (1+|x|^2)^2; the same bilinear form, with
// opposite sign, is the Christoffel form of the Levi-Civita connection).
Vec round_accel(const Vec& x, const Vec& v) {
    double u = 1.0 + x.squaredNorm();
    return (2.0 / u) * (2.0 * x.dot(v) * v - v.squaredNorm() * x);
}

// Oracle: great circle in the ambient embedding, exp_p(tV) for unit sphere.
Vec great_circle(const Vec& p_emb, const Vec& v_emb, double t) {
    double s = v_emb.norm();
    if (s == 0.0) return p_emb;
    return std::cos(s * t) * p_emb + (std::sin(s * t) / s) * v_emb;
}

VectorFieldOnManifold geodesic_field(const ChartedManifold& TS2) {
    VectorFieldOnManifold f;
    f.manifold = &TS2;
    f.eval = [](const Point& p) {
        int d = static_cast<int>(p.x.size()) / 2;
        Vec x = p.x.head(d), v = p.x.tail(d);
        return TangentVec{p, concat(v, round_accel(x, v))};
    };
    return f;
}

Vec embed_state(const Point& p) {
    Vec x = p.x.head(2);
    return sphere_chart_embedding(2, p.chart).eval(x);
}

}  // namespace

TEST_CASE("constant field integrates to a straight line") {
    ChartedManifold R2 = euclidean_space(2, "R^2");
    VectorFieldOnManifold f{&R2, [](const Point& p) { return TangentVec{p, vec_of({1.0, 0.0})}; }};

    FlowResult zero = flow(f, Point{0, vec_of({0.3, -0.1})}, 0.0);
    CHECK(zero.status == FlowStatus::Complete);
    CHECK(zero.end.x == vec_of({0.3, -0.1}));  // exact identity at t = 0

    FlowResult r = flow(f, Point{0, vec_of({0.0, 0.0})}, 1.0);
    CHECK(r.status == FlowStatus::Complete);
    CHECK((r.end.x - vec_of({1.0, 0.0})).norm() < 1e-12);

    FlowResult back = flow(f, r.end, -1.0);
    CHECK(back.end.x.norm() < 1e-12);
}

TEST_CASE("flat geodesic field doubles as a second order equation") {
    ChartedManifold TR = euclidean_space(2, "TR");  // state (x, v)
    VectorFieldOnManifold f{
        &TR, [](const Point& p) { return TangentVec{p, vec_of({p.x[1], 0.0})}; }};
    FlowResult r = flow(f, Point{0, vec_of({0.0, 2.0})}, 0.5);
    CHECK(r.status == FlowStatus::Complete);
    CHECK((r.end.x - vec_of({1.0, 2.0})).norm() < 1e-10);
}

TEST_CASE("integral curve reuses state and hits requested times") {
    ChartedManifold R2 = euclidean_space(2, "R^2");
    VectorFieldOnManifold f{&R2, [](const Point& p) { return TangentVec{p, vec_of({1.0, 0.0})}; }};
    auto curve = integral_curve(f, Point{0, Vec::Zero(2)}, {0.0, 0.5, 1.0});
    REQUIRE(curve.status == FlowStatus::Complete);
    REQUIRE(curve.points.size() == 3);
    CHECK((curve.points[1].x - vec_of({0.5, 0.0})).norm() < 1e-12);
    CHECK((curve.points[2].x - vec_of({1.0, 0.0})).norm() < 1e-12);

    CHECK_THROWS_AS(integral_curve(f, Point{0, Vec::Zero(2)}, {0.0, 0.5, 0.5}), Error);
}

TEST_CASE("flow reports domain exit and step exhaustion") {
    ChartedManifold small = euclidean_space(2, "small", 1.0);
    VectorFieldOnManifold f{&small,
                            [](const Point& p) { return TangentVec{p, vec_of({1.0, 0.0})}; }};
    FlowResult r = flow(f, Point{0, Vec::Zero(2)}, 2.0);
    CHECK(r.status == FlowStatus::LeftDomain);
    CHECK(r.t_exit > 0.5);
    CHECK(r.t_exit < 1.05);

    IntegratorConfig tiny;
    tiny.max_steps = 3;
    FlowResult m = flow(f, Point{0, Vec::Zero(2)}, 0.5, tiny);
    CHECK(m.status == FlowStatus::MaxSteps);
}

TEST_CASE("sphere geodesics match the ambient great circle formula") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);

    Rng rng(41);
    for (int i = 0; i < 20; ++i) {
        Vec x0 = rng.in_ball(2, 1.0);
        Vec v0 = rng.in_ball(2, 1.0);
        int c = rng.uniform_int(2);
        Point start{c, concat(x0, v0)};
        double t = rng.uniform(0.3, 3.0);

        FlowResult r = flow(f, start, t);
        REQUIRE(r.status == FlowStatus::Complete);

        Vec p_emb = sphere_chart_embedding(2, c).eval(x0);
        Vec v_emb = sphere_chart_embedding(2, c).jet1(x0, v0);
        Vec expect = great_circle(p_emb, v_emb, t);
        CHECK((embed_state(r.end) - expect).norm() < 1e-6);
    }
}

TEST_CASE("geodesic integral curves stay on the embedded sphere") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);
    Point start{0, vec_of({0.2, -0.3, 0.8, 0.4})};

    std::vector<double> times;
    for (int k = 0; k <= 40; ++k) times.push_back(0.1 * k);
    auto curve = integral_curve(f, start, times);
    REQUIRE(curve.status == FlowStatus::Complete);
    for (const auto& p : curve.points) CHECK(std::abs(embed_state(p).norm() - 1.0) < 1e-6);
}

TEST_CASE("endpoint is invariant under the starting chart") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);

    Point a{0, vec_of({0.7, 0.2, 0.5, -0.6})};
    Point b = TS2.transition(a, 1);
    FlowResult ra = flow(f, a, 2.0);
    FlowResult rb = flow(f, b, 2.0);
    REQUIRE(ra.status == FlowStatus::Complete);
    REQUIRE(rb.status == FlowStatus::Complete);
    CHECK(TS2.distance(ra.end, rb.end) < 1e-8);
}

TEST_CASE("approximate flow group law holds") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);
    Point start{0, vec_of({0.1, 0.4, -0.5, 0.7})};

    FlowResult ab = flow(f, flow(f, start, 0.7).end, 0.9);
    FlowResult both = flow(f, start, 1.6);
    CHECK(TS2.distance(ab.end, both.end) < 1e-8);
}

TEST_CASE("fixed step method is fourth order on the exponential") {
    ChartedManifold R1 = euclidean_space(1, "R");
    VectorFieldOnManifold f{&R1, [](const Point& p) { return TangentVec{p, p.x}; }};
    Point exact{0, vec_of({std::exp(1.0)})};

    auto res = convergence_order(f, Point{0, vec_of({1.0})}, 1.0, {0.1, 0.05, 0.025, 0.0125},
                                 &exact);
    REQUIRE(!res.exact);
    CHECK(res.order > 3.7);
    CHECK(res.order < 4.3);

    // Richardson: halving h divides the endpoint error by about 2^4.
    double e1 = res.h_err[1].second, e2 = res.h_err[2].second;
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("constant fields report exact integration instead of an order") {
    ChartedManifold R1 = euclidean_space(1, "R");
    VectorFieldOnManifold f{&R1,
                            [](const Point& p) { return TangentVec{p, vec_of({1.0})}; }};
    auto res = convergence_order(f, Point{0, vec_of({0.0})}, 1.0, {0.1, 0.05, 0.025});
    CHECK(res.exact);
}

TEST_CASE("fixed step method is fourth order on sphere geodesics") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);
    Point start{0, vec_of({0.2, 0.1, 0.9, -0.3})};

    FlowResult ref_run = flow(f, start, 1.0);  // adaptive at 1e-10
    REQUIRE(ref_run.status == FlowStatus::Complete);
    auto res =
        convergence_order(f, start, 1.0, {0.1, 0.05, 0.025, 0.0125}, &ref_run.end);
    REQUIRE(!res.exact);
    CHECK(res.order > 3.7);
    CHECK(res.order < 4.3);
}

TEST_CASE("flow backed curves evaluate consistently with direct flows") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);
    Point start{0, vec_of({0.0, 0.0, 0.6, 0.2})};

    auto curve = CurveOnManifold::from_flow(f, start, 2.0);
    for (double t : {0.0, 0.37, 1.0, 1.73, 2.0}) {
        Point direct = flow(f, start, t).end;
        CHECK(TS2.distance(curve.at(t), direct) < 1e-8);
    }

    // Velocity agrees with a central difference of the curve itself.
    double t0 = 0.8, h = 1e-5;
    TangentVec vel = curve.velocity(t0);
    Point plus = TS2.transition(curve.at(t0 + h), vel.base.chart);
    Point minus = TS2.transition(curve.at(t0 - h), vel.base.chart);
    Vec fd = (plus.x - minus.x) / (2.0 * h);
    CHECK((vel.v - fd).norm() < 1e-6);
}

TEST_CASE("flow trace exports as csv") {
    ChartedManifold S2 = sphere_stereographic(2, "S^2");
    ChartedManifold TS2 = tangent_manifold(S2);
    auto f = geodesic_field(TS2);

    IntegratorConfig cfg;
    cfg.record_trace = true;
    FlowResult r = flow(f, Point{0, vec_of({0.2, 0.0, 0.9, 0.3})}, 4.0, cfg);
    REQUIRE(r.status == FlowStatus::Complete);
    REQUIRE(r.trace.size() >= 2);

    std::ostringstream os;
    write_flow_trace_csv(r, os);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "t,chart,x0,x1,x2,x3");

    int rows = 0;
    double t_prev = -1.0, t_last = 0.0;
    while (std::getline(is, line)) {
        std::istringstream row(line);
        std::string t_s, chart_s;
        REQUIRE(std::getline(row, t_s, ','));
        REQUIRE(std::getline(row, chart_s, ','));
        double t = std::stod(t_s);
        CHECK(t > t_prev);  // rows in step order
        int chart = std::stoi(chart_s);
        CHECK(chart >= 0);
        CHECK(chart < TS2.n_charts());
        t_prev = t_last = t;
        ++rows;
    }
    CHECK(rows == static_cast<int>(r.trace.size()));
    CHECK(t_last == 4.0);

    // A long sphere geodesic cannot stay in one stereographic chart, so the
    // trace must show a switch.
    bool switched = false;
    for (const auto& [t, p] : r.trace) switched |= (p.chart != 0);
    CHECK(switched);
}
