#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>

#include "srlab/bundle.hpp"
#include "srlab/connection.hpp"
#include "srlab/manifolds.hpp"
#include "srlab/partition.hpp"
#include "srlab/spray.hpp"

using namespace srlab;

namespace {

Vec round_B(const Vec& x, const Vec& v, const Vec& w) {
    double u = 1.0 + x.squaredNorm();
    return Vec((2.0 / u) * (x.dot(v) * w + x.dot(w) * v - v.dot(w) * x));
}

// Conformal round metric in stereographic coordinates.
double round_g(const Vec& x, const Vec& w) {
    double u = 1.0 + x.squaredNorm();
    return 4.0 * w.squaredNorm() / (u * u);
}

struct RoundSetup {
    ChartedManifold M = sphere_stereographic(2);
    AnchoredBundle E;
    ChartPartitionOfUnity pu = ChartPartitionOfUnity::radial(&M, 3.0);
    Spray spray;
    LinearConnection conn;

    RoundSetup() {
        E = tangent_anchored_bundle(&M);
        std::vector<Spray> locals;
        for (int c = 0; c < 2; ++c) locals.push_back(quadratic_local_spray(&E, c, round_B));
        spray = glue_sprays(locals, pu);
        conn = connection_from_spray(spray);
    }
};

CurveOnManifold circle_curve(const ChartedManifold* M, double r0) {
    auto at = [r0](double t) {
        return Point{0, vec_of({r0 * std::cos(t), r0 * std::sin(t)})};
    };
    auto vel = [r0, at](double t) {
        return TangentVec{at(t), vec_of({-r0 * std::sin(t), r0 * std::cos(t)})};
    };
    return CurveOnManifold::closed_form(M, at, vel);
}

}  // namespace

TEST_CASE("flat connection transports trivially", "[connection]") {
    ChartedManifold M = euclidean_space(2);
    AnchoredBundle E = tangent_anchored_bundle(&M);
    LinearConnection flat{&E, "flat",
                          [](int, const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(2)); }};
    CurveOnManifold c = circle_curve(&M, 1.0);
    TransportOperator op = parallel_transport(flat, c, 0.0, 5.0);
    CHECK((op.P - Mat::Identity(2, 2)).norm() < 1e-12);
    CHECK(op.from.chart == 0);
    CHECK(op.to.chart == 0);
}

TEST_CASE("polarized connection recovers the geodesic form", "[connection]") {
    RoundSetup s;
    Rng rng(67);
    for (int i = 0; i < 30; ++i) {
        Vec x = rng.in_ball(2, 2.5), v = rng.in_ball(2, 1.5), w = rng.in_ball(2, 1.5);
        Vec got = s.conn.gamma(0, x, v, w);
        Vec expect = -round_B(x, v, w);
        CHECK((got - expect).norm() < 1e-9 * (1.0 + expect.norm()));
    }
}

TEST_CASE("geodesic velocity is parallel along its own geodesic", "[connection]") {
    RoundSetup s;
    Point e0 = s.E.point(0, vec_of({0.4, -0.3}), vec_of({0.9, 0.6}));
    double T = 1.1;
    CurveOnManifold c = base_curve(s.spray, e0, T);
    TransportResult tr =
        parallel_transport_vector(s.conn, c, 0.0, T, s.E.fibre(e0), e0.chart);
    REQUIRE(tr.status == FlowStatus::Complete);

    FlowResult up = flow(s.spray.field(), e0, T);
    REQUIRE(up.status == FlowStatus::Complete);
    Vec w_end = s.E.fibre(up.end);
    Vec x_end = up.end.x.head(2);
    if (up.end.chart != tr.base_end.chart)
        w_end = s.E.fibre_transition(up.end.chart, tr.base_end.chart, x_end) * w_end;
    CHECK((tr.w - w_end).norm() < 1e-7);
}

TEST_CASE("parallel transport preserves the round metric", "[connection]") {
    RoundSetup s;
    Rng rng(71);

    SECTION("along a latitude circle") {
        CurveOnManifold c = circle_curve(&s.M, 0.8);
        for (int i = 0; i < 10; ++i) {
            Vec w0 = rng.in_ball(2, 2.0);
            TransportResult tr = parallel_transport_vector(s.conn, c, 0.0, 4.0, w0, 0);
            REQUIRE(tr.status == FlowStatus::Complete);
            double g0 = round_g(c.at(0.0).x, w0);
            double g1 = round_g(tr.base_end.x, tr.w);
            CHECK(std::abs(g1 - g0) < 1e-9 * (1.0 + g0));
        }
    }

    SECTION("along a chart-crossing geodesic") {
        Point e0 = s.E.point(0, vec_of({2.0, 0.0}), vec_of({1.2, 0.3}));
        double T = 1.4;
        CurveOnManifold c = base_curve(s.spray, e0, T);
        // The path leaves chart 0's comfortable region; the end point should
        // be tracked in chart 1.
        TransportResult tr = parallel_transport_vector(s.conn, c, 0.0, T,
                                                       vec_of({0.5, -0.4}), 0);
        REQUIRE(tr.status == FlowStatus::Complete);
        CHECK(tr.base_end.chart == 1);
        double g0 = round_g(c.at(0.0).x, vec_of({0.5, -0.4}));
        double g1 = round_g(tr.base_end.x, tr.w);
        CHECK(std::abs(g1 - g0) < 1e-8 * (1.0 + g0));
    }
}

TEST_CASE("holonomy around a latitude circle", "[connection]") {
    RoundSetup s;

    SECTION("frozen trace at chart radius 1/2") {
        // Circle of coordinate radius 1/2 about the chart origin: holonomy
        // rotation by 2 pi (1 - r0^2) / (1 + r0^2); its trace at r0 = 1/2 is
        // 2 cos(0.8 pi) = -1.6180339887 (the golden ratio, negated).
        CurveOnManifold c = circle_curve(&s.M, 0.5);
        TransportOperator P = parallel_transport(s.conn, c, 0.0, 2.0 * M_PI);
        REQUIRE(P.from.chart == P.to.chart);
        CHECK((P.from.x - P.to.x).norm() < 1e-9);
        CHECK(std::abs(P.P.trace() - (-1.6180339887)) < 1e-6);
        // Orthogonal with unit determinant: the conformal factor cancels at a
        // common base point, so metric-orthogonality is Euclidean here.
        CHECK((P.P.transpose() * P.P - Mat::Identity(2, 2)).norm() < 1e-8);
        CHECK(std::abs(P.P.determinant() - 1.0) < 1e-8);
    }

    SECTION("the equator is holonomy-trivial") {
        CurveOnManifold c = circle_curve(&s.M, 1.0);
        TransportOperator P = parallel_transport(s.conn, c, 0.0, 2.0 * M_PI);
        CHECK((P.P - Mat::Identity(2, 2)).norm() < 1e-7);
    }
}

TEST_CASE("transport roundtrip and linearity", "[connection]") {
    RoundSetup s;
    Point e0 = s.E.point(0, vec_of({2.0, 0.0}), vec_of({1.2, 0.3}));
    double T = 1.4;
    CurveOnManifold c = base_curve(s.spray, e0, T);
    CHECK(transport_roundtrip_defect(s.conn, c, 0.0, T) < 1e-9);

    Rng rng(73);
    CHECK(transport_linearity_defect(s.conn, c, 0.0, T, rng, 8) < 1e-10);
}

TEST_CASE("transport composes over subdivided parameter ranges", "[connection]") {
    RoundSetup s;
    Point e0 = s.E.point(0, vec_of({0.4, -0.3}), vec_of({0.9, 0.6}));
    double T = 0.9;
    CurveOnManifold c = base_curve(s.spray, e0, T);
    TransportOperator direct = parallel_transport(s.conn, c, 0.0, T);
    TransportOperator first = parallel_transport(s.conn, c, 0.0, 0.45);
    TransportOperator second = parallel_transport(s.conn, c, 0.45, T);
    TransportOperator two_leg = compose(second, first);

    Mat bridge = Mat::Identity(2, 2);
    if (two_leg.to.chart != direct.to.chart)
        bridge = s.E.fibre_transition(two_leg.to.chart, direct.to.chart, two_leg.to.x);
    CHECK((bridge * two_leg.P - direct.P).norm() < 1e-9);
}

TEST_CASE("joint spray-flow transport matches the sequential computation", "[connection]") {
    RoundSetup s;
    Point e0 = s.E.point(0, vec_of({0.3, -0.2}), vec_of({0.8, 0.5}));
    Vec w0 = vec_of({0.1, -0.7});
    double T = 0.9;

    JointTransportResult joint = transport_along_spray(s.conn, s.spray, e0, w0, T);
    REQUIRE(joint.status == FlowStatus::Complete);

    CurveOnManifold c = base_curve(s.spray, e0, T);
    TransportResult seq = parallel_transport_vector(s.conn, c, 0.0, T, w0, e0.chart);
    REQUIRE(seq.status == FlowStatus::Complete);

    Vec w_seq = seq.w;
    if (seq.base_end.chart != joint.end_e.chart)
        w_seq = s.E.fibre_transition(seq.base_end.chart, joint.end_e.chart, seq.base_end.x) * w_seq;
    CHECK((joint.w - w_seq).norm() < 1e-8);

    // The upstairs states agree as well.
    FlowResult up = flow(s.spray.field(), e0, T);
    Point up_end = s.E.total.transition(up.end, joint.end_e.chart);
    CHECK((up_end.x - joint.end_e.x).norm() < 1e-8);
}

TEST_CASE("transport trace samples agree with one-shot transport", "[connection]") {
    RoundSetup S;
    CurveOnManifold c = circle_curve(&S.M, 0.7);
    Vec w0 = vec_of({0.3, -0.1});

    auto samples = transport_trace(S.conn, c, 0.0, 2.0, w0, 0, 9);
    REQUIRE(samples.size() == 9);
    CHECK(samples.front().t == 0.0);
    CHECK(samples.back().t == Catch::Approx(2.0).margin(1e-12));
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) CHECK(samples[k].t < samples[k + 1].t);
    CHECK((samples.front().w - w0).norm() == 0.0);

    TransportResult direct = parallel_transport_vector(S.conn, c, 0.0, 2.0, w0, 0);
    REQUIRE(direct.status == FlowStatus::Complete);
    REQUIRE(samples.back().base.chart == direct.base_end.chart);
    CHECK((samples.back().w - direct.w).norm() < 1e-8);

    // Each sample carries the curve point at its own parameter.
    for (const auto& s : samples) {
        Point on_curve = S.M.transition(c.at(s.t), s.base.chart);
        CHECK((s.base.x - on_curve.x).norm() < 1e-8);
    }
}

TEST_CASE("transport trace exports as csv and rejects short sample counts", "[connection]") {
    RoundSetup S;
    CurveOnManifold c = circle_curve(&S.M, 0.7);
    Vec w0 = vec_of({0.0, 0.2});

    CHECK_THROWS_AS(transport_trace(S.conn, c, 0.0, 1.0, w0, 0, 1), Error);

    auto samples = transport_trace(S.conn, c, 0.0, 1.0, w0, 0, 5);
    std::ostringstream os;
    write_transport_trace_csv(samples, os);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "t,chart,x0,x1,w0,w1");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 5);
}
