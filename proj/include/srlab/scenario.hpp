#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srlab/hopf.hpp"
#include "srlab/mapping_space.hpp"

namespace srlab {

/// A fully wired testbed: a surjective submersion in adapted charts together
/// with all derived structure (partitions, bundles, sprays, horizontal lift,
/// vertical connection, composite addition) and a reference loop for
/// mapping-space checks. Members point into each other, so a Scenario lives
/// on the heap and is neither copied nor moved.
struct Scenario {
    std::string name;
    std::string description;
    std::string connection_description;

    /// Integrator used to build local additions (sigmaN, sigmaP, the
    /// composite); overridable from the run config.
    IntegratorConfig addition_cfg;

    std::unique_ptr<HopfFibration> hopf;
    std::unique_ptr<ChartedManifold> P_own, N_own;
    const ChartedManifold* P = nullptr;
    const ChartedManifold* N = nullptr;

    SubmersionGeometry geom;
    std::unique_ptr<ChartPartitionOfUnity> puN, puP;
    std::unique_ptr<AnchoredBundle> TN, TP, EH, EV;
    std::unique_ptr<EhresmannConnection> ehr;
    std::unique_ptr<Spray> SN, SH, SV, S_generic;
    std::unique_ptr<LinearConnection> connV;
    std::unique_ptr<CompositeAddition> comp;
    std::unique_ptr<LocalAddition> sigmaP, sigmaN, sigmaP_mismatched;

    /// Reference loop in P for mapping-space checks (period 2 pi).
    std::function<Point(double)> loop;
    double section_radius = 0.2;

    Scenario() = default;
    Scenario(const Scenario&) = delete;
    Scenario& operator=(const Scenario&) = delete;
};

struct ScenarioInfo {
    std::string name;
    std::string description;
};

inline std::vector<ScenarioInfo> scenario_registry() {
    return {
        {"flat_projection",
         "coordinate projection of the plane onto the line; every construction is affine"},
        {"twisted_flat",
         "plane-to-line projection with a sheared horizontal lift and exponentially damped "
         "vertical transport; closed-form composite addition"},
        {"hopf",
         "unit-quaternion circle fibration over the round 2-sphere in fibration-adapted "
         "charts; glued lift, curved base spray"},
    };
}

namespace detail {

/// Local additions get inverted by Newton iteration down to 1e-10 residuals,
/// so the flows they are assembled from run two orders tighter than that;
/// otherwise the iteration stalls on integration noise before reaching its
/// target.
inline IntegratorConfig addition_integrator() {
    IntegratorConfig cfg;
    cfg.atol = 1e-12;
    cfg.rtol = 1e-12;
    return cfg;
}

inline void wire_flat_common(Scenario& s) {
    s.P_own = std::make_unique<ChartedManifold>(euclidean_space(2, "R^2"));
    s.N_own = std::make_unique<ChartedManifold>(euclidean_space(1, "R"));
    s.P = s.P_own.get();
    s.N = s.N_own.get();
    s.geom = SubmersionGeometry{s.P, s.N, {0}, 1};
    s.puN = std::make_unique<ChartPartitionOfUnity>(ChartPartitionOfUnity::radial(s.N, 1e3));
    s.puP = std::make_unique<ChartPartitionOfUnity>(ChartPartitionOfUnity::radial(s.P, 1e3));

    s.TN = std::make_unique<AnchoredBundle>(tangent_anchored_bundle(s.N));
    s.TP = std::make_unique<AnchoredBundle>(tangent_anchored_bundle(s.P));
    auto zeroB1 = [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    s.SN = std::make_unique<Spray>(quadratic_local_spray(s.TN.get(), 0, zeroB1, "line-flat"));
    s.sigmaN = std::make_unique<LocalAddition>(addition_from_spray(*s.SN, s.addition_cfg));

    s.loop = [](double t) { return Point{0, vec_of({std::cos(t), std::sin(t)})}; };
    s.section_radius = 0.5;
}

inline void wire_composite(Scenario& s) {
    s.EH = std::make_unique<AnchoredBundle>(horizontal_bundle(&s.geom, *s.ehr));
    if (!s.EV) s.EV = std::make_unique<AnchoredBundle>(vertical_bundle(&s.geom));
    s.SH = std::make_unique<Spray>(lifted_spray(s.EH.get(), &s.geom, *s.SN));
    s.SV = std::make_unique<Spray>(vertical_spray(s.EV.get()));
    if (!s.connV) {
        int vd = s.geom.v_dim();
        s.connV = std::make_unique<LinearConnection>(LinearConnection{
            s.EV.get(), "vertical-flat",
            [vd](int, const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(vd)); }});
    }
    s.comp = std::make_unique<CompositeAddition>(CompositeAddition{
        &s.geom, *s.ehr, s.EH.get(), s.EV.get(), *s.SH, *s.SV, *s.connV, s.addition_cfg});
    s.sigmaP = std::make_unique<LocalAddition>(s.comp->as_addition());
}

inline std::unique_ptr<Scenario> make_flat_projection(const IntegratorConfig& add_cfg) {
    auto s = std::make_unique<Scenario>();
    s->name = "flat_projection";
    s->description = scenario_registry()[0].description;
    s->connection_description =
        "partition-glued horizontal lift (globally sigma(w) = (w, 0)); flat vertical transport";
    s->addition_cfg = add_cfg;
    wire_flat_common(*s);
    s->ehr = std::make_unique<EhresmannConnection>(&s->geom, *s->puP);
    wire_composite(*s);
    return s;
}

inline std::unique_ptr<Scenario> make_twisted_flat(const IntegratorConfig& add_cfg) {
    auto s = std::make_unique<Scenario>();
    s->name = "twisted_flat";
    s->description = scenario_registry()[1].description;
    s->connection_description =
        "sheared horizontal lift sigma(w) = (w, 0.4 a w) over (a, b); vertical Christoffel "
        "gamma(zdot, w) = a adot w";
    s->addition_cfg = add_cfg;
    wire_flat_common(*s);
    // Sheared lift: horizontal direction over a unit base step at (a, b) is
    // (1, 0.4 a). Vertical transport is damped by the Christoffel form
    // gamma(xdot, w) = a * adot * w.
    s->ehr = std::make_unique<EhresmannConnection>(&s->geom, [](int, const Vec& z) {
        Mat m(2, 1);
        m << 1.0, 0.4 * z[0];
        return m;
    });
    s->EV = std::make_unique<AnchoredBundle>(vertical_bundle(&s->geom));
    s->connV = std::make_unique<LinearConnection>(LinearConnection{
        s->EV.get(), "vertical-damped",
        [](int, const Vec& z, const Vec& zdot, const Vec& w) { return Vec(z[0] * zdot[0] * w); }});
    wire_composite(*s);
    return s;
}

inline std::unique_ptr<Scenario> make_hopf(const IntegratorConfig& add_cfg) {
    auto s = std::make_unique<Scenario>();
    s->name = "hopf";
    s->description = scenario_registry()[2].description;
    s->connection_description =
        "partition-glued Ehresmann lift of the round-sphere spray across four "
        "fibration-adapted charts; flat vertical transport on the phase fibre";
    s->addition_cfg = add_cfg;
    s->hopf = std::make_unique<HopfFibration>();
    s->P = &s->hopf->total();
    s->N = &s->hopf->base();
    s->geom = SubmersionGeometry{s->P, s->N, {0, 0, 1, 1}, 2};
    s->puN = std::make_unique<ChartPartitionOfUnity>(ChartPartitionOfUnity::radial(s->N, 3.0));
    s->puP = std::make_unique<ChartPartitionOfUnity>(ChartPartitionOfUnity::radial(s->P, 4.0));

    s->TN = std::make_unique<AnchoredBundle>(tangent_anchored_bundle(s->N));
    s->TP = std::make_unique<AnchoredBundle>(tangent_anchored_bundle(s->P));
    auto round_B = [](const Vec& x, const Vec& v, const Vec& w) {
        double u = 1.0 + x.squaredNorm();
        return Vec((2.0 / u) * (x.dot(v) * w + x.dot(w) * v - v.dot(w) * x));
    };
    s->SN = std::make_unique<Spray>(
        glue_sprays({quadratic_local_spray(s->TN.get(), 0, round_B, "round"),
                     quadratic_local_spray(s->TN.get(), 1, round_B, "round")},
                    *s->puN));
    s->sigmaN = std::make_unique<LocalAddition>(addition_from_spray(*s->SN, s->addition_cfg));

    s->ehr = std::make_unique<EhresmannConnection>(&s->geom, *s->puP);
    wire_composite(*s);

    // Mismatched control: chart-flat sprays on the full tangent bundle,
    // glued; a legitimate local addition on P that ignores the fibration.
    auto flatB3 = [](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(3)); };
    std::vector<Spray> locals;
    for (int c = 0; c < 4; ++c)
        locals.push_back(quadratic_local_spray(s->TP.get(), c, flatB3, "chart-flat"));
    s->S_generic = std::make_unique<Spray>(glue_sprays(locals, *s->puP));
    s->sigmaP_mismatched =
        std::make_unique<LocalAddition>(addition_from_spray(*s->S_generic, s->addition_cfg));

    // Equator-crossing loop with a wobbling phase: exercises all four charts
    // downstream.
    const ChartedManifold* P = s->P;
    s->loop = [P](double t) {
        double r = 1.0 + 0.4 * std::cos(2.0 * t);
        Vec z = vec_of({r * std::cos(t), r * std::sin(t), 0.5 * std::sin(3.0 * t)});
        return P->best_chart(Point{0, z});
    };
    s->section_radius = 0.2;
    return s;
}

}  // namespace detail

inline std::unique_ptr<Scenario> make_scenario(
    const std::string& name, const std::optional<IntegratorConfig>& integrator = std::nullopt) {
    IntegratorConfig add_cfg = integrator ? *integrator : detail::addition_integrator();
    if (name == "flat_projection") return detail::make_flat_projection(add_cfg);
    if (name == "twisted_flat") return detail::make_twisted_flat(add_cfg);
    if (name == "hopf") return detail::make_hopf(add_cfg);
    throw Error(ErrorCode::UnknownScenario, "no scenario named '" + name + "'");
}

}  // namespace srlab
