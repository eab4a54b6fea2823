#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srlab/report.hpp"
#include "srlab/scenario.hpp"

namespace srlab {

/// Everything a check sees: the wired scenario, a deterministic stream seeded
/// per (run seed, check name), the grid size, tolerance overrides keyed by
/// entry name, and an optional directory for plot-data CSVs.
struct CheckContext {
    const Scenario& sc;
    Rng rng;
    int grid_n;
    const std::map<std::string, double>* tol_overrides = nullptr;
    std::string trace_dir;

    double tol(const std::string& entry, double fallback) const {
        if (tol_overrides) {
            auto it = tol_overrides->find(entry);
            if (it != tol_overrides->end()) return it->second;
        }
        return fallback;
    }

    std::optional<std::string> trace_path(const std::string& file) const {
        if (trace_dir.empty()) return std::nullopt;
        return trace_dir + "/" + sc.name + "_" + file;
    }
};

struct CheckDef {
    std::string name;
    std::string anchor;
    std::string description;
    std::vector<std::string> deps;
    std::vector<std::string> scenarios;  // empty: applicable everywhere
    std::function<std::vector<ReportEntry>(CheckContext&)> run;

    bool applicable_to(const std::string& scenario) const {
        return scenarios.empty() ||
               std::find(scenarios.begin(), scenarios.end(), scenario) != scenarios.end();
    }
};

namespace checks_detail {

inline ReportEntry upper(CheckContext& ctx, const std::string& name, const std::string& anchor,
                         int n, double stat, double def_tol, const std::string& note = "") {
    ReportEntry e;
    e.check = name;
    e.anchor = anchor;
    e.n_samples = n;
    e.max_residual = stat;
    e.tolerance = ctx.tol(name, def_tol);
    e.pass = stat < e.tolerance;
    e.note = note;
    return e;
}

inline ReportEntry lower(CheckContext& ctx, const std::string& name, const std::string& anchor,
                         int n, double stat, double def_tol, const std::string& note = "") {
    ReportEntry e;
    e.check = name;
    e.anchor = anchor;
    e.n_samples = n;
    e.max_residual = stat;
    e.tolerance = ctx.tol(name, def_tol);
    e.pass = stat > e.tolerance;
    e.note = note.empty() ? "pass requires the statistic to exceed the tolerance" : note;
    return e;
}

/// Closed-form curve in the base manifold for transport checks: a latitude
/// circle for the sphere base, a cosine sweep for the line.
inline CurveOnManifold base_test_curve(const Scenario& sc) {
    const ChartedManifold* N = sc.N;
    if (sc.N->dim() == 2) {
        double r0 = 0.9;
        return CurveOnManifold::closed_form(
            N,
            [r0](double t) { return Point{0, vec_of({r0 * std::cos(t), r0 * std::sin(t)})}; },
            [r0](double t) {
                return TangentVec{Point{0, vec_of({r0 * std::cos(t), r0 * std::sin(t)})},
                                  vec_of({-r0 * std::sin(t), r0 * std::cos(t)})};
            });
    }
    return CurveOnManifold::closed_form(
        N, [](double t) { return Point{0, vec_of({std::cos(t)})}; },
        [](double t) { return TangentVec{Point{0, vec_of({std::cos(t)})}, vec_of({-std::sin(t)})}; });
}

/// Great-circle reference on the round 2-sphere: embed, rotate, project back.
inline Point great_circle_reference(const ChartedManifold& S2, const Point& m, const Vec& w,
                                    double t) {
    Vec p = sphere_chart_embedding(2, m.chart).eval(m.x);
    Vec dp = sphere_chart_embedding(2, m.chart).jet1(m.x, w);
    double s = dp.norm();
    Vec q = (s < 1e-15) ? p : Vec(std::cos(s * t) * p + (std::sin(s * t) / s) * dp);
    Point c0{0, sphere_chart_projection(2, 0).eval(q)};
    return S2.best_chart(c0);
}

inline DiscretizedMap scenario_loop(const Scenario& sc, int n) {
    SourceGrid grid;
    grid.topology = SourceGrid::Topology::Circle;
    grid.n = n;
    return sample_map(grid, sc.P, sc.loop);
}

/// The canonical charts hold pointers to their center maps, so the maps live
/// on the heap to keep addresses stable across the factory return.
struct MappingPipeline {
    std::unique_ptr<DiscretizedMap> f, pf;
    SmoothMap proj;
    CanonicalChart chartM, chartN;
};

inline MappingPipeline make_pipeline(const Scenario& sc, int n, const LocalAddition* sigmaP) {
    MappingPipeline mp;
    mp.f = std::make_unique<DiscretizedMap>(scenario_loop(sc, n));
    mp.proj = sc.geom.projection();
    mp.pf = std::make_unique<DiscretizedMap>(pushforward(mp.proj, *mp.f));
    mp.chartM = CanonicalChart{mp.f.get(), sigmaP, {}};
    mp.chartN = CanonicalChart{mp.pf.get(), sc.sigmaN.get(), {}};
    return mp;
}

}  // namespace checks_detail

inline const std::vector<CheckDef>& check_registry() {
    using namespace checks_detail;
    static const std::vector<CheckDef> defs = [] {
        std::vector<CheckDef> v;

        v.push_back(CheckDef{
            "atlas", "k_j . k_i^{-1} are mutually inverse and cocyclic on overlaps",
            "chart round trips and triple-transition consistency on both manifolds",
            {}, {},
            [](CheckContext& ctx) {
                AtlasCheckResult rp = check_atlas(*ctx.sc.P, ctx.rng, 200);
                AtlasCheckResult rn = check_atlas(*ctx.sc.N, ctx.rng, 200);
                double stat = std::max({rp.roundtrip, rp.cocycle, rn.roundtrip, rn.cocycle});
                return std::vector<ReportEntry>{
                    upper(ctx, "atlas", "k_j . k_i^{-1} are mutually inverse and cocyclic on overlaps",
                          rp.n_samples + rn.n_samples, stat, 1e-10)};
            }});

        v.push_back(CheckDef{
            "partition", "sum_a h_a = 1 with h_a >= 0 and supp h_a inside chart a",
            "partition-of-unity normalization and support discipline on both manifolds",
            {"atlas"}, {},
            [](CheckContext& ctx) {
                PartitionCheckResult rp = check_partition(*ctx.sc.puP, ctx.rng, 150);
                PartitionCheckResult rn = check_partition(*ctx.sc.puN, ctx.rng, 150);
                double stat = std::max({rp.sum_residual, rp.support_violation, rn.sum_residual,
                                        rn.support_violation});
                return std::vector<ReportEntry>{
                    upper(ctx, "partition", "sum_a h_a = 1 with h_a >= 0 and supp h_a inside chart a",
                          300, stat, 1e-12)};
            }});

        v.push_back(CheckDef{
            "bundles", "the anchor rho: E -> TM is fibrewise linear and chart-covariant",
            "anchored-bundle axioms for the tangent, horizontal, and vertical bundles",
            {"atlas"}, {},
            [](CheckContext& ctx) {
                double stat = 0.0;
                int n = 0;
                for (const AnchoredBundle* E :
                     {ctx.sc.TN.get(), ctx.sc.TP.get(), ctx.sc.EH.get(), ctx.sc.EV.get()}) {
                    if (!E) continue;
                    BundleCheckResult r = check_bundle(*E, ctx.rng, 100);
                    stat = std::max({stat, r.anchor_linearity, r.projection_match,
                                     r.anchor_covariance});
                    n += 100;
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "bundles",
                          "the anchor rho: E -> TM is fibrewise linear and chart-covariant", n,
                          stat, 1e-8)};
            }});

        v.push_back(CheckDef{
            "spray_axioms",
            "(S1) section over E; (S2) T pi . S = rho; (S3) quadratic fibre homogeneity",
            "spray axioms for the base, lifted, vertical, and conjugated sprays",
            {"bundles", "partition"}, {},
            [](CheckContext& ctx) {
                double stat = 0.0;
                int n = 0;
                for (const Spray* S : {ctx.sc.SN.get(), ctx.sc.SH.get(), ctx.sc.SV.get()}) {
                    SprayAxiomResult r = check_spray_axioms(*S, ctx.rng, 60);
                    stat = std::max({stat, r.s1, r.s2, r.s3});
                    n += r.n_samples;
                }
                // Conjugation by the constant automorphism 2I onto a copy of
                // the tangent bundle with a halved anchor.
                AnchoredBundle half = *ctx.sc.TN;
                half.name += ":half";
                auto base_anchor = ctx.sc.TN->anchor_block;
                half.anchor_block = [base_anchor](int c, const Vec& x) {
                    return Mat(0.5 * base_anchor(c, x));
                };
                int d = ctx.sc.N->dim();
                Spray conj = conjugate_spray(
                    &half, [d](int, const Vec&) { return Mat(2.0 * Mat::Identity(d, d)); },
                    [d](int, const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); },
                    *ctx.sc.SN);
                SprayAxiomResult rc = check_spray_axioms(conj, ctx.rng, 60);
                stat = std::max({stat, rc.s1, rc.s2, rc.s3});
                n += rc.n_samples;
                return std::vector<ReportEntry>{
                    upper(ctx, "spray_axioms",
                          "(S1) section over E; (S2) T pi . S = rho; (S3) quadratic fibre homogeneity",
                          n, stat, 1e-9)};
            }});

        v.push_back(CheckDef{
            "flow_homogeneity", "pi Fl_s(t v) = pi Fl_{st}(v)",
            "flow reparametrization under fibre scaling for base and lifted sprays",
            {"spray_axioms"}, {},
            [](CheckContext& ctx) {
                // The identity is exact for the mathematical flow; integrate
                // well below the reporting tolerance so the statistic measures
                // the geometry rather than accumulated stepper error.
                IntegratorConfig tight;
                tight.atol = tight.rtol = 1e-12;
                HomogeneityResult rn = flow_homogeneity_check(*ctx.sc.SN, ctx.rng, 50, tight);
                HomogeneityResult rh = flow_homogeneity_check(*ctx.sc.SH, ctx.rng, 50, tight);
                double stat = std::max(rn.max_residual, rh.max_residual);
                std::string note = "complete flows: " +
                                   std::to_string(rn.n_complete + rh.n_complete) + "/100";
                return std::vector<ReportEntry>{upper(ctx, "flow_homogeneity",
                                                      "pi Fl_s(t v) = pi Fl_{st}(v)",
                                                      rn.n_samples + rh.n_samples, stat, 1e-8,
                                                      note)};
            }});

        v.push_back(CheckDef{
            "anchored_path", "d/dt pi(c(t)) = rho(c(t)) along integral curves",
            "anchor image of a spray trajectory equals its base velocity (finite differences)",
            {"spray_axioms"}, {},
            [](CheckContext& ctx) {
                IntegratorConfig tc;
                tc.method = OdeMethod::Rk4Fixed;
                tc.h = 1e-3;
                tc.record_trace = true;
                double stat = 0.0;
                int nd = ctx.sc.N->dim();
                for (int i = 0; i < 5; ++i) {
                    Point m = ctx.sc.N->sample_point(ctx.rng);
                    Point e = ctx.sc.TN->point(m.chart, m.x, ctx.rng.in_ball(nd, 1.0));
                    FlowResult r = flow(ctx.sc.SN->field(), e, 0.8, tc);
                    if (r.status != FlowStatus::Complete) continue;
                    stat = std::max(stat, anchored_path_defect(r.trace, *ctx.sc.TN));
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "anchored_path", "d/dt pi(c(t)) = rho(c(t)) along integral curves",
                          5, stat, 1e-6)};
            }});

        v.push_back(CheckDef{
            "fibre_derivative", "d/dh|_0 exp_S(h w) = rho(w)",
            "fibre derivative of the spray exponential at zero equals the anchor",
            {"spray_axioms"}, {},
            [](CheckContext& ctx) {
                double stat = 0.0;
                int n = 0;
                for (int i = 0; i < 3; ++i) {
                    Point m = ctx.sc.N->sample_point(ctx.rng);
                    FibreDerivativeResult r = fibre_derivative_check(*ctx.sc.SN, m, ctx.rng, 8);
                    stat = std::max(stat, r.max_residual);
                    n += r.n_samples;
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "fibre_derivative", "d/dh|_0 exp_S(h w) = rho(w)", n, stat, 1e-5)};
            }});

        v.push_back(CheckDef{
            "transport", "w' + Gamma(c')(w) = 0 transports linearly and invertibly",
            "parallel-transport linearity and forward-backward round trips",
            {"spray_axioms"}, {},
            [](CheckContext& ctx) {
                LinearConnection conn = connection_from_spray(*ctx.sc.SN);
                CurveOnManifold c = base_test_curve(ctx.sc);
                double rt = transport_roundtrip_defect(conn, c, 0.0, 2.2);
                double lin = transport_linearity_defect(conn, c, 0.0, 2.2, ctx.rng, 10);
                return std::vector<ReportEntry>{
                    upper(ctx, "transport", "w' + Gamma(c')(w) = 0 transports linearly and invertibly",
                          11, std::max(rt, lin), 1e-8)};
            }});

        v.push_back(CheckDef{
            "holonomy", "latitude holonomy is rotation by 2 pi cos(theta)",
            "round-sphere latitude transport against the closed-form rotation angle",
            {"transport"}, {"hopf"},
            [](CheckContext& ctx) {
                LinearConnection conn = connection_from_spray(*ctx.sc.SN);
                auto circle = [&](double r0) {
                    return CurveOnManifold::closed_form(
                        ctx.sc.N,
                        [r0](double t) {
                            return Point{0, vec_of({r0 * std::cos(t), r0 * std::sin(t)})};
                        },
                        [r0](double t) {
                            return TangentVec{
                                Point{0, vec_of({r0 * std::cos(t), r0 * std::sin(t)})},
                                vec_of({-r0 * std::sin(t), r0 * std::cos(t)})};
                        });
                };
                double two_pi = 6.283185307179586;
                // Chart radius r0 sits at height cos(theta) = (1-r0^2)/(1+r0^2).
                TransportOperator half = parallel_transport(conn, circle(0.5), 0.0, two_pi);
                double want = 2.0 * std::cos(two_pi * (1.0 - 0.25) / (1.0 + 0.25));
                double stat = std::abs(half.P.trace() - want);
                stat = std::max(stat,
                                (half.P.transpose() * half.P - Mat::Identity(2, 2)).norm());
                TransportOperator eq = parallel_transport(conn, circle(1.0), 0.0, two_pi);
                stat = std::max(stat, (eq.P - Mat::Identity(2, 2)).norm());
                return std::vector<ReportEntry>{
                    upper(ctx, "holonomy", "latitude holonomy is rotation by 2 pi cos(theta)", 2,
                          stat, 1e-6)};
            }});

        v.push_back(CheckDef{
            "ehresmann", "T p . sigma_H = id; sigma_H chart-covariant; projectors idempotent",
            "horizontal-lift section property and projector algebra",
            {"atlas"}, {},
            [](CheckContext& ctx) {
                EhresmannCheckResult r = check_ehresmann(*ctx.sc.ehr, ctx.rng, 120);
                double stat = std::max({r.right_inverse, r.covariance, r.idempotent,
                                        r.vertical_image});
                return std::vector<ReportEntry>{
                    upper(ctx, "ehresmann",
                          "T p . sigma_H = id; sigma_H chart-covariant; projectors idempotent",
                          r.n_samples, stat, 1e-9)};
            }});

        v.push_back(CheckDef{
            "ehresmann_span", "[sigma_H | iota_V] spans T P at every sample",
            "smallest singular value of the combined horizontal/vertical frame",
            {"ehresmann"}, {},
            [](CheckContext& ctx) {
                double worst = std::numeric_limits<double>::infinity();
                for (int i = 0; i < 120; ++i) {
                    Point z = ctx.sc.P->sample_point(ctx.rng);
                    Mat frame(ctx.sc.P->dim(), ctx.sc.P->dim());
                    frame.leftCols(ctx.sc.geom.n_dim) = ctx.sc.ehr->sigma_block(z.chart, z.x);
                    frame.rightCols(ctx.sc.geom.v_dim()) =
                        ctx.sc.geom.vertical_basis(z.chart, z.x);
                    worst = std::min(worst, min_singular_value(frame));
                }
                return std::vector<ReportEntry>{
                    lower(ctx, "ehresmann_span", "[sigma_H | iota_V] spans T P at every sample",
                          120, worst, 1e-6)};
            }});

        v.push_back(CheckDef{
            "spray_lift", "p . exp_{S_H} = exp_{S_N} . T p on horizontal data",
            "horizontal trajectories cover base geodesics",
            {"ehresmann", "spray_axioms"}, {},
            [](CheckContext& ctx) {
                SmoothMap proj = ctx.sc.geom.projection();
                double stat = 0.0;
                int complete = 0, n = 100;
                for (int i = 0; i < n; ++i) {
                    Point z = ctx.sc.P->sample_point(ctx.rng);
                    Vec eta = ctx.rng.in_ball(ctx.sc.geom.n_dim, 1.0);
                    auto up = spray_exponential(*ctx.sc.SH,
                                                ctx.sc.EH->point(z.chart, z.x, eta));
                    int bc = ctx.sc.geom.base_chart[static_cast<size_t>(z.chart)];
                    auto down = spray_exponential(
                        *ctx.sc.SN, ctx.sc.TN->point(bc, Vec(z.x.head(ctx.sc.geom.n_dim)), eta));
                    if (up.status != FlowStatus::Complete || down.status != FlowStatus::Complete)
                        continue;
                    ++complete;
                    stat = std::max(stat, ctx.sc.N->distance(proj.eval(up.point), down.point));
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "spray_lift", "p . exp_{S_H} = exp_{S_N} . T p on horizontal data",
                          n, stat, 1e-7,
                          "complete flows: " + std::to_string(complete) + "/" +
                              std::to_string(n))};
            }});

        v.push_back(CheckDef{
            "vertical_fibre", "p . Fl^{S_V}_t = p",
            "vertical-spray trajectories stay inside the fibres of p",
            {"ehresmann"}, {},
            [](CheckContext& ctx) {
                SmoothMap proj = ctx.sc.geom.projection();
                double stat = 0.0;
                int n = 60;
                for (int i = 0; i < n; ++i) {
                    Point z = ctx.sc.P->sample_point(ctx.rng);
                    Vec xi = ctx.rng.in_ball(ctx.sc.geom.v_dim(), 2.0);
                    auto r = spray_exponential(*ctx.sc.SV, ctx.sc.EV->point(z.chart, z.x, xi));
                    if (r.status != FlowStatus::Complete) continue;
                    stat = std::max(stat, ctx.sc.N->distance(proj.eval(r.point), proj.eval(z)));
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "vertical_fibre", "p . Fl^{S_V}_t = p", n, stat, 1e-7)};
            }});

        v.push_back(CheckDef{
            "diagram", "p . Sigma_P = Sigma_N . T p",
            "the composite addition projects onto the base addition",
            {"spray_lift", "vertical_fibre", "transport"}, {},
            [](CheckContext& ctx) {
                std::vector<std::pair<double, double>> samples;
                DiagramCheckResult r = diagram_commutativity_check(
                    ctx.sc.geom, *ctx.sc.sigmaP, *ctx.sc.sigmaN, ctx.rng, 200, 1.0, &samples);
                if (auto path = ctx.trace_path("diagram_residuals.csv")) {
                    std::ofstream os(*path);
                    os << "sample_norm,residual\n";
                    for (auto& [nrm, res] : samples) os << nrm << "," << res << "\n";
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "diagram", "p . Sigma_P = Sigma_N . T p", r.n_samples,
                          r.max_residual, 1e-6,
                          "complete: " + std::to_string(r.n_complete) + "/" +
                              std::to_string(r.n_samples))};
            }});

        v.push_back(CheckDef{
            "addition_derivative", "Sigma(0_z) = z and T_0 Sigma|_fibre = id",
            "zero-section identity and identity fibre Jacobian of the composite addition",
            {"diagram"}, {},
            [](CheckContext& ctx) {
                AdditionDerivativeResult r = addition_derivative_check(*ctx.sc.sigmaP, ctx.rng, 25);
                return std::vector<ReportEntry>{
                    upper(ctx, "addition_zero", "Sigma(0_z) = z", r.n_samples, r.zero_residual,
                          1e-9),
                    upper(ctx, "addition_identity", "T_0 Sigma|_fibre = id", r.n_samples,
                          r.identity_residual, 1e-4)};
            }});

        v.push_back(CheckDef{
            "injectivity", "(pi, Sigma_P) stays injective on the probed fibre ball",
            "opposite-ray collision sweep and Jacobian conditioning of the composite addition",
            {"diagram"}, {},
            [](CheckContext& ctx) {
                Point z = ctx.sc.loop(0.0);
                AdditionInjectivityResult r =
                    addition_injectivity_probe(*ctx.sc.sigmaP, z, 1.0, ctx.rng);
                std::string note = "min singular value " + std::to_string(r.min_singular) +
                                   ", flow failures " + std::to_string(r.n_flow_failures) +
                                   "; pass requires the gap to exceed the tolerance";
                return std::vector<ReportEntry>{
                    lower(ctx, "injectivity", "(pi, Sigma_P) stays injective on the probed fibre ball",
                          7, r.min_pair_gap, 1e-3, note)};
            }});

        v.push_back(CheckDef{
            "pushforward", "p_*(f) = p . f node-wise",
            "pushforward of the reference loop: resolution, ambient honesty, functoriality",
            {"atlas"}, {},
            [](CheckContext& ctx) {
                DiscretizedMap f = scenario_loop(ctx.sc, ctx.grid_n);
                SmoothMap proj = ctx.sc.geom.projection();
                DiscretizedMap pf = pushforward(proj, f);
                double stat = check_resolution(f) && check_resolution(pf) ? 0.0 : 1.0;

                if (ctx.sc.hopf) {
                    SmoothCoordMap fib = cm_quat_fibration();
                    for (int k = 0; k < f.n_nodes(); ++k) {
                        const Point& z = f.values[static_cast<size_t>(k)];
                        const Point& y = pf.values[static_cast<size_t>(k)];
                        Vec q = ctx.sc.hopf->embedding(z.chart).eval(z.x);
                        Vec y_amb = fib.eval(q);
                        stat = std::max(stat, std::abs(y_amb.norm() - 1.0));
                        stat = std::max(
                            stat, (sphere_chart_embedding(2, y.chart).eval(y.x) - y_amb).norm());
                    }
                } else {
                    for (int k = 0; k < f.n_nodes(); ++k)
                        stat = std::max(stat, std::abs(pf.values[static_cast<size_t>(k)].x[0] -
                                                       f.values[static_cast<size_t>(k)].x[0]));
                }

                // Functoriality through an identity factor.
                SmoothMap ident(ctx.sc.P, ctx.sc.P);
                int d = ctx.sc.P->dim();
                for (int c = 0; c < ctx.sc.P->n_charts(); ++c)
                    ident.add_rep(c, c, cm_affine(Mat::Identity(d, d), Vec::Zero(d)));
                DiscretizedMap pf2 = pushforward(proj, pushforward(ident, f));
                for (int k = 0; k < f.n_nodes(); ++k)
                    stat = std::max(stat, ctx.sc.N->distance(pf2.values[static_cast<size_t>(k)],
                                                             pf.values[static_cast<size_t>(k)]));

                if (auto path = ctx.trace_path("loop.csv")) {
                    std::ofstream os(*path);
                    write_csv(f, os);
                }
                if (auto path = ctx.trace_path("loop_pushforward.csv")) {
                    std::ofstream os(*path);
                    write_csv(pf, os);
                }
                return std::vector<ReportEntry>{
                    upper(ctx, "pushforward", "p_*(f) = p . f node-wise", f.n_nodes(), stat,
                          1e-10)};
            }});

        v.push_back(CheckDef{
            "chart_roundtrip", "phi_f^{-1} . phi_f = id and phi_f . phi_f^{-1} = id",
            "canonical-chart round trips on sections and on maps, both upstairs and downstairs",
            {"diagram", "pushforward"}, {},
            [](CheckContext& ctx) {
                MappingPipeline mp = make_pipeline(ctx.sc, ctx.grid_n, ctx.sc.sigmaP.get());
                double stat = 0.0;

                PullbackSection eta = random_section(*mp.pf, ctx.rng, ctx.sc.section_radius);
                DiscretizedMap gN = chart_forward(mp.chartN, eta);
                stat = std::max(stat, section_distance(chart_inverse(mp.chartN, gN), eta));

                PullbackSection tau = random_section(*mp.f, ctx.rng, ctx.sc.section_radius);
                DiscretizedMap gM = chart_forward(mp.chartM, tau);
                PullbackSection back = chart_inverse(mp.chartM, gM);
                stat = std::max(stat, section_distance(back, tau));
                DiscretizedMap gM2 = chart_forward(mp.chartM, back);
                for (int k = 0; k < gM.n_nodes(); ++k)
                    stat = std::max(stat,
                                    ctx.sc.P->distance(gM2.values[static_cast<size_t>(k)],
                                                       gM.values[static_cast<size_t>(k)]));
                return std::vector<ReportEntry>{
                    upper(ctx, "chart_roundtrip",
                          "phi_f^{-1} . phi_f = id and phi_f . phi_f^{-1} = id",
                          2 * ctx.grid_n, stat, 1e-8)};
            }});

        v.push_back(CheckDef{
            "submersion_chart", "phi_{p.f}^{-1} . p_* . phi_f = (pi, T p) node-wise",
            "the canonical charts exhibit the pushforward as a linear projection with a right inverse",
            {"chart_roundtrip"}, {},
            [](CheckContext& ctx) {
                MappingPipeline mp = make_pipeline(ctx.sc, ctx.grid_n, ctx.sc.sigmaP.get());
                MappingChartCheckResult r =
                    submersion_chart_check(ctx.sc.geom, *ctx.sc.ehr, mp.proj, mp.chartM,
                                           mp.chartN, ctx.rng, 20, ctx.sc.section_radius);
                std::string note = std::to_string(r.n_sections) + " sections over " +
                                   std::to_string(r.n_nodes) + " nodes";
                return std::vector<ReportEntry>{
                    upper(ctx, "pushforward_chart",
                          "phi_{p.f}^{-1} . p_* . phi_f = (pi, T p) node-wise", r.n_sections,
                          r.max_residual, 1e-5, note),
                    upper(ctx, "pushforward_linearity",
                          "the chart representation of p_* is linear", r.n_sections, r.linearity,
                          1e-5, note),
                    upper(ctx, "pushforward_right_inverse",
                          "(chart rep of p_*) . (I_f)_* = id", r.n_sections, r.right_inverse,
                          1e-5, note)};
            }});

        v.push_back(CheckDef{
            "mismatched_sigma", "a fibration-blind Sigma_P makes the chart representation nonlinear",
            "negative control: the composite construction is necessary, not incidental",
            {"submersion_chart"}, {"hopf"},
            [](CheckContext& ctx) {
                MappingPipeline mp =
                    make_pipeline(ctx.sc, ctx.grid_n, ctx.sc.sigmaP_mismatched.get());
                MappingChartCheckResult r =
                    submersion_chart_check(ctx.sc.geom, *ctx.sc.ehr, mp.proj, mp.chartM,
                                           mp.chartN, ctx.rng, 5, ctx.sc.section_radius);
                ReportEntry fail =
                    upper(ctx, "pushforward_linearity",
                          "the chart representation of p_* is linear", r.n_sections, r.linearity,
                          1e-5, "fails by design under the fibration-blind addition");
                fail.expected_fail = true;
                ReportEntry witness =
                    lower(ctx, "mismatch_witness",
                          "a fibration-blind Sigma_P makes the chart representation nonlinear",
                          r.n_sections, r.linearity, 1e-3);
                return std::vector<ReportEntry>{fail, witness};
            }});

        v.push_back(CheckDef{
            "grid_refinement", "node-wise residuals are grid-size independent",
            "doubling the grid changes the headline residual by less than 2x",
            {"submersion_chart"}, {},
            [](CheckContext& ctx) {
                auto residual_at = [&ctx](int n) {
                    MappingPipeline mp = make_pipeline(ctx.sc, n, ctx.sc.sigmaP.get());
                    Rng rng(ctx.rng.next_u64());
                    MappingChartCheckResult r =
                        submersion_chart_check(ctx.sc.geom, *ctx.sc.ehr, mp.proj, mp.chartM,
                                               mp.chartN, rng, 2, ctx.sc.section_radius);
                    return r.max_residual;
                };
                double coarse = residual_at(std::max(8, ctx.grid_n / 2));
                double fine = residual_at(ctx.grid_n);
                double floor_ = 1e-9;
                double ratio = (std::max(coarse, fine) < floor_)
                                   ? 1.0
                                   : std::max(coarse, fine) / std::max(std::min(coarse, fine),
                                                                       floor_);
                std::string note = "coarse " + std::to_string(coarse) + ", fine " +
                                   std::to_string(fine);
                return std::vector<ReportEntry>{
                    upper(ctx, "grid_refinement", "node-wise residuals are grid-size independent",
                          2, ratio, 2.0, note)};
            }});

        v.push_back(CheckDef{
            "convergence", "fixed-step RK4 converges at order 4",
            "measured convergence order on exponential-growth and great-circle references",
            {}, {},
            [](CheckContext& ctx) {
                std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
                std::vector<double> err_exp, err_geo;

                ChartedManifold line = euclidean_space(1, "R");
                VectorFieldOnManifold growth{
                    &line, [](const Point& p) { return TangentVec{p, p.x}; }};

                ChartedManifold sphere = sphere_stereographic(2, "S^2", 3.0);
                AnchoredBundle TS = tangent_anchored_bundle(&sphere);
                auto round_B = [](const Vec& x, const Vec& vv, const Vec& w) {
                    double u = 1.0 + x.squaredNorm();
                    return Vec((2.0 / u) * (x.dot(vv) * w + x.dot(w) * vv - vv.dot(w) * x));
                };
                ChartPartitionOfUnity pu = ChartPartitionOfUnity::radial(&sphere, 3.0);
                Spray S = glue_sprays({quadratic_local_spray(&TS, 0, round_B),
                                       quadratic_local_spray(&TS, 1, round_B)},
                                      pu);
                Point m{0, vec_of({0.3, -0.2})};
                Vec w0 = vec_of({0.8, 0.3});
                Point want = great_circle_reference(sphere, m, w0, 1.0);

                for (double h : hs) {
                    IntegratorConfig c;
                    c.method = OdeMethod::Rk4Fixed;
                    c.h = h;
                    FlowResult r1 = flow(growth, Point{0, vec_of({1.0})}, 1.0, c);
                    err_exp.push_back(std::abs(r1.end.x[0] - std::exp(1.0)));
                    auto r2 = spray_exponential(S, TS.point(m.chart, m.x, w0), c);
                    err_geo.push_back(sphere.distance(r2.point, want));
                }

                auto slope = [&hs](const std::vector<double>& errs) {
                    // Least-squares slope of log err against log h.
                    double sx = 0, sy = 0, sxx = 0, sxy = 0;
                    int n = static_cast<int>(hs.size());
                    for (int i = 0; i < n; ++i) {
                        double x = std::log(hs[static_cast<size_t>(i)]);
                        double y = std::log(std::max(errs[static_cast<size_t>(i)], 1e-16));
                        sx += x; sy += y; sxx += x * x; sxy += x * y;
                    }
                    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
                };
                double o1 = slope(err_exp), o2 = slope(err_geo);
                if (auto path = ctx.trace_path("convergence.csv")) {
                    std::ofstream os(*path);
                    os << "h,err_exponential,err_geodesic\n";
                    for (size_t i = 0; i < hs.size(); ++i)
                        os << hs[i] << "," << err_exp[i] << "," << err_geo[i] << "\n";
                }
                double stat = std::max(std::abs(o1 - 4.0), std::abs(o2 - 4.0));
                return std::vector<ReportEntry>{
                    upper(ctx, "convergence", "fixed-step RK4 converges at order 4",
                          static_cast<int>(hs.size()), stat, 0.3,
                          "orders " + std::to_string(o1) + " and " + std::to_string(o2))};
            }});

        return v;
    }();
    return defs;
}

}  // namespace srlab
