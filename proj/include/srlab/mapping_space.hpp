#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "srlab/submersion.hpp"

namespace srlab {

/// Uniform parameter samples of a compact 1-dimensional source: a circle
/// (t_n identified with t_0, so n distinct nodes) or a closed interval
/// (n nodes including both endpoints).
struct SourceGrid {
    enum class Topology { Circle, Interval };

    Topology topology = Topology::Circle;
    int n = 8;
    double t0 = 0.0;
    double t1 = 6.283185307179586;

    std::vector<double> nodes() const {
        if (n < 8) throw Error(ErrorCode::BadArgument, "source grid needs n >= 8");
        std::vector<double> ts(static_cast<size_t>(n));
        if (topology == Topology::Circle) {
            for (int k = 0; k < n; ++k) ts[static_cast<size_t>(k)] = t0 + (t1 - t0) * k / n;
        } else {
            for (int k = 0; k < n; ++k) ts[static_cast<size_t>(k)] = t0 + (t1 - t0) * k / (n - 1);
        }
        return ts;
    }
};

/// A map X -> M recorded by its values at the grid nodes. All constructions
/// downstream act node-wise, so no interpolation is attached.
struct DiscretizedMap {
    SourceGrid grid;
    const ChartedManifold* target = nullptr;
    std::vector<Point> values;

    int n_nodes() const { return static_cast<int>(values.size()); }
};

inline DiscretizedMap sample_map(const SourceGrid& grid, const ChartedManifold* M,
                                 const std::function<Point(double)>& f) {
    DiscretizedMap out;
    out.grid = grid;
    out.target = M;
    for (double t : grid.nodes()) out.values.push_back(f(t));
    return out;
}

/// Resolution adequacy: adjacent node values must share a chart, otherwise
/// the grid is too coarse to see the map as continuous.
inline bool check_resolution(const DiscretizedMap& f) {
    int n = f.n_nodes();
    int last = (f.grid.topology == SourceGrid::Topology::Circle) ? n : n - 1;
    for (int k = 0; k < last; ++k) {
        const Point& a = f.values[static_cast<size_t>(k)];
        const Point& b = f.values[static_cast<size_t>((k + 1) % n)];
        if (!f.target->try_transition(b, a.chart) && !f.target->try_transition(a, b.chart))
            return false;
    }
    return true;
}

/// A section of the pullback f*TM: one tangent vector per node, based at the
/// node value and stored in that value's chart.
struct PullbackSection {
    const DiscretizedMap* base = nullptr;
    std::vector<Vec> vectors;

    TangentVec at(int k) const {
        return {base->values[static_cast<size_t>(k)], vectors[static_cast<size_t>(k)]};
    }
};

inline PullbackSection zero_section(const DiscretizedMap& f) {
    PullbackSection s;
    s.base = &f;
    s.vectors.assign(static_cast<size_t>(f.n_nodes()), Vec::Zero(f.target->dim()));
    return s;
}

inline PullbackSection random_section(const DiscretizedMap& f, Rng& rng, double radius) {
    PullbackSection s;
    s.base = &f;
    for (int k = 0; k < f.n_nodes(); ++k) s.vectors.push_back(rng.in_ball(f.target->dim(), radius));
    return s;
}

/// a*s + b*t over the same base map (node-wise in the shared charts).
inline PullbackSection combine(double a, const PullbackSection& s, double b,
                               const PullbackSection& t) {
    if (s.base != t.base)
        throw Error(ErrorCode::BadArgument, "combining sections over different base maps");
    PullbackSection r;
    r.base = s.base;
    for (size_t k = 0; k < s.vectors.size(); ++k) r.vectors.push_back(a * s.vectors[k] + b * t.vectors[k]);
    return r;
}

inline double section_distance(const PullbackSection& s, const PullbackSection& t) {
    double worst = 0.0;
    for (size_t k = 0; k < s.vectors.size(); ++k)
        worst = std::max(worst, (s.vectors[k] - t.vectors[k]).norm());
    return worst;
}

/// Newton configuration for inverting a local addition in a fibre.
struct NewtonConfig {
    double tol = 1e-10;
    int max_iters = 50;
    double fd_h = 1e-6;
};

/// Canonical chart of the mapping space centered at f: sections of f*TM are
/// mapped to nearby maps by applying the local addition node-wise.
struct CanonicalChart {
    const DiscretizedMap* center = nullptr;
    const LocalAddition* addition = nullptr;
    NewtonConfig newton;
};

/// phi_f(tau): node-wise g(t_k) = Sigma(tau_k). A flow leaving its domain at
/// a node aborts with the node index.
inline DiscretizedMap chart_forward(const CanonicalChart& chart, const PullbackSection& tau) {
    const DiscretizedMap& f = *chart.center;
    DiscretizedMap g;
    g.grid = f.grid;
    g.target = f.target;
    for (int k = 0; k < f.n_nodes(); ++k) {
        AdditionResult r = chart.addition->apply(tau.at(k));
        if (r.status != FlowStatus::Complete)
            throw Error(ErrorCode::LeftDomain,
                        "chart_forward: addition left its domain at node " + std::to_string(k));
        g.values.push_back(r.point);
    }
    return g;
}

namespace detail {

/// Damped Newton solve of Sigma(z, tau) = target over the fibre at z.
/// Initial guess 0; steps halve while the residual would increase; the
/// residual is measured in target's chart.
inline std::string fmt_sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

inline Vec invert_addition_at(const LocalAddition& sigma, const Point& z, const Point& target,
                              const NewtonConfig& cfg, int node) {
    const ChartedManifold& M = *sigma.M;
    int d = M.dim();

    auto residual = [&](const Vec& tau) -> std::optional<Vec> {
        AdditionResult r = sigma.apply(TangentVec{z, tau});
        if (r.status != FlowStatus::Complete) return std::nullopt;
        auto q = M.try_transition(r.point, target.chart);
        if (!q) return std::nullopt;
        return Vec(q->x - target.x);
    };

    Vec tau = Vec::Zero(d);
    auto res = residual(tau);
    if (!res)
        throw Error(ErrorCode::OutsideImage,
                    "chart_inverse: center not representable near target at node " +
                        std::to_string(node));
    double rnorm = res->norm();

    for (int it = 0; it < cfg.max_iters; ++it) {
        if (rnorm < cfg.tol) return tau;

        Mat J(d, d);
        double h = cfg.fd_h * (1.0 + tau.norm());
        bool ok = true;
        for (int c = 0; c < d && ok; ++c) {
            auto rp = residual(Vec(tau + h * Vec::Unit(d, c)));
            auto rm = residual(Vec(tau - h * Vec::Unit(d, c)));
            if (!rp || !rm) {
                ok = false;
                break;
            }
            J.col(c) = (*rp - *rm) / (2.0 * h);
        }
        if (!ok)
            throw Error(ErrorCode::OutsideImage,
                        "chart_inverse: Jacobian probe left the domain at node " +
                            std::to_string(node));

        Vec step = J.partialPivLu().solve(-*res);
        double lambda = 1.0;
        for (int halvings = 0; halvings < 12; ++halvings) {
            auto rn = residual(Vec(tau + lambda * step));
            if (rn && rn->norm() < rnorm) {
                tau += lambda * step;
                res = rn;
                rnorm = rn->norm();
                break;
            }
            lambda *= 0.5;
            if (halvings == 11)
                throw Error(ErrorCode::NewtonDiverged,
                            "chart_inverse: damping stalled at node " + std::to_string(node) +
                                ", residual " + fmt_sci(rnorm));
        }
    }
    if (rnorm < cfg.tol) return tau;
    throw Error(ErrorCode::NewtonDiverged, "chart_inverse: no convergence at node " +
                                               std::to_string(node) + ", residual " +
                                               fmt_sci(rnorm));
}

}  // namespace detail

/// phi_f^{-1}(g): node-wise inversion of the local addition over the fibre at
/// f(t_k), by damped Newton from the zero section.
inline PullbackSection chart_inverse(const CanonicalChart& chart, const DiscretizedMap& g) {
    const DiscretizedMap& f = *chart.center;
    if (g.n_nodes() != f.n_nodes())
        throw Error(ErrorCode::BadArgument, "chart_inverse: node counts differ");
    PullbackSection tau;
    tau.base = chart.center;
    for (int k = 0; k < f.n_nodes(); ++k)
        tau.vectors.push_back(detail::invert_addition_at(*chart.addition,
                                                         f.values[static_cast<size_t>(k)],
                                                         g.values[static_cast<size_t>(k)],
                                                         chart.newton, k));
    return tau;
}

/// p_*(f) = p o f, node-wise.
inline DiscretizedMap pushforward(const SmoothMap& p, const DiscretizedMap& f) {
    DiscretizedMap g;
    g.grid = f.grid;
    g.target = &p.target();
    for (const Point& z : f.values) g.values.push_back(p.eval(z));
    return g;
}

/// Node-wise splitting of a section of f*TP into vertical and horizontal
/// parts through the horizontal-lift projectors. The parts sum back to the
/// input exactly; the horizontal part projects onto T p of the input and the
/// vertical part is annihilated by T p.
inline std::pair<PullbackSection, PullbackSection> split_section(const EhresmannConnection& ehr,
                                                                 const PullbackSection& tau) {
    PullbackSection tv, th;
    tv.base = th.base = tau.base;
    for (size_t k = 0; k < tau.vectors.size(); ++k) {
        const Point& z = tau.base->values[k];
        Mat H = ehr.horizontal_projector(z.chart, z.x);
        Vec h = H * tau.vectors[k];
        th.vectors.push_back(h);
        tv.vectors.push_back(Vec(tau.vectors[k] - h));
    }
    return {tv, th};
}

/// I_f: sections of (p o f)*TN -> sections of f*TP, node-wise the horizontal
/// lift sigma at f(t_k). T p o I_f = id holds exactly in adapted charts.
inline PullbackSection right_inverse_I_f(const EhresmannConnection& ehr, const DiscretizedMap& f,
                                         const PullbackSection& eta) {
    const SubmersionGeometry& g = ehr.geometry();
    PullbackSection lifted;
    lifted.base = &f;
    for (size_t k = 0; k < eta.vectors.size(); ++k) {
        const Point& z = f.values[k];
        int bc = g.base_chart[static_cast<size_t>(z.chart)];
        // Express eta_k in the chart underlying z before lifting.
        TangentVec e = g.N->conjugate_tangent(eta.at(static_cast<int>(k)), bc);
        lifted.vectors.push_back(Vec(ehr.sigma_block(z.chart, z.x) * e.v));
    }
    return lifted;
}

/// Node-wise T p applied to a section of f*TP, expressed over the given
/// pushforward map pf = p o f (vectors re-expressed into pf's charts).
inline PullbackSection pushforward_section(const SubmersionGeometry& g, const DiscretizedMap& pf,
                                           const PullbackSection& tau) {
    PullbackSection eta;
    eta.base = &pf;
    for (size_t k = 0; k < tau.vectors.size(); ++k) {
        const Point& z = tau.base->values[k];
        int bc = g.base_chart[static_cast<size_t>(z.chart)];
        TangentVec down{Point{bc, Vec(z.x.head(g.n_dim))}, Vec(tau.vectors[k].head(g.n_dim))};
        eta.vectors.push_back(g.N->conjugate_tangent(down, pf.values[k].chart).v);
    }
    return eta;
}

/// The chart representation of the pushforward between canonical charts:
/// LHS(tau) = phi^{-1}_{p o f} ( p_* ( phi_f (tau) ) ), as a section over pf.
inline PullbackSection chart_representation(const SmoothMap& p, const CanonicalChart& chartM,
                                            const CanonicalChart& chartN,
                                            const PullbackSection& tau) {
    DiscretizedMap g = chart_forward(chartM, tau);
    DiscretizedMap pg = pushforward(p, g);
    return chart_inverse(chartN, pg);
}

/// Numerical witness that the canonical charts built from the matched pair
/// (Sigma_P, Sigma_N) are submersion charts: the chart representation of p_*
/// equals node-wise T p, is linear, and I_f composes with it to the identity.
struct MappingChartCheckResult {
    double max_residual = 0.0;     // LHS(tau) vs node-wise Tp(tau)
    double linearity = 0.0;        // LHS(a tau + b tau') vs a LHS(tau) + b LHS(tau')
    double right_inverse = 0.0;    // LHS(I_f(eta)) vs eta
    int n_sections = 0;
    int n_nodes = 0;
};

inline MappingChartCheckResult submersion_chart_check(const SubmersionGeometry& geom,
                                                      const EhresmannConnection& ehr,
                                                      const SmoothMap& p,
                                                      const CanonicalChart& chartM,
                                                      const CanonicalChart& chartN,
                                                      Rng& rng, int n_sections,
                                                      double section_radius) {
    MappingChartCheckResult out;
    const DiscretizedMap& f = *chartM.center;
    const DiscretizedMap& pf = *chartN.center;
    out.n_nodes = f.n_nodes();

    for (int s = 0; s < n_sections; ++s) {
        PullbackSection tau = random_section(f, rng, section_radius);
        PullbackSection tau2 = random_section(f, rng, section_radius);

        PullbackSection lhs = chart_representation(p, chartM, chartN, tau);
        PullbackSection rhs = pushforward_section(geom, pf, tau);
        out.max_residual = std::max(out.max_residual, section_distance(lhs, rhs));

        // Linearity of the representation (coefficients keep the combination
        // inside the sampled radius).
        double a = 0.4, b = -0.55;
        PullbackSection lhs2 = chart_representation(p, chartM, chartN, tau2);
        PullbackSection mixed = chart_representation(p, chartM, chartN, combine(a, tau, b, tau2));
        out.linearity =
            std::max(out.linearity, section_distance(mixed, combine(a, lhs, b, lhs2)));

        // Right inverse through the full pipeline.
        PullbackSection eta = random_section(pf, rng, section_radius);
        PullbackSection back = chart_representation(p, chartM, chartN,
                                                    right_inverse_I_f(ehr, f, eta));
        double ri = 0.0;
        for (size_t k = 0; k < eta.vectors.size(); ++k) {
            TangentVec want = eta.at(static_cast<int>(k));
            TangentVec got = back.at(static_cast<int>(k));
            ri = std::max(ri, (geom.N->conjugate_tangent(got, want.base.chart).v - want.v).norm());
        }
        out.right_inverse = std::max(out.right_inverse, ri);

        ++out.n_sections;
    }
    return out;
}

/// CSV export: node index, parameter, chart id, coordinates. Written at full
/// double precision so a read_map_csv round trip reproduces the map exactly.
inline void write_csv(const DiscretizedMap& f, std::ostream& os) {
    auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "node,t,chart";
    for (int i = 0; i < f.target->dim(); ++i) os << ",x" << i;
    os << "\n";
    std::vector<double> ts = f.grid.nodes();
    for (int k = 0; k < f.n_nodes(); ++k) {
        const Point& p = f.values[static_cast<size_t>(k)];
        os << k << "," << ts[static_cast<size_t>(k)] << "," << p.chart;
        for (int i = 0; i < p.x.size(); ++i) os << "," << p.x[i];
        os << "\n";
    }
    os.precision(old_precision);
}

inline void write_csv(const PullbackSection& s, std::ostream& os) {
    auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    const DiscretizedMap& f = *s.base;
    os << "node,t,chart";
    for (int i = 0; i < f.target->dim(); ++i) os << ",v" << i;
    os << "\n";
    std::vector<double> ts = f.grid.nodes();
    for (int k = 0; k < f.n_nodes(); ++k) {
        os << k << "," << ts[static_cast<size_t>(k)] << ","
           << f.values[static_cast<size_t>(k)].chart;
        const Vec& v = s.vectors[static_cast<size_t>(k)];
        for (int i = 0; i < v.size(); ++i) os << "," << v[i];
        os << "\n";
    }
    os.precision(old_precision);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double csv_num(const std::string& s, int line_no) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::BadArgument,
                    "csv line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    }
}

/// Node rows of an exported map or section: (node, t, chart, dim trailing
/// numbers). Validates the running node index, chart range, and column count.
inline std::vector<std::tuple<double, int, Vec>> read_csv_rows(std::istream& is,
                                                               const ChartedManifold& M) {
    std::string line;
    if (!std::getline(is, line) || split_fields(line).size() < 4)
        throw Error(ErrorCode::BadArgument, "csv: missing header row");
    size_t n_cols = split_fields(line).size();
    if (static_cast<int>(n_cols) != 3 + M.dim())
        throw Error(ErrorCode::BadArgument, "csv: header has " + std::to_string(n_cols) +
                                                " columns, expected " + std::to_string(3 + M.dim()));
    std::vector<std::tuple<double, int, Vec>> rows;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f = split_fields(line);
        if (f.size() != n_cols)
            throw Error(ErrorCode::BadArgument,
                        "csv line " + std::to_string(line_no) + ": wrong field count");
        if (csv_num(f[0], line_no) != static_cast<double>(rows.size()))
            throw Error(ErrorCode::BadArgument,
                        "csv line " + std::to_string(line_no) + ": node index out of order");
        double t = csv_num(f[1], line_no);
        int chart = static_cast<int>(csv_num(f[2], line_no));
        if (chart < 0 || chart >= M.n_charts())
            throw Error(ErrorCode::BadArgument, "csv line " + std::to_string(line_no) +
                                                    ": no chart " + std::to_string(chart));
        Vec x(M.dim());
        for (int i = 0; i < M.dim(); ++i) x[i] = csv_num(f[static_cast<size_t>(3 + i)], line_no);
        rows.push_back({t, chart, x});
    }
    return rows;
}

}  // namespace detail

/// CSV import, inverse to write_csv: rebuilds the uniform grid from the
/// parameter column (given the topology, which the file does not record) and
/// resolves chart ids against M's atlas.
inline DiscretizedMap read_map_csv(std::istream& is, const ChartedManifold* M,
                                   SourceGrid::Topology topology = SourceGrid::Topology::Circle) {
    auto rows = detail::read_csv_rows(is, *M);
    int n = static_cast<int>(rows.size());
    if (n < 8) throw Error(ErrorCode::BadArgument, "csv: source grid needs n >= 8 nodes");
    DiscretizedMap out;
    out.grid.topology = topology;
    out.grid.n = n;
    out.grid.t0 = std::get<0>(rows.front());
    double dt = std::get<0>(rows[1]) - std::get<0>(rows[0]);
    out.grid.t1 =
        out.grid.t0 + dt * ((topology == SourceGrid::Topology::Circle) ? n : n - 1);
    out.target = M;
    std::vector<double> ts = out.grid.nodes();
    for (int k = 0; k < n; ++k) {
        auto& [t, chart, x] = rows[static_cast<size_t>(k)];
        if (std::abs(t - ts[static_cast<size_t>(k)]) > 1e-9 * (1.0 + std::abs(t)))
            throw Error(ErrorCode::BadArgument,
                        "csv: node parameters are not a uniform grid at node " + std::to_string(k));
        out.values.push_back(Point{chart, x});
    }
    return out;
}

/// CSV import of a section over a known base map; every row's chart must match
/// the base value's chart, which is where the exported components live.
inline PullbackSection read_section_csv(std::istream& is, const DiscretizedMap& f) {
    auto rows = detail::read_csv_rows(is, *f.target);
    if (static_cast<int>(rows.size()) != f.n_nodes())
        throw Error(ErrorCode::BadArgument,
                    "csv: section has " + std::to_string(rows.size()) + " nodes, base map has " +
                        std::to_string(f.n_nodes()));
    PullbackSection s;
    s.base = &f;
    for (int k = 0; k < f.n_nodes(); ++k) {
        auto& [t, chart, v] = rows[static_cast<size_t>(k)];
        (void)t;
        if (chart != f.values[static_cast<size_t>(k)].chart)
            throw Error(ErrorCode::BadArgument,
                        "csv: section chart differs from the base map at node " +
                            std::to_string(k));
        s.vectors.push_back(v);
    }
    return s;
}

}  // namespace srlab
