#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "srlab/chart.hpp"

namespace srlab {

struct VectorFieldOnManifold {
    const ChartedManifold* manifold = nullptr;
    // Returns a tangent vector based at the given point, in the point's chart.
    std::function<TangentVec(const Point&)> eval;
};

enum class OdeMethod { Rk4Fixed, Rk45Adaptive };

struct IntegratorConfig {
    OdeMethod method = OdeMethod::Rk45Adaptive;
    double h = 0.01;          // step size for the fixed method
    double atol = 1e-10;
    double rtol = 1e-10;
    long max_steps = 1000000;
    double chart_switch_margin = 0.1;
    bool record_trace = false;
};

enum class FlowStatus { Complete, LeftDomain, MaxSteps };

inline const char* to_string(FlowStatus s) {
    switch (s) {
        case FlowStatus::Complete: return "Complete";
        case FlowStatus::LeftDomain: return "LeftDomain";
        case FlowStatus::MaxSteps: return "MaxSteps";
    }
    return "?";
}

/// Outcome of integrating a field. Leaving the atlas is a normal outcome
/// (flows live on open domains), reported through status and exit time.
struct FlowResult {
    Point end;
    FlowStatus status = FlowStatus::Complete;
    double t_exit = 0.0;  // time reached; equals the requested time when Complete
    long n_steps = 0;
    std::vector<std::pair<double, Point>> trace;
};

namespace detail {

// Dormand-Prince 5(4) coefficients.
struct Dopri5 {
    static constexpr int stages = 7;
    static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a[7][6] = {
        {0, 0, 0, 0, 0, 0},
        {1.0 / 5, 0, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
        {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static constexpr double b5[7] = {35.0 / 384,       0.0,         500.0 / 1113, 125.0 / 192,
                                     -2187.0 / 6784,   11.0 / 84,   0.0};
    static constexpr double b4[7] = {5179.0 / 57600,   0.0,          7571.0 / 16695, 393.0 / 640,
                                     -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
};

inline bool finite(const Vec& v) { return v.allFinite(); }

// Evaluates one RK stage sweep in a fixed chart. Returns false when a stage
// point leaves the chart domain or the field produces a non-finite value.
inline bool rk_stages(const VectorFieldOnManifold& field, int chart, const Vec& y, double h,
                      std::vector<Vec>& k) {
    const ChartedManifold& M = *field.manifold;
    for (int s = 0; s < Dopri5::stages; ++s) {
        Vec ys = y;
        for (int j = 0; j < s; ++j)
            if (Dopri5::a[s][j] != 0.0) ys += h * Dopri5::a[s][j] * k[static_cast<size_t>(j)];
        if (!finite(ys) || !M.chart(chart).contains(ys)) return false;
        TangentVec f = field.eval(Point{chart, ys});
        if (!finite(f.v)) return false;
        k[static_cast<size_t>(s)] = f.v;
    }
    return true;
}

// Classical fourth-order step used by the fixed-step method. Returns false on
// domain exit or non-finite values; on success writes the updated state.
inline bool rk4_step(const VectorFieldOnManifold& field, int chart, const Vec& y, double h,
                     Vec& out) {
    const ChartedManifold& M = *field.manifold;
    static constexpr double c[4] = {0.0, 0.5, 0.5, 1.0};
    static constexpr double b[4] = {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};
    Vec k_prev;
    Vec acc = Vec::Zero(y.size());
    for (int s = 0; s < 4; ++s) {
        Vec ys = (s == 0) ? y : Vec(y + h * c[s] * k_prev);
        if (!finite(ys) || !M.chart(chart).contains(ys)) return false;
        TangentVec f = field.eval(Point{chart, ys});
        if (!finite(f.v)) return false;
        k_prev = f.v;
        acc += b[s] * k_prev;
    }
    out = y + h * acc;
    return finite(out) && M.chart(chart).contains(out);
}

}  // namespace detail

/// Integrate the field from `start` for time `t_total` (either sign).
/// Stages are evaluated in the current chart; after accepted steps the state
/// migrates to the chart with maximal margin once the current margin drops
/// below the configured threshold.
inline FlowResult flow(const VectorFieldOnManifold& field, const Point& start, double t_total,
                       const IntegratorConfig& cfg = {}) {
    const ChartedManifold& M = *field.manifold;
    FlowResult res;
    res.end = start;
    res.t_exit = 0.0;

    if (!M.contains(start)) {
        res.status = FlowStatus::LeftDomain;
        return res;
    }
    if (cfg.record_trace) res.trace.push_back({0.0, start});
    if (t_total == 0.0) return res;

    double dir = (t_total > 0.0) ? 1.0 : -1.0;
    double T = std::abs(t_total);
    double t = 0.0;
    Point p = start;
    std::vector<Vec> k(detail::Dopri5::stages);
    bool fixed = (cfg.method == OdeMethod::Rk4Fixed);
    double h = fixed ? cfg.h : std::min(0.01 * std::max(1.0, T), T);
    const double h_floor = 1e-14;

    auto maybe_switch = [&](Point& q) {
        if (M.margin(q) < cfg.chart_switch_margin) {
            Point b = M.best_chart(q);
            if (b.chart != q.chart && M.margin(b) > M.margin(q)) q = b;
        }
    };

    while (t < T - 1e-15 * std::max(1.0, T)) {
        if (res.n_steps >= cfg.max_steps) {
            res.status = FlowStatus::MaxSteps;
            res.end = p;
            res.t_exit = t;
            return res;
        }
        double hs = std::min(h, T - t);

        if (fixed) {
            Vec next;
            if (!detail::rk4_step(field, p.chart, p.x, dir * hs, next)) {
                // Try to recover by re-charting before giving up.
                Point b = M.best_chart(p);
                if (b.chart != p.chart) {
                    p = b;
                    continue;
                }
                res.status = FlowStatus::LeftDomain;
                res.end = p;
                res.t_exit = t;
                return res;
            }
            t += hs;
            p.x = next;
            ++res.n_steps;
            maybe_switch(p);
            if (cfg.record_trace) res.trace.push_back({dir * t, p});
            continue;
        }

        bool ok = detail::rk_stages(field, p.chart, p.x, dir * hs, k);
        Vec y5, y4;
        if (ok) {
            y5 = p.x;
            y4 = p.x;
            for (int s = 0; s < detail::Dopri5::stages; ++s) {
                y5 += dir * hs * detail::Dopri5::b5[s] * k[static_cast<size_t>(s)];
                y4 += dir * hs * detail::Dopri5::b4[s] * k[static_cast<size_t>(s)];
            }
            ok = detail::finite(y5) && M.chart(p.chart).contains(y5);
        }

        double err = 0.0;
        if (ok) {
            for (int i = 0; i < p.x.size(); ++i) {
                double sc = cfg.atol + cfg.rtol * std::max(std::abs(p.x[i]), std::abs(y5[i]));
                double e = (y5[i] - y4[i]) / sc;
                err += e * e;
            }
            err = std::sqrt(err / static_cast<double>(p.x.size()));
        }

        if (!ok || err > 1.0) {
            if (!ok) {
                Point b = M.best_chart(p);
                if (b.chart != p.chart && M.margin(b) > M.margin(p)) {
                    p = b;
                    continue;
                }
            }
            h = ok ? hs * std::max(0.2, 0.9 * std::pow(err, -0.2)) : hs * 0.5;
            if (h < h_floor * std::max(1.0, t)) {
                res.status = FlowStatus::LeftDomain;
                res.end = p;
                res.t_exit = t;
                return res;
            }
            continue;
        }

        t += hs;
        p.x = y5;
        ++res.n_steps;
        h = hs * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-16), -0.2)));
        maybe_switch(p);
        if (cfg.record_trace) res.trace.push_back({dir * t, p});
    }

    res.end = p;
    res.status = FlowStatus::Complete;
    res.t_exit = t_total;
    return res;
}

/// Evaluate the flow at a strictly increasing list of times starting from 0,
/// reusing the integration state between entries.
struct IntegralCurveResult {
    std::vector<Point> points;
    FlowStatus status = FlowStatus::Complete;
    double t_exit = 0.0;
};

inline IntegralCurveResult integral_curve(const VectorFieldOnManifold& field, const Point& start,
                                          const std::vector<double>& times,
                                          const IntegratorConfig& cfg = {}) {
    for (size_t i = 0; i + 1 < times.size(); ++i)
        if (times[i + 1] <= times[i])
            throw Error(ErrorCode::BadArgument, "integral_curve: times must increase strictly");
    IntegralCurveResult out;
    Point p = start;
    double t = 0.0;
    for (double tk : times) {
        FlowResult r = flow(field, p, tk - t, cfg);
        if (r.status != FlowStatus::Complete) {
            out.status = r.status;
            out.t_exit = t + r.t_exit;
            return out;
        }
        p = r.end;
        t = tk;
        out.points.push_back(p);
    }
    out.t_exit = t;
    return out;
}

/// Observed order of the fixed-step integrator: least squares slope of
/// log(error) against log(h). When every error sits at rounding level the
/// measurement is meaningless and `exact` is set instead.
struct ConvergenceResult {
    double order = std::numeric_limits<double>::quiet_NaN();
    bool exact = false;
    std::vector<std::pair<double, double>> h_err;
};

inline ConvergenceResult convergence_order(const VectorFieldOnManifold& field, const Point& start,
                                           double t_total, const std::vector<double>& step_sizes,
                                           const Point* reference = nullptr,
                                           const IntegratorConfig& base_cfg = {}) {
    if (step_sizes.size() < 2)
        throw Error(ErrorCode::InsufficientData, "convergence_order needs at least two steps");
    const ChartedManifold& M = *field.manifold;
    Point ref;
    if (reference) {
        ref = *reference;
    } else {
        IntegratorConfig fine = base_cfg;
        fine.method = OdeMethod::Rk4Fixed;
        fine.h = *std::min_element(step_sizes.begin(), step_sizes.end()) / 10.0;
        FlowResult r = flow(field, start, t_total, fine);
        if (r.status != FlowStatus::Complete)
            throw Error(ErrorCode::InsufficientData, "reference integration left the domain");
        ref = r.end;
    }

    ConvergenceResult out;
    double scale = 1.0 + ref.x.norm();
    bool all_tiny = true;
    for (double h : step_sizes) {
        IntegratorConfig cfg = base_cfg;
        cfg.method = OdeMethod::Rk4Fixed;
        cfg.h = h;
        FlowResult r = flow(field, start, t_total, cfg);
        if (r.status != FlowStatus::Complete)
            throw Error(ErrorCode::InsufficientData, "convergence run left the domain");
        double err = M.distance(r.end, ref);
        out.h_err.push_back({h, err});
        if (err > 1e3 * std::numeric_limits<double>::epsilon() * scale) all_tiny = false;
    }
    if (all_tiny) {
        out.exact = true;
        return out;
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (auto& [h, err] : out.h_err) {
        if (err <= 0.0) continue;
        double lx = std::log(h), ly = std::log(err);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw Error(ErrorCode::InsufficientData, "too few usable error samples");
    out.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return out;
}

/// CSV export of a recorded trace: one row per accepted step, columns
/// t, chart, and the chart coordinates. Requires record_trace in the config.
inline void write_flow_trace_csv(const FlowResult& res, std::ostream& os) {
    auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    int dim = res.trace.empty() ? 0 : static_cast<int>(res.trace.front().second.x.size());
    os << "t,chart";
    for (int i = 0; i < dim; ++i) os << ",x" << i;
    os << "\n";
    for (const auto& [t, p] : res.trace) {
        os << t << "," << p.chart;
        for (int i = 0; i < p.x.size(); ++i) os << "," << p.x[i];
        os << "\n";
    }
    os.precision(old_precision);
}

}  // namespace srlab
