#pragma once

#include <memory>

#include "srlab/ode.hpp"

namespace srlab {

/// A parametrised curve with velocity. Velocities always come from the
/// construction (closed form or field evaluations along a flow), never from
/// finite differences of stored samples.
struct CurveOnManifold {
    const ChartedManifold* manifold = nullptr;
    std::function<Point(double)> at;
    std::function<TangentVec(double)> velocity;

    static CurveOnManifold closed_form(const ChartedManifold* m, std::function<Point(double)> at,
                                       std::function<TangentVec(double)> velocity) {
        return {m, std::move(at), std::move(velocity)};
    }

    /// Curve backed by a flow. One dense integration over [0, t_max] lays
    /// down checkpoints; evaluations re-integrate from the nearest
    /// checkpoint, so every value is ODE-accurate rather than interpolated.
    static CurveOnManifold from_flow(const VectorFieldOnManifold& field, const Point& start,
                                     double t_max, IntegratorConfig cfg = {}) {
        cfg.record_trace = true;
        FlowResult base = flow(field, start, t_max, cfg);
        if (base.status != FlowStatus::Complete)
            throw Error(ErrorCode::InsufficientData, "flow-backed curve left the domain");
        auto checkpoints = std::make_shared<std::vector<std::pair<double, Point>>>(base.trace);
        IntegratorConfig eval_cfg = cfg;
        eval_cfg.record_trace = false;
        auto at = [field, checkpoints, eval_cfg, t_max](double t) {
            if (t < -1e-12 || t > t_max + 1e-12)
                throw Error(ErrorCode::BadArgument, "curve evaluated outside [0, t_max]");
            // Last checkpoint at time <= t.
            const auto& cps = *checkpoints;
            size_t lo = 0;
            for (size_t i = 0; i < cps.size(); ++i)
                if (cps[i].first <= t + 1e-15) lo = i;
            FlowResult r = flow(field, cps[lo].second, t - cps[lo].first, eval_cfg);
            if (r.status != FlowStatus::Complete)
                throw Error(ErrorCode::InsufficientData, "curve evaluation left the domain");
            return r.end;
        };
        auto vel = [field, at](double t) { return field.eval(at(t)); };
        return {field.manifold, at, vel};
    }
};

}  // namespace srlab
