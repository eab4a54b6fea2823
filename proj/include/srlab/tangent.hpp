#pragma once

#include "srlab/chart.hpp"

namespace srlab {

/// Tangent manifold TM: charts double the dimension, transitions are tangent
/// lifts (x, v) -> (t(x), Dt(x) v). The construction applies to its own
/// output; lifted transitions carry exact first jets and finite-difference
/// second jets (see SmoothCoordMap::tangent_lift).
inline ChartedManifold tangent_manifold(const ChartedManifold& M) {
    ChartedManifold TM("T " + M.name());
    for (int i = 0; i < M.n_charts(); ++i) {
        const Chart& c = M.chart(i);
        Chart tc;
        tc.dim = 2 * c.dim;
        tc.label = "T " + c.label;
        auto base_margin = c.margin;
        int d = c.dim;
        tc.margin = [base_margin, d](const Vec& z) { return base_margin(z.head(d)); };
        auto base_sample = c.sample;
        tc.sample = [base_sample, d](Rng& rng) {
            return concat(base_sample(rng), rng.in_ball(d, 1.0));
        };
        TM.add_chart(tc);
    }
    for (int i = 0; i < M.n_charts(); ++i)
        for (int j = 0; j < M.n_charts(); ++j)
            if (i != j && M.has_transition(i, j))
                TM.add_transition(i, j, SmoothCoordMap::tangent_lift(M.transition_map(i, j)));
    return TM;
}

inline Point tangent_point(const TangentVec& t) {
    return {t.base.chart, concat(t.base.x, t.v)};
}

inline TangentVec tangent_vec_of_point(const Point& p) {
    int d = static_cast<int>(p.x.size()) / 2;
    return {{p.chart, p.x.head(d)}, p.x.tail(d)};
}

}  // namespace srlab
