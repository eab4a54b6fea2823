#pragma once

#include <map>
#include <optional>
#include <utility>

#include "srlab/chart.hpp"

namespace srlab {

/// A map between charted manifolds given by local coordinate representatives.
/// Evaluation picks the representative whose output lands deepest inside its
/// target chart; callers may pin the target chart instead.
class SmoothMap {
  public:
    SmoothMap() = default;
    SmoothMap(const ChartedManifold* src, const ChartedManifold* dst) : src_(src), dst_(dst) {}

    const ChartedManifold& source() const { return *src_; }
    const ChartedManifold& target() const { return *dst_; }

    void add_rep(int src_chart, int dst_chart, SmoothCoordMap m) {
        reps_[{src_chart, dst_chart}] = std::move(m);
    }

    bool has_rep(int i, int j) const { return reps_.count({i, j}) > 0; }

    const SmoothCoordMap& rep(int i, int j) const {
        auto it = reps_.find({i, j});
        if (it == reps_.end())
            throw Error(ErrorCode::NoLocalRep,
                        "no local representative for chart pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
        return it->second;
    }

    Point eval(const Point& p, int target_chart = -1) const {
        auto pick = best_rep(p, target_chart);
        const auto& [pi, j] = pick;
        Point q{j, rep(pi.chart, j).eval(pi.x)};
        return q;
    }

    /// Pushforward of a tangent vector through the local representative.
    TangentVec differential(const TangentVec& t, int target_chart = -1) const {
        auto pick = best_rep(t.base, target_chart);
        const auto& [pi, j] = pick;
        TangentVec ti = src_->conjugate_tangent(t, pi.chart);
        const auto& m = rep(pi.chart, j);
        return {{j, m.eval(ti.base.x)}, m.jet1(ti.base.x, ti.v)};
    }

  private:
    std::pair<Point, int> best_rep(const Point& p, int target_chart) const {
        std::optional<std::pair<Point, int>> best;
        double best_margin = -std::numeric_limits<double>::infinity();
        for (const auto& [key, m] : reps_) {
            auto [i, j] = key;
            if (target_chart >= 0 && j != target_chart) continue;
            auto pi = src_->try_transition(p, i);
            if (!pi) continue;
            Vec y = m.eval(pi->x);
            if (!dst_->chart(j).contains(y)) continue;
            double mj = dst_->chart(j).margin(y);
            // Prefer the representative acting on the point's own chart.
            if (pi->chart == p.chart) mj += 1e-9;
            if (mj > best_margin) {
                best = {{*pi, j}};
                best_margin = mj;
            }
        }
        if (!best)
            throw Error(ErrorCode::NoLocalRep,
                        "no usable local representative at the given point");
        return *best;
    }

    const ChartedManifold* src_ = nullptr;
    const ChartedManifold* dst_ = nullptr;
    std::map<std::pair<int, int>, SmoothCoordMap> reps_;
};

inline TangentVec differential(const SmoothMap& f, const TangentVec& t, int target_chart = -1) {
    return f.differential(t, target_chart);
}

/// Sample for the fibre product tangent characterisation: tangent vectors a
/// at m1 and b at m2 with p1(m1) = p2(m2).
struct FibreProductSample {
    TangentVec a, b;
};

struct FibreProductCheckResult {
    double accepted_residual = 0.0;   // tangency defect of pairs with Tp1 a = Tp2 b
    double rejected_min_defect = 0.0; // smallest tangency defect among rejected pairs
    double consistency = 0.0;         // | defect - |Tp1 a - Tp2 b| | over all pairs
    int n_samples = 0;
};

/// Verifies that a pair (a, b) over a shared base point is tangent to the
/// fibre product exactly when Tp1(a) = Tp2(b). Tangency is probed by moving
/// along coordinate lines with velocities a, b and measuring the first-order
/// growth rate of the target distance.
inline FibreProductCheckResult fibre_product_tangent_check(
    const SmoothMap& p1, const SmoothMap& p2, const std::vector<FibreProductSample>& samples,
    double probe_h = 1e-5) {
    FibreProductCheckResult r;
    r.rejected_min_defect = std::numeric_limits<double>::infinity();
    const ChartedManifold& N = p1.target();
    bool any_rejected = false;
    for (const auto& s : samples) {
        TangentVec ta = p1.differential(s.a);
        TangentVec tb = p2.differential(s.b, ta.base.chart);
        double delta = (ta.v - tb.v).norm();

        auto dist_at = [&](double t) {
            Point a_t{s.a.base.chart, s.a.base.x + t * s.a.v};
            Point b_t{s.b.base.chart, s.b.base.x + t * s.b.v};
            return N.distance(p1.eval(a_t), p2.eval(b_t));
        };
        double defect = (dist_at(probe_h) + dist_at(-probe_h)) / (2.0 * probe_h);

        r.consistency = std::max(r.consistency, std::abs(defect - delta));
        if (delta < 1e-7) {
            r.accepted_residual = std::max(r.accepted_residual, defect);
        } else {
            any_rejected = true;
            r.rejected_min_defect = std::min(r.rejected_min_defect, defect);
        }
        ++r.n_samples;
    }
    if (!any_rejected) r.rejected_min_defect = 0.0;
    return r;
}

}  // namespace srlab
