#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srlab/coord_map.hpp"
#include "srlab/linalg.hpp"

namespace srlab {

/// A chart is a coordinate domain with a signed margin: positive inside the
/// declared safe region, non-positive outside. domain_test(x) is margin > 0.
/// The sampler draws coordinates well inside the domain for property tests.
struct Chart {
    int id = 0;
    int dim = 0;
    std::string label;
    std::function<double(const Vec&)> margin;
    std::function<Vec(Rng&)> sample;

    bool contains(const Vec& x) const { return margin(x) > 0.0; }
};

struct Point {
    int chart = -1;
    Vec x;
};

struct TangentVec {
    Point base;
    Vec v;
};

/// Finite atlas with pairwise transition maps. Transitions are jet-carrying
/// coordinate maps; the atlas is valid when transitions satisfy the cocycle
/// identity on overlaps (tested, not assumed).
class ChartedManifold {
  public:
    ChartedManifold() = default;
    explicit ChartedManifold(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    int dim() const { return charts_.empty() ? 0 : charts_[0].dim; }
    int n_charts() const { return static_cast<int>(charts_.size()); }
    const Chart& chart(int i) const { return charts_.at(static_cast<size_t>(i)); }

    int add_chart(Chart c) {
        c.id = static_cast<int>(charts_.size());
        charts_.push_back(std::move(c));
        return charts_.back().id;
    }

    void add_transition(int i, int j, SmoothCoordMap m) {
        transitions_[{i, j}] = std::move(m);
    }

    bool has_transition(int i, int j) const { return transitions_.count({i, j}) > 0; }

    const SmoothCoordMap& transition_map(int i, int j) const {
        auto it = transitions_.find({i, j});
        if (it == transitions_.end())
            throw Error(ErrorCode::OutsideOverlap,
                        name_ + ": no transition chart " + std::to_string(i) + " -> " +
                            std::to_string(j));
        return it->second;
    }

    bool contains(const Point& p) const { return chart(p.chart).contains(p.x); }

    double margin(const Point& p) const { return chart(p.chart).margin(p.x); }

    /// Express p in chart j. Throws OutsideOverlap when either domain test
    /// fails or no transition exists.
    Point transition(const Point& p, int j) const {
        if (p.chart == j) return p;
        if (!contains(p))
            throw Error(ErrorCode::OutsideOverlap,
                        name_ + ": point outside its own chart " + std::to_string(p.chart));
        const auto& t = transition_map(p.chart, j);
        Point q{j, t.eval(p.x)};
        if (!contains(q))
            throw Error(ErrorCode::OutsideOverlap,
                        name_ + ": image outside chart " + std::to_string(j));
        return q;
    }

    std::optional<Point> try_transition(const Point& p, int j) const {
        if (p.chart == j) return p;
        if (!has_transition(p.chart, j) || !contains(p)) return std::nullopt;
        Point q{j, transition_map(p.chart, j).eval(p.x)};
        if (!contains(q)) return std::nullopt;
        return q;
    }

    /// Re-express p in the chart with maximal margin (ties break to the
    /// lowest chart id).
    Point best_chart(const Point& p) const {
        Point best = p;
        double best_margin = margin(p);
        for (int j = 0; j < n_charts(); ++j) {
            if (j == p.chart) continue;
            auto q = try_transition(p, j);
            if (!q) continue;
            double mj = margin(*q);
            if (mj > best_margin + 1e-15 ||
                (std::abs(mj - best_margin) <= 1e-15 && j < best.chart)) {
                best = *q;
                best_margin = mj;
            }
        }
        return best;
    }

    /// Push a tangent vector into chart j using the transition Jacobian.
    TangentVec conjugate_tangent(const TangentVec& t, int j) const {
        if (t.base.chart == j) return t;
        Point q = transition(t.base, j);
        Vec v = transition_map(t.base.chart, j).jet1(t.base.x, t.v);
        return {q, v};
    }

    /// Coordinate distance in the best common chart; chains through a single
    /// intermediate chart when the points carry non-overlapping charts.
    double distance(const Point& a, const Point& b) const {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_charts(); ++j) {
            auto qa = try_transition(a, j);
            auto qb = try_transition(b, j);
            if (qa && qb) best = std::min(best, (qa->x - qb->x).norm());
        }
        return best;
    }

    Point sample_point(Rng& rng) const {
        int c = rng.uniform_int(n_charts());
        return {c, charts_[static_cast<size_t>(c)].sample(rng)};
    }

  private:
    std::string name_;
    std::vector<Chart> charts_;
    std::map<std::pair<int, int>, SmoothCoordMap> transitions_;
};

/// Residuals of atlas coherence: round trips t_ji(t_ij(x)) = x and cocycle
/// t_jk(t_ij(x)) = t_ik(x) over sampled overlap points.
struct AtlasCheckResult {
    double roundtrip = 0.0;
    double cocycle = 0.0;
    int n_samples = 0;
};

inline AtlasCheckResult check_atlas(const ChartedManifold& M, Rng& rng, int n) {
    AtlasCheckResult r;
    for (int k = 0; k < n; ++k) {
        Point p = M.sample_point(rng);
        for (int j = 0; j < M.n_charts(); ++j) {
            auto q = M.try_transition(p, j);
            if (!q) continue;
            auto back = M.try_transition(*q, p.chart);
            if (back) {
                r.roundtrip = std::max(r.roundtrip, (back->x - p.x).norm());
                ++r.n_samples;
            }
            for (int l = 0; l < M.n_charts(); ++l) {
                auto ql = M.try_transition(*q, l);
                auto pl = M.try_transition(p, l);
                if (ql && pl) r.cocycle = std::max(r.cocycle, (ql->x - pl->x).norm());
            }
        }
    }
    return r;
}

}  // namespace srlab
