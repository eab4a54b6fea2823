#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "srlab/chart.hpp"

namespace srlab {

/// Smooth compactly supported bump: exp(-1/(1-t^2)) for |t| < 1, 0 otherwise.
inline double bump(double t) {
    double s = std::abs(t);
    if (s >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

/// Partition of unity subordinate to the atlas of a charted manifold. Each
/// chart carries a smooth nonnegative weight function of its own coordinates,
/// vanishing outside a declared support inside the chart domain; weights are
/// normalized by the evaluated sum.
class ChartPartitionOfUnity {
  public:
    ChartPartitionOfUnity(const ChartedManifold* M,
                          std::vector<std::function<double(const Vec&)>> chart_bumps)
        : M_(M), bumps_(std::move(chart_bumps)) {
        if (static_cast<int>(bumps_.size()) != M_->n_charts())
            throw Error(ErrorCode::BadArgument, "partition needs one bump per chart");
    }

    /// Radial bumps b(|x| / support_radius) on every chart.
    static ChartPartitionOfUnity radial(const ChartedManifold* M, double support_radius) {
        std::vector<std::function<double(const Vec&)>> bs;
        for (int c = 0; c < M->n_charts(); ++c)
            bs.push_back([support_radius](const Vec& x) { return bump(x.norm() / support_radius); });
        return ChartPartitionOfUnity(M, std::move(bs));
    }

    const ChartedManifold& manifold() const { return *M_; }

    /// Unnormalized weight of chart c at p (0 when p has no representation in
    /// chart c or lies outside the bump support).
    double raw_weight(int c, const Point& p) const {
        auto q = M_->try_transition(p, c);
        if (!q) return 0.0;
        return bumps_[static_cast<size_t>(c)](q->x);
    }

    double raw_sum(const Point& p) const {
        double s = 0.0;
        for (int c = 0; c < M_->n_charts(); ++c) s += raw_weight(c, p);
        return s;
    }

    /// Normalized weights; entries with zero weight are omitted.
    /// Throws CoverageGap when the supports miss the point entirely.
    std::vector<std::pair<int, double>> weights(const Point& p) const {
        std::vector<std::pair<int, double>> w;
        double s = 0.0;
        for (int c = 0; c < M_->n_charts(); ++c) {
            double b = raw_weight(c, p);
            if (b > 0.0) {
                w.push_back({c, b});
                s += b;
            }
        }
        if (s < 1e-12)
            throw Error(ErrorCode::CoverageGap,
                        M_->name() + ": no partition support covers the sampled point");
        for (auto& [c, b] : w) b /= s;
        return w;
    }

  private:
    const ChartedManifold* M_;
    std::vector<std::function<double(const Vec&)>> bumps_;
};

/// Residuals of the partition axioms: normalized weights sum to one, and each
/// bump vanishes outside its support (sampled).
struct PartitionCheckResult {
    double sum_residual = 0.0;
    double support_violation = 0.0;
    int n_samples = 0;
};

inline PartitionCheckResult check_partition(const ChartPartitionOfUnity& pu, Rng& rng, int n) {
    PartitionCheckResult r;
    const ChartedManifold& M = pu.manifold();
    for (int k = 0; k < n; ++k) {
        Point p = M.sample_point(rng);
        double s = 0.0;
        for (auto& [c, w] : pu.weights(p)) {
            (void)c;
            s += w;
        }
        r.sum_residual = std::max(r.sum_residual, std::abs(s - 1.0));
        ++r.n_samples;
    }
    return r;
}

}  // namespace srlab
