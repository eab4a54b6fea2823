#pragma once

#include <string>
#include <vector>

#include "srlab/manifolds.hpp"
#include "srlab/primitives.hpp"
#include "srlab/smooth_map.hpp"

namespace srlab {

/// The circle fibration of the 3-sphere over the 2-sphere, presented in
/// charts adapted to the projection: total-space chart 2 alpha + beta carries
/// coordinates (x1, x2, theta) where x are stereographic coordinates of the
/// base chart alpha and theta is the fibre phase relative to a local section,
/// offset by beta pi so that two branches cover the circle.
class HopfFibration {
  public:
    explicit HopfFibration(double chart_radius = 3.0, double theta_extent = 2.4)
        : radius_(chart_radius), extent_(theta_extent),
          base_(sphere_stereographic(2, "S^2", chart_radius)), total_("S^3(adapted)") {
        for (int c = 0; c < 4; ++c) {
            Chart ch;
            ch.dim = 3;
            ch.label = "alpha" + std::to_string(alpha_of(c)) + ":beta" + std::to_string(beta_of(c));
            double r = radius_, e = extent_;
            ch.margin = [r, e](const Vec& z) {
                return std::min(r - z.head(2).norm(), e - std::abs(z[2]));
            };
            ch.sample = [r, e](Rng& rng) {
                return concat(rng.in_ball(2, 0.9 * r), vec_of({rng.uniform(-0.9 * e, 0.9 * e)}));
            };
            total_.add_chart(ch);
        }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                if (i == j) continue;
                std::vector<ChainStage> stages = embed_stages(alpha_of(i), beta_of(i));
                for (auto& s : project_stages(alpha_of(j), beta_of(j))) stages.push_back(s);
                total_.add_transition(i, j, SmoothCoordMap::from_chain(3, 3, stages));
            }
    }

    HopfFibration(const HopfFibration&) = delete;
    HopfFibration& operator=(const HopfFibration&) = delete;

    static int alpha_of(int c) { return c / 2; }
    static int beta_of(int c) { return c % 2; }

    const ChartedManifold& base() const { return base_; }
    const ChartedManifold& total() const { return total_; }
    ChartedManifold& base() { return base_; }
    ChartedManifold& total() { return total_; }

    /// Chart parametrization into the unit sphere of R^4, with exact jets.
    SmoothCoordMap embedding(int c) const {
        return SmoothCoordMap::from_chain(3, 4, embed_stages(alpha_of(c), beta_of(c)));
    }

    /// Chart map of chart c applied to ambient R^4 points, with exact jets.
    SmoothCoordMap chart_map(int c) const {
        return SmoothCoordMap::from_chain(4, 3, project_stages(alpha_of(c), beta_of(c)));
    }

    /// The fibration as a smooth map: in adapted charts it is exactly the
    /// coordinate projection (x, theta) -> x.
    SmoothMap projection() const {
        SmoothMap p(&total_, &base_);
        Mat P = Mat::Zero(2, 3);
        P(0, 0) = 1.0;
        P(1, 1) = 1.0;
        for (int c = 0; c < 4; ++c) p.add_rep(c, alpha_of(c), cm_affine(P, Vec::Zero(2)));
        return p;
    }

  private:
    /// Stages mapping chart coordinates (x, theta) at offsets {0,1,2} of the
    /// running state to the ambient point, appended at the end of the state.
    static std::vector<ChainStage> embed_stages(int alpha, int beta) {
        std::vector<ChainStage> s;
        // (x, th) -> (x, th, y)
        s.push_back(stage_append(cm_stereo_inv(2, alpha == 0), {0, 1}));
        // -> (x, th, y, sec)
        s.push_back(stage_append(cm_fib_section(alpha), {3, 4, 5}));
        // -> (x, th, y, sec, th + beta pi)
        Mat one = Mat::Identity(1, 1);
        s.push_back(stage_append(cm_affine(one, vec_of({beta * M_PI})), {2}));
        // -> (sec, phase) -> q
        s.push_back(stage_select({6, 7, 8, 9, 10}));
        s.push_back(stage_map(cm_quat_rotate()));
        return s;
    }

    /// Stages mapping a bare ambient point (state = q, size 4) to chart
    /// coordinates (x, theta).
    static std::vector<ChainStage> project_stages(int alpha, int beta) {
        std::vector<ChainStage> s;
        // q -> (q, y)
        s.push_back(stage_append(cm_quat_fibration(), {0, 1, 2, 3}));
        // -> (q, y, x)
        s.push_back(stage_append(cm_stereo_fwd(2, alpha == 0), {4, 5, 6}));
        // -> (q, y, x, sec)
        s.push_back(stage_append(cm_fib_section(alpha), {4, 5, 6}));
        // -> (q, y, x, sec, (re, im) of the phase relative to the section)
        s.push_back(stage_append(cm_fibre_phase_pair(), {9, 10, 11, 12, 0, 1, 2, 3}));
        // -> theta
        s.push_back(stage_append(cm_atan2_shift(beta * M_PI), {13, 14}));
        s.push_back(stage_select({7, 8, 15}));
        return s;
    }

    double radius_;
    double extent_;
    ChartedManifold base_;
    ChartedManifold total_;
};

}  // namespace srlab
