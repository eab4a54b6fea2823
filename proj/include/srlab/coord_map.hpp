#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "srlab/dual.hpp"
#include "srlab/linalg.hpp"

namespace srlab {

enum class DerivMode { ClosedForm, DualNumber, FiniteDifference };

inline const char* to_string(DerivMode m) {
    switch (m) {
        case DerivMode::ClosedForm: return "closed_form";
        case DerivMode::DualNumber: return "dual_number";
        case DerivMode::FiniteDifference: return "finite_difference";
    }
    return "?";
}

/// Second-order jet state threaded through a chain of elementary maps.
/// Invariant maintained by every propagator: for the map f so far,
///   y  = f(x),  a = Df(x) va,  b = Df(x) vb,  ab = D2f(x)(va, vb) + Df(x) uab
/// where (x, va, vb, uab) were the seeds. Chaining propagators is therefore
/// an exact second-order chain rule, no truncation involved.
struct Jet2 {
    Vec y, a, b, ab;

    static Jet2 seed(const Vec& x, const Vec& va, const Vec& vb) {
        return {x, va, vb, Vec::Zero(x.size())};
    }
};

/// One stage of a closed-form chain: plain evaluation plus jet propagation.
struct ChainStage {
    std::function<Vec(const Vec&)> val;
    std::function<Jet2(const Jet2&)> prop;
};

namespace fd {

inline double step1(const Vec& x, double h_fd) { return h_fd * (1.0 + x.norm()); }
inline double step2(const Vec& x) { return 1e-4 * (1.0 + x.norm()); }

inline Vec jet1(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v,
                double h_fd = 1e-5) {
    double nv = v.norm();
    if (nv == 0.0) return Vec::Zero(f(x).size());
    Vec u = v / nv;
    double h = step1(x, h_fd);
    return nv * (f(x + h * u) - f(x - h * u)) / (2.0 * h);
}

inline Vec jet2(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v,
                const Vec& w) {
    double nv = v.norm(), nw = w.norm();
    if (nv == 0.0 || nw == 0.0) return Vec::Zero(f(x).size());
    Vec u = v / nv, s = w / nw;
    double h = step2(x);
    Vec r = (f(x + h * (u + s)) - f(x + h * (u - s)) - f(x - h * (u - s)) + f(x - h * (u + s))) /
            (4.0 * h * h);
    return nv * nw * r;
}

inline Mat jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h_fd = 1e-5) {
    Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        Vec e = Vec::Zero(x.size());
        e[j] = 1.0;
        J.col(j) = jet1(f, x, e, h_fd);
    }
    return J;
}

}  // namespace fd

/// A coordinate representative of a smooth map between chart domains,
/// carrying first and second directional derivatives. jet1 is linear in the
/// direction; jet2 is symmetric and bilinear whenever the mode is exact
/// (closed form or dual number).
class SmoothCoordMap {
  public:
    SmoothCoordMap() = default;

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    DerivMode mode() const { return mode_; }

    Vec eval(const Vec& x) const { return eval_(x); }
    Vec jet1(const Vec& x, const Vec& v) const { return jet1_(x, v); }
    Vec jet2(const Vec& x, const Vec& v, const Vec& w) const { return jet2_(x, v, w); }

    Mat jacobian(const Vec& x) const {
        Mat J(out_dim_, in_dim_);
        for (int j = 0; j < in_dim_; ++j) {
            Vec e = Vec::Zero(in_dim_);
            e[j] = 1.0;
            J.col(j) = jet1(x, e);
        }
        return J;
    }

    static SmoothCoordMap closed_form(int in_dim, int out_dim,
                                      std::function<Vec(const Vec&)> eval,
                                      std::function<Vec(const Vec&, const Vec&)> jet1,
                                      std::function<Vec(const Vec&, const Vec&, const Vec&)> jet2) {
        SmoothCoordMap m;
        m.in_dim_ = in_dim;
        m.out_dim_ = out_dim;
        m.mode_ = DerivMode::ClosedForm;
        m.eval_ = std::move(eval);
        m.jet1_ = std::move(jet1);
        m.jet2_ = std::move(jet2);
        return m;
    }

    /// Build from a chain of elementary stages. Jets come out exact because
    /// every stage propagates the full second-order state.
    static SmoothCoordMap from_chain(int in_dim, int out_dim, std::vector<ChainStage> stages) {
        auto sh = std::make_shared<std::vector<ChainStage>>(std::move(stages));
        SmoothCoordMap m;
        m.in_dim_ = in_dim;
        m.out_dim_ = out_dim;
        m.mode_ = DerivMode::ClosedForm;
        m.eval_ = [sh](const Vec& x) {
            Vec y = x;
            for (const auto& s : *sh) y = s.val(y);
            return y;
        };
        m.jet1_ = [sh](const Vec& x, const Vec& v) {
            Jet2 j = Jet2::seed(x, v, v);
            for (const auto& s : *sh) j = s.prop(j);
            return j.a;
        };
        m.jet2_ = [sh](const Vec& x, const Vec& v, const Vec& w) {
            Jet2 j = Jet2::seed(x, v, w);
            for (const auto& s : *sh) j = s.prop(j);
            return j.ab;
        };
        return m;
    }

    /// Build from a scalar-generic functor mapping std::vector<S> to
    /// std::vector<S>. Jets are computed with (nested) dual numbers, exact to
    /// machine precision.
    template <class F>
    static SmoothCoordMap from_generic(int in_dim, int out_dim, F f) {
        SmoothCoordMap m;
        m.in_dim_ = in_dim;
        m.out_dim_ = out_dim;
        m.mode_ = DerivMode::DualNumber;
        m.eval_ = [f, out_dim](const Vec& x) {
            std::vector<double> in(x.data(), x.data() + x.size());
            auto out = f(in);
            Vec y(out_dim);
            for (int i = 0; i < out_dim; ++i) y[i] = out[i];
            return y;
        };
        m.jet1_ = [f, out_dim](const Vec& x, const Vec& v) {
            std::vector<Dual1> in(x.size());
            for (int i = 0; i < x.size(); ++i) in[i] = Dual1(x[i], v[i]);
            auto out = f(in);
            Vec y(out_dim);
            for (int i = 0; i < out_dim; ++i) y[i] = out[i].b;
            return y;
        };
        m.jet2_ = [f, out_dim](const Vec& x, const Vec& v, const Vec& w) {
            std::vector<Dual2> in(x.size());
            for (int i = 0; i < x.size(); ++i)
                in[i] = Dual2(Dual1(x[i], w[i]), Dual1(v[i], 0.0));
            auto out = f(in);
            Vec y(out_dim);
            for (int i = 0; i < out_dim; ++i) y[i] = out[i].b.b;
            return y;
        };
        return m;
    }

    /// Wrap an evaluation-only map; derivatives fall back to central
    /// differences. Cross-check oracle, never the primary path.
    static SmoothCoordMap finite_difference(int in_dim, int out_dim,
                                            std::function<Vec(const Vec&)> eval,
                                            double h_fd = 1e-5) {
        SmoothCoordMap m;
        m.in_dim_ = in_dim;
        m.out_dim_ = out_dim;
        m.mode_ = DerivMode::FiniteDifference;
        m.eval_ = eval;
        m.jet1_ = [eval, h_fd](const Vec& x, const Vec& v) { return fd::jet1(eval, x, v, h_fd); };
        m.jet2_ = [eval](const Vec& x, const Vec& v, const Vec& w) {
            return fd::jet2(eval, x, v, w);
        };
        return m;
    }

    /// Exact chain rule composition g after f.
    static SmoothCoordMap compose(const SmoothCoordMap& g, const SmoothCoordMap& f) {
        if (f.out_dim() != g.in_dim())
            throw Error(ErrorCode::BadArgument, "compose: dimension mismatch");
        SmoothCoordMap m;
        m.in_dim_ = f.in_dim_;
        m.out_dim_ = g.out_dim_;
        m.mode_ = (f.mode_ == DerivMode::FiniteDifference || g.mode_ == DerivMode::FiniteDifference)
                      ? DerivMode::FiniteDifference
                      : (f.mode_ == DerivMode::DualNumber || g.mode_ == DerivMode::DualNumber
                             ? DerivMode::DualNumber
                             : DerivMode::ClosedForm);
        m.eval_ = [f, g](const Vec& x) { return g.eval(f.eval(x)); };
        m.jet1_ = [f, g](const Vec& x, const Vec& v) { return g.jet1(f.eval(x), f.jet1(x, v)); };
        m.jet2_ = [f, g](const Vec& x, const Vec& v, const Vec& w) -> Vec {
            Vec fx = f.eval(x);
            Vec fv = f.jet1(x, v);
            Vec fw = f.jet1(x, w);
            return g.jet2(fx, fv, fw) + g.jet1(fx, f.jet2(x, v, w));
        };
        return m;
    }

    /// Tangent lift (x, v) -> (f(x), Df(x) v). Its own first jet is exact
    /// (uses jet2 of the base map); its second jet falls back to central
    /// differences, so the lifted map reports finite_difference mode.
    static SmoothCoordMap tangent_lift(const SmoothCoordMap& f) {
        int n = f.in_dim(), p = f.out_dim();
        auto ev = [f, n, p](const Vec& z) {
            Vec x = z.head(n), v = z.tail(n);
            return concat(f.eval(x), f.jet1(x, v));
        };
        auto j1 = [f, n, p](const Vec& z, const Vec& d) {
            Vec x = z.head(n), v = z.tail(n);
            Vec a = d.head(n), b = d.tail(n);
            return concat(f.jet1(x, a), f.jet2(x, a, v) + f.jet1(x, b));
        };
        SmoothCoordMap m;
        m.in_dim_ = 2 * n;
        m.out_dim_ = 2 * p;
        m.mode_ = DerivMode::FiniteDifference;
        m.eval_ = ev;
        m.jet1_ = j1;
        m.jet2_ = [j1](const Vec& z, const Vec& v, const Vec& w) {
            double nw = w.norm();
            if (nw == 0.0) return Vec(Vec::Zero(j1(z, v).size()));
            Vec u = w / nw;
            double h = fd::step2(z);
            return Vec(nw * (j1(z + h * u, v) - j1(z - h * u, v)) / (2.0 * h));
        };
        return m;
    }

  private:
    int in_dim_ = 0;
    int out_dim_ = 0;
    DerivMode mode_ = DerivMode::ClosedForm;
    std::function<Vec(const Vec&)> eval_;
    std::function<Vec(const Vec&, const Vec&)> jet1_;
    std::function<Vec(const Vec&, const Vec&, const Vec&)> jet2_;
};

/// Property residuals for a coordinate map: linearity of jet1 in the
/// direction, symmetry of jet2, and agreement of both with central
/// differences. Used by unit tests and by the CLI check suite.
struct JetCheckResult {
    double linearity = 0.0;
    double symmetry = 0.0;
    double jet1_vs_fd = 0.0;
    double jet2_vs_fd = 0.0;
    int n_samples = 0;
};

inline JetCheckResult check_jets(const SmoothCoordMap& m, Rng& rng,
                                 const std::function<Vec(Rng&)>& sample, int n) {
    JetCheckResult r;
    r.n_samples = n;
    auto ev = [&m](const Vec& x) { return m.eval(x); };
    for (int k = 0; k < n; ++k) {
        Vec x = sample(rng);
        Vec v = rng.in_ball(m.in_dim(), 1.0);
        Vec w = rng.in_ball(m.in_dim(), 1.0);
        double al = rng.uniform(-2.0, 2.0), be = rng.uniform(-2.0, 2.0);
        Vec lin = m.jet1(x, al * v + be * w) - al * m.jet1(x, v) - be * m.jet1(x, w);
        r.linearity = std::max(r.linearity, lin.norm());
        Vec sym = m.jet2(x, v, w) - m.jet2(x, w, v);
        r.symmetry = std::max(r.symmetry, sym.norm());
        r.jet1_vs_fd = std::max(r.jet1_vs_fd, (m.jet1(x, v) - fd::jet1(ev, x, v)).norm());
        r.jet2_vs_fd = std::max(r.jet2_vs_fd, (m.jet2(x, v, w) - fd::jet2(ev, x, v, w)).norm());
    }
    return r;
}

}  // namespace srlab
