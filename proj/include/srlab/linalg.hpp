#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace srlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Error codes carried by srlab::Error. Hard failures throw; recoverable
/// outcomes (an integral curve leaving its domain, a probe finding a
/// collision) are reported through result structs instead.
enum class ErrorCode {
    OutsideOverlap,
    NoLocalRep,
    NotInChart,
    AsymmetricB,
    CoverageGap,
    AnchorMismatch,
    NewtonDiverged,
    OutsideImage,
    LeftDomain,
    InsufficientData,
    BadArgument,
    UnknownScenario,
    UnknownCheck,
    ConfigParse,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::OutsideOverlap: return "OutsideOverlap";
        case ErrorCode::NoLocalRep: return "NoLocalRep";
        case ErrorCode::NotInChart: return "NotInChart";
        case ErrorCode::AsymmetricB: return "AsymmetricB";
        case ErrorCode::CoverageGap: return "CoverageGap";
        case ErrorCode::AnchorMismatch: return "AnchorMismatch";
        case ErrorCode::NewtonDiverged: return "NewtonDiverged";
        case ErrorCode::OutsideImage: return "OutsideImage";
        case ErrorCode::LeftDomain: return "LeftDomain";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::BadArgument: return "BadArgument";
        case ErrorCode::UnknownScenario: return "UnknownScenario";
        case ErrorCode::UnknownCheck: return "UnknownCheck";
        case ErrorCode::ConfigParse: return "ConfigParse";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

/// Deterministic PRNG (splitmix64). Distribution helpers are hand rolled so
/// that a fixed seed produces identical streams on every platform, which the
/// byte-identical report requirement depends on.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return std::ldexp(static_cast<double>(next_u64() >> 11), -53); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    /// Standard normal via Box-Muller on the deterministic stream.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Vec vector(int dim, double lo, double hi) {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    Vec unit_vector(int dim) {
        Vec v(dim);
        double n = 0.0;
        do {
            for (int i = 0; i < dim; ++i) v[i] = normal();
            n = v.norm();
        } while (n < 1e-12);
        return v / n;
    }

    /// Uniform in the closed ball of the given radius.
    Vec in_ball(int dim, double radius) {
        double r = radius * std::pow(uniform(), 1.0 / dim);
        return r * unit_vector(dim);
    }

  private:
    std::uint64_t state_;
};

inline Vec concat(const Vec& a, const Vec& b) {
    Vec r(a.size() + b.size());
    r << a, b;
    return r;
}

inline Vec concat(const Vec& a, const Vec& b, const Vec& c) {
    Vec r(a.size() + b.size() + c.size());
    r << a, b, c;
    return r;
}

inline Vec vec_of(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline double min_singular_value(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues().minCoeff();
}

}  // namespace srlab
