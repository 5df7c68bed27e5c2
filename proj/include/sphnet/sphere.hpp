#pragma once

#include <cmath>
#include <string>

#include "sphnet/matrix.hpp"

namespace sphnet {

/// A matrix with fixed Frobenius norm mu: a point on the sphere of radius mu
/// inside the ambient space of matrices of its shape.
class SpherePoint {
public:
    /// Validates ||W|| = mu to 1e-9 relative.
    SpherePoint(Matrix w, double mu) : w_(std::move(w)), mu_(mu) {
        if (!(mu > 0.0)) throw contract_error("SpherePoint: mu must be positive");
        const double n = frob_norm(w_);
        if (std::abs(n - mu) > 1e-9 * mu)
            throw contract_error("SpherePoint: Frobenius norm " + std::to_string(n) +
                                 " is off the sphere of radius " + std::to_string(mu));
    }

    /// Projects an arbitrary nonzero matrix onto the sphere: W * (mu / ||W||).
    static SpherePoint rescaled(Matrix w, double mu) {
        if (!(mu > 0.0)) throw contract_error("SpherePoint: mu must be positive");
        const double n = frob_norm(w);
        if (n == 0.0) throw contract_error("SpherePoint: cannot rescale the zero matrix");
        w *= mu / n;
        return SpherePoint(std::move(w), mu);
    }

    const Matrix& weights() const { return w_; }
    double mu() const { return mu_; }
    int rows() const { return w_.rows(); }
    int cols() const { return w_.cols(); }

private:
    Matrix w_;
    double mu_;
};

/// Element of the tangent space at a sphere point: orthogonal, in the
/// Frobenius inner product, to the base weights. The zero vector is allowed
/// and marks a direction with no motion.
class TangentVector {
public:
    TangentVector(const SpherePoint& base, Matrix v) : v_(std::move(v)), mu_(base.mu()) {
        base.weights().check_shape(v_, "TangentVector");
        const double ip = frob_inner(base.weights(), v_);
        if (std::abs(ip) > 1e-9 * mu_ * frob_norm(v_))
            throw contract_error("TangentVector: not tangent (inner product " +
                                 std::to_string(ip) + ")");
    }

    const Matrix& value() const { return v_; }
    double base_mu() const { return mu_; }
    bool is_zero() const { return v_.is_zero(); }

private:
    Matrix v_;
    double mu_;
};

/// Removes the radial component: H - (<W,H>/mu^2) W. Idempotent. The
/// correction runs twice: one pass leaves a radial residual of order
/// eps * ||H||, which breaks the tangency tolerance whenever the projection
/// itself is nearly zero.
inline TangentVector project_tangent(const SpherePoint& x, const Matrix& h) {
    x.weights().check_shape(h, "project_tangent");
    const double mu = x.mu();
    Matrix v = h;
    const double* pw = x.weights().data();
    double* pv = v.data();
    for (int pass = 0; pass < 2; ++pass) {
        const double scale = frob_inner(x.weights(), v) / (mu * mu);
        for (std::size_t k = 0; k < v.size(); ++k) pv[k] -= scale * pw[k];
    }
    // below the roundoff scale of the input the projection is noise; the
    // exact-zero result also marks radial inputs unambiguously
    if (frob_norm(v) <= 1e-14 * frob_norm(h)) v = Matrix(h.rows(), h.cols());
    return TangentVector(x, std::move(v));
}

/// Geodesic through X with unit tangent direction V, evaluated at parameter t:
/// W cos t + mu V sin t. The result is rescaled to norm exactly mu so drift
/// cannot accumulate over long runs.
inline SpherePoint exp_map(const SpherePoint& x, const TangentVector& v, double t) {
    x.weights().check_shape(v.value(), "exp_map");
    const double vn = frob_norm(v.value());
    if (std::abs(vn - 1.0) > 1e-6)
        throw contract_error("exp_map: direction norm " + std::to_string(vn) +
                             " is not 1 (unit tangent required)");
    const double c = std::cos(t);
    const double s = std::sin(t) * x.mu();
    Matrix w = x.weights();
    double* pw = w.data();
    const double* pv = v.value().data();
    for (std::size_t k = 0; k < w.size(); ++k) pw[k] = c * pw[k] + s * pv[k];
    return SpherePoint::rescaled(std::move(w), x.mu());
}

/// Angle between two points of the same sphere: arccos(<X,Y>/mu^2), with the
/// ratio clamped to [-1, 1] so roundoff past the poles cannot produce NaN.
inline double geodesic_distance(const SpherePoint& x, const SpherePoint& y) {
    x.weights().check_shape(y.weights(), "geodesic_distance");
    if (std::abs(x.mu() - y.mu()) > 1e-9 * x.mu())
        throw contract_error("geodesic_distance: mismatched radii " +
                             std::to_string(x.mu()) + " vs " + std::to_string(y.mu()));
    const double r = frob_inner(x.weights(), y.weights()) / (x.mu() * x.mu());
    return std::acos(std::clamp(r, -1.0, 1.0));
}

} // namespace sphnet
