#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sphnet/jet.hpp"
#include "sphnet/network.hpp"
#include "sphnet/sphere.hpp"

namespace sphnet {

/// Shared descent direction: per-layer negated, normalized tangent projection
/// of the ambient gradient, plus the two sinusoid coefficients derived from
/// the same gradients. Layers whose gradient is (numerically) radial carry a
/// zero direction and take no part in the motion.
struct UpdateDirection {
    std::vector<TangentVector> dirs;
    std::vector<double> tangent_norms; // per-layer ||Proj_W(grad)||
    std::vector<bool> degenerate;
    double alpha = 0.0; // sum_i <grad_i, W_i>
    double beta = 0.0;  // sum_i sqrt(||mu_i grad_i||^2 - <grad_i, W_i>^2), radicand clamped at 0

    bool all_degenerate() const {
        for (bool d : degenerate)
            if (!d) return false;
        return true;
    }
};

inline UpdateDirection riemannian_direction(const NetworkParams& net,
                                            const std::vector<Matrix>& grads) {
    if (grads.size() != net.depth())
        throw dimension_error("riemannian_direction: " + std::to_string(grads.size()) +
                              " gradients for " + std::to_string(net.depth()) + " layers");
    UpdateDirection out;
    out.dirs.reserve(grads.size());
    out.tangent_norms.reserve(grads.size());
    out.degenerate.reserve(grads.size());
    for (std::size_t l = 0; l < grads.size(); ++l) {
        const SpherePoint& x = net.layer(l);
        x.weights().check_shape(grads[l], "riemannian_direction");
        const double mu = x.mu();
        const double radial = frob_inner(grads[l], x.weights());
        const double gnorm = frob_norm(grads[l]);

        TangentVector proj = project_tangent(x, grads[l]);
        const double pnorm = frob_norm(proj.value());
        out.tangent_norms.push_back(pnorm);
        out.alpha += radial;

        if (pnorm <= 1e-14 * gnorm) {
            // radial gradient: the layer is frozen and its coefficient
            // contribution is exactly zero (the difference form of the
            // radicand would only contribute cancellation noise here)
            out.degenerate.push_back(true);
            out.dirs.emplace_back(x, Matrix(x.rows(), x.cols()));
        } else {
            const double radicand = mu * gnorm * (mu * gnorm) - radial * radial;
            if (radicand < -1e-9 * (mu * gnorm) * (mu * gnorm))
                throw numeric_error("riemannian_direction: radicand " +
                                    std::to_string(radicand) +
                                    " below the roundoff floor for layer " + std::to_string(l + 1));
            out.beta += std::sqrt(std::max(radicand, 0.0));
            out.degenerate.push_back(false);
            Matrix v = proj.value();
            v *= -1.0 / pnorm;
            out.dirs.emplace_back(x, std::move(v));
        }
    }
    return out;
}

/// Which rule produced the step.
enum class StepBranch : std::uint8_t {
    zero_grad,        // stationary: no motion
    trust_boundary,   // quadratic model pushed tau to the trust-region edge
    interior_optimum, // quadratic model minimum inside the trust region
    linesearch,       // surrogate minimized by bounded linesearch
};

inline const char* branch_name(StepBranch b) {
    switch (b) {
        case StepBranch::zero_grad: return "zero_grad";
        case StepBranch::trust_boundary: return "trust_boundary";
        case StepBranch::interior_optimum: return "interior_optimum";
        case StepBranch::linesearch: return "linesearch";
    }
    return "?";
}

struct StepResult {
    double tau = 0.0;
    StepBranch branch = StepBranch::zero_grad;
    double curve_d1 = 0.0;          // quadratic-model diagnostics (first method)
    double curve_d2 = 0.0;
    double majorant_at_tau = 0.0;   // surrogate diagnostics (second method)
};

/// Stepsize from the order-2 curve model: take the model minimum t* = -d1/d2
/// when it lies inside the trust region [0, eps], else the boundary; a flat
/// model with zero slope stays put. Exact-zero tests use a scaled 1e-14
/// threshold since the inputs are floating point.
inline StepResult ad_stepsize(double d1, double d2, double eps) {
    if (std::isnan(d1) || std::isnan(d2)) throw numeric_error("ad_stepsize: NaN coefficient");
    if (!(eps > 0.0)) throw contract_error("ad_stepsize: eps must be positive");
    StepResult r;
    r.curve_d1 = d1;
    r.curve_d2 = d2;
    const double zero_tol = 1e-14 * std::max({1.0, std::abs(d1), std::abs(d2)});
    if (std::abs(d2) <= zero_tol) {
        if (std::abs(d1) <= zero_tol) {
            r.tau = 0.0;
            r.branch = StepBranch::zero_grad;
        } else {
            r.tau = eps;
            r.branch = StepBranch::trust_boundary;
        }
        return r;
    }
    const double t_star = -d1 / d2;
    if (t_star >= 0.0 && t_star <= eps) {
        r.tau = t_star;
        r.branch = StepBranch::interior_optimum;
    } else {
        r.tau = eps;
        r.branch = StepBranch::trust_boundary;
    }
    return r;
}

/// Constants of the sinusoidal surrogate that are fixed for one iteration.
struct MajorantConstants {
    double alpha = 0.0;
    double beta = 0.0;
    double q = 0.0;                     // mean squared input norm of the dataset
    std::vector<double> layer_op_norms; // ||W_i||_op at the current iterate
    double op_norm_product = 1.0;       // product of layer_op_norms
};

inline MajorantConstants majorant_constants(const NetworkParams& net, const UpdateDirection& dir,
                                            double q, const OpNormOptions& opts = {}) {
    MajorantConstants c;
    c.alpha = dir.alpha;
    c.beta = dir.beta;
    c.q = q;
    c.layer_op_norms.reserve(net.depth());
    for (const SpherePoint& l : net.layers()) {
        c.layer_op_norms.push_back(op_norm(l.weights(), opts).value);
        c.op_norm_product *= c.layer_op_norms.back();
    }
    return c;
}

/// Product over layers of (||W_i||_op + ||Delta_i(t)||_op), where Delta_i(t)
/// = W_i (cos t - 1) + mu_i V_i sin t is the parameter perturbation after
/// moving the curve to t. Frozen layers do not move, so they contribute their
/// bare operator norm. Equals op_norm_product at t = 0.
inline double perturbed_norm_product(const MajorantConstants& consts, const NetworkParams& net,
                                     const std::vector<TangentVector>& dirs, double t,
                                     const OpNormOptions& opts = {}) {
    if (dirs.size() != net.depth() || consts.layer_op_norms.size() != net.depth())
        throw dimension_error("perturbed_norm_product: layer count mismatch");
    if (t < 0.0 || t > std::numbers::pi + 1e-12)
        throw contract_error("perturbed_norm_product: t = " + std::to_string(t) +
                             " outside [0, pi]");
    const double c = std::cos(t) - 1.0;
    const double s = std::sin(t);
    double product = 1.0;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        double delta_norm = 0.0;
        if (!dirs[l].is_zero()) {
            Matrix delta = net.layer(l).weights() * c;
            const double smu = s * net.layer(l).mu();
            const double* pv = dirs[l].value().data();
            double* pd = delta.data();
            for (std::size_t k = 0; k < delta.size(); ++k) pd[k] += smu * pv[k];
            delta_norm = op_norm(delta, opts).value;
        }
        product *= consts.layer_op_norms[l] + delta_norm;
    }
    return product;
}

/// The sinusoidal surrogate evaluated at t. At t = 0 this is exactly loss0.
inline double majorant_value(const MajorantConstants& consts, const NetworkParams& net,
                             const std::vector<TangentVector>& dirs, double t, double loss0,
                             const OpNormOptions& opts = {}) {
    const double p1 = perturbed_norm_product(consts, net, dirs, t, opts);
    const double excess = p1 - consts.op_norm_product;
    return loss0 + consts.alpha * (std::cos(t) - 1.0) - consts.beta * std::sin(t) +
           0.5 * consts.q * excess * excess;
}

namespace detail {

/// Golden-section minimization on [a, b] down to the given interval width.
template <typename F>
double golden_section_min(F&& f, double a, double b, double width) {
    constexpr double invphi = 0.6180339887498949; // (sqrt(5) - 1) / 2
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    while (b - a > width) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Stepsize by minimizing the surrogate over [0, pi]: golden-section search
/// to interval width 1e-8, then the best of {0, search result, pi}. Since 0
/// is always a candidate the chosen step never exceeds the surrogate's value
/// at the origin. beta = 0 means every layer is degenerate: nothing moves and
/// the consistent surrogate is constant, so the step is 0.
inline StepResult mm_stepsize(const MajorantConstants& consts, const NetworkParams& net,
                              const std::vector<TangentVector>& dirs, double loss0,
                              const OpNormOptions& opts = {}) {
    StepResult r;
    if (consts.beta <= 0.0) {
        r.tau = 0.0;
        r.branch = StepBranch::zero_grad;
        r.majorant_at_tau = loss0;
        return r;
    }
    const auto surrogate = [&](double t) { return majorant_value(consts, net, dirs, t, loss0, opts); };
    const double pi = std::numbers::pi;
    const double t_gs = detail::golden_section_min(surrogate, 0.0, pi, 1e-8);

    double best_t = 0.0;
    double best_v = surrogate(0.0);
    for (double cand : {t_gs, pi}) {
        const double v = surrogate(cand);
        if (v < best_v) {
            best_v = v;
            best_t = cand;
        }
    }
    r.tau = best_t;
    r.branch = best_t == 0.0 ? StepBranch::zero_grad : StepBranch::linesearch;
    r.majorant_at_tau = best_v;
    return r;
}

/// Moves every non-degenerate layer along its geodesic by the shared step.
/// tau = 0 returns the network unchanged bit for bit.
inline NetworkParams apply_update(const NetworkParams& net, const UpdateDirection& dir,
                                  double tau) {
    if (tau < 0.0) throw contract_error("apply_update: tau must be nonnegative");
    if (dir.dirs.size() != net.depth())
        throw contract_error("apply_update: direction built for a different network");
    if (tau == 0.0) return net;
    std::vector<SpherePoint> layers;
    layers.reserve(net.depth());
    for (std::size_t l = 0; l < net.depth(); ++l) {
        net.layer(l).weights().check_shape(dir.dirs[l].value(), "apply_update");
        if (dir.degenerate[l])
            layers.push_back(net.layer(l));
        else
            layers.push_back(exp_map(net.layer(l), dir.dirs[l], tau));
    }
    return NetworkParams(std::move(layers));
}

} // namespace sphnet
