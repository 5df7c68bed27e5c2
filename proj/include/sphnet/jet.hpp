#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sphnet/network.hpp"
#include "sphnet/sphere.hpp"

namespace sphnet {

/// Order-2 truncated Taylor coefficients of a scalar with respect to the
/// shared curve parameter t: value, first and second derivative at t = 0
/// (the polynomial is v + d1*t + (d2/2)*t^2).
struct Jet2 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

inline Jet2 jet_add(const Jet2& a, const Jet2& b) {
    return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}

inline Jet2 jet_mul(const Jet2& a, const Jet2& b) {
    return {a.v * b.v, a.v * b.d1 + a.d1 * b.v, a.v * b.d2 + 2.0 * a.d1 * b.d1 + a.d2 * b.v};
}

/// ReLU on jets: the kink at v = 0 takes the inactive branch, matching the
/// subgradient-0 convention of the reverse-mode gradients.
inline Jet2 jet_relu(const Jet2& a) {
    return a.v > 0.0 ? a : Jet2{0.0, 0.0, 0.0};
}

inline Jet2 operator+(const Jet2& a, const Jet2& b) { return jet_add(a, b); }
inline Jet2 operator*(const Jet2& a, const Jet2& b) { return jet_mul(a, b); }

inline Jet2 jet_activation(relu_activation, const Jet2& a) { return jet_relu(a); }
inline Jet2 jet_activation(identity_activation, const Jet2& a) { return a; }

/// Taylor seeds of the per-layer update curve at t = 0. An active layer moves
/// along W cos t + mu V sin t, so its value/velocity/acceleration are
/// (W, mu V, -W); a frozen layer (zero direction) is constant in t.
struct CurveCoefficients {
    std::vector<Matrix> velocity; // mu_i * V_i; zero matrix for frozen layers
    std::vector<bool> frozen;
};

inline CurveCoefficients curve_coefficients(const NetworkParams& net,
                                            const std::vector<TangentVector>& dirs) {
    if (dirs.size() != net.depth())
        throw dimension_error("curve_coefficients: " + std::to_string(dirs.size()) +
                              " directions for " + std::to_string(net.depth()) + " layers");
    CurveCoefficients cc;
    cc.velocity.reserve(dirs.size());
    cc.frozen.reserve(dirs.size());
    for (std::size_t l = 0; l < dirs.size(); ++l) {
        net.layer(l).weights().check_shape(dirs[l].value(), "curve_coefficients");
        if (dirs[l].is_zero()) {
            cc.velocity.emplace_back(dirs[l].value());
            cc.frozen.push_back(true);
            continue;
        }
        const double vn = frob_norm(dirs[l].value());
        if (std::abs(vn - 1.0) > 1e-6)
            throw contract_error("curve_coefficients: direction for layer " +
                                 std::to_string(l + 1) + " has norm " + std::to_string(vn));
        cc.velocity.push_back(dirs[l].value() * net.layer(l).mu());
        cc.frozen.push_back(false);
    }
    return cc;
}

namespace detail {

struct JetWorkspace {
    std::vector<Vector> hv, h1, h2; // per-level value / first / second channels
};

/// One layer of jet-propagated pre-activations. The value channel performs
/// exactly the same multiply-add sequence as the plain forward pass, so the
/// zeroth Taylor coefficient reproduces the ordinary loss bit for bit.
inline void jet_layer_apply(const Matrix& w, const Matrix& vel, bool frozen, const Vector& hv,
                            const Vector& h1, const Vector& h2, Vector& zv, Vector& z1,
                            Vector& z2) {
    const int rows = w.rows();
    const int cols = w.cols();
    zv.assign(static_cast<std::size_t>(rows), 0.0);
    z1.assign(static_cast<std::size_t>(rows), 0.0);
    z2.assign(static_cast<std::size_t>(rows), 0.0);
    const double* wr = w.data();
    const double* dr = vel.data();
    for (int i = 0; i < rows; ++i, wr += cols, dr += cols) {
        double sv = 0.0, s1 = 0.0, s2 = 0.0;
        if (frozen) {
            for (int j = 0; j < cols; ++j) {
                sv += wr[j] * hv[j];
                s1 += wr[j] * h1[j];
                s2 += wr[j] * h2[j];
            }
        } else {
            for (int j = 0; j < cols; ++j) {
                sv += wr[j] * hv[j];
                s1 += wr[j] * h1[j] + dr[j] * hv[j];
                s2 += wr[j] * h2[j] + 2.0 * dr[j] * h1[j] - wr[j] * hv[j];
            }
        }
        zv[i] = sv;
        z1[i] = s1;
        z2[i] = s2;
    }
}

} // namespace detail

/// Taylor coefficients (L(0), L'(0), L''(0)) of the mean loss along the joint
/// update curve, one forward jet pass over the full batch. No Hessian or
/// Hessian-vector product is ever formed.
template <typename Activation = relu_activation>
Jet2 curve_eval(const NetworkParams& net, const std::vector<TangentVector>& dirs,
                const std::vector<Sample>& samples) {
    check_batch(net, samples, "curve_eval");
    const CurveCoefficients cc = curve_coefficients(net, dirs);
    const std::size_t layer_count = net.depth();

    detail::JetWorkspace ws;
    ws.hv.resize(layer_count + 1);
    ws.h1.resize(layer_count + 1);
    ws.h2.resize(layer_count + 1);

    Jet2 total;
    for (const Sample& s : samples) {
        ws.hv[0] = s.x;
        ws.h1[0].assign(s.x.size(), 0.0);
        ws.h2[0].assign(s.x.size(), 0.0);
        for (std::size_t l = 0; l < layer_count; ++l) {
            detail::jet_layer_apply(net.layer(l).weights(), cc.velocity[l], cc.frozen[l],
                                    ws.hv[l], ws.h1[l], ws.h2[l], ws.hv[l + 1], ws.h1[l + 1],
                                    ws.h2[l + 1]);
            if (l + 1 < layer_count) {
                Vector& zv = ws.hv[l + 1];
                Vector& z1 = ws.h1[l + 1];
                Vector& z2 = ws.h2[l + 1];
                for (std::size_t k = 0; k < zv.size(); ++k) {
                    const Jet2 a = jet_activation(Activation{}, Jet2{zv[k], z1[k], z2[k]});
                    zv[k] = a.v;
                    z1[k] = a.d1;
                    z2[k] = a.d2;
                }
            }
        }
        const Vector& fv = ws.hv[layer_count];
        const Vector& f1 = ws.h1[layer_count];
        const Vector& f2 = ws.h2[layer_count];
        double sv = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < fv.size(); ++k) {
            const double e = fv[k] - s.y[k];
            sv += e * e;
            s1 += 2.0 * e * f1[k];
            s2 += 2.0 * (e * f2[k] + f1[k] * f1[k]);
        }
        total.v += 0.5 * sv;
        total.d1 += 0.5 * s1;
        total.d2 += 0.5 * s2;
    }
    const double n = static_cast<double>(samples.size());
    return {total.v / n, total.d1 / n, total.d2 / n};
}

} // namespace sphnet
