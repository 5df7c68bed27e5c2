#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sphnet/matrix.hpp"
#include "sphnet/sphere.hpp"

namespace sphnet {

/// Training pair in input/target space.
struct Sample {
    Vector x;
    Vector y;
};

// Activation policies. The contract is the 1-Lipschitz, |rho(z)| <= |z|,
// |rho'(z)| <= 1 family; ReLU is the one the library ships. The slope at a
// kink is the subgradient 0, matching the jet rule, so the two derivative
// routes agree everywhere.
struct relu_activation {
    static double value(double z) { return z > 0.0 ? z : 0.0; }
    static double slope(double z) { return z > 0.0 ? 1.0 : 0.0; }
};

/// Test-only policy: turns the model into a purely linear map.
struct identity_activation {
    static double value(double z) { return z; }
    static double slope(double) { return 1.0; }
};

/// Bias-free fully-connected network whose layer weights live on Frobenius
/// spheres. Layer i maps R^{d_{i-1}} -> R^{d_i} as x -> W_i x; all layers but
/// the last are followed by the activation.
class NetworkParams {
public:
    explicit NetworkParams(std::vector<SpherePoint> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw contract_error("NetworkParams: at least one layer required");
        dims_.push_back(layers_.front().cols());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (i > 0 && layers_[i].cols() != layers_[i - 1].rows())
                throw dimension_error("NetworkParams: layer " + std::to_string(i + 1) +
                                      " expects input dim " + std::to_string(layers_[i].cols()) +
                                      " but previous layer outputs " +
                                      std::to_string(layers_[i - 1].rows()));
            dims_.push_back(layers_[i].rows());
        }
    }

    std::size_t depth() const { return layers_.size(); } // number of weight layers L
    const std::vector<int>& dims() const { return dims_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }

    const SpherePoint& layer(std::size_t i) const { return layers_[i]; }
    const std::vector<SpherePoint>& layers() const { return layers_; }

    std::vector<double> mus() const {
        std::vector<double> m;
        m.reserve(layers_.size());
        for (const auto& l : layers_) m.push_back(l.mu());
        return m;
    }

    /// Replaces layer i, keeping the shape chain intact.
    void set_layer(std::size_t i, SpherePoint p) {
        if (p.rows() != layers_[i].rows() || p.cols() != layers_[i].cols())
            throw dimension_error("NetworkParams::set_layer: shape change not allowed");
        layers_[i] = std::move(p);
    }

private:
    std::vector<SpherePoint> layers_;
    std::vector<int> dims_;
};

/// Forward-pass record: latent states h_0..h_{L-1}, pre-activations
/// z_1..z_L (z_L is the output; the last layer has no activation).
struct LatentTrace {
    std::vector<Vector> h;
    std::vector<Vector> preact;
    Vector output;
};

template <typename Activation = relu_activation>
LatentTrace forward(const NetworkParams& net, const Vector& x) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw dimension_error("forward: input length " + std::to_string(x.size()) +
                              " vs d0 = " + std::to_string(net.input_dim()));
    const std::size_t layer_count = net.depth();
    LatentTrace tr;
    tr.h.reserve(layer_count);
    tr.preact.reserve(layer_count);
    tr.h.push_back(x);
    for (std::size_t l = 0; l < layer_count; ++l) {
        Vector z;
        matvec(net.layer(l).weights(), tr.h.back(), z);
        tr.preact.push_back(z);
        if (l + 1 < layer_count) {
            for (double& v : z) v = Activation::value(v);
            tr.h.push_back(std::move(z));
        } else {
            tr.output = std::move(z);
        }
    }
    return tr;
}

namespace detail {

/// Shared scratch so the batch loops do not allocate per sample.
struct ForwardWorkspace {
    std::vector<Vector> h;      // h_0..h_{L-1}
    std::vector<Vector> preact; // z_1..z_L
};

template <typename Activation>
void forward_into(const NetworkParams& net, const Vector& x, ForwardWorkspace& ws) {
    const std::size_t layer_count = net.depth();
    ws.h.resize(layer_count);
    ws.preact.resize(layer_count);
    ws.h[0] = x;
    for (std::size_t l = 0; l < layer_count; ++l) {
        matvec(net.layer(l).weights(), ws.h[l], ws.preact[l]);
        if (l + 1 < layer_count) {
            ws.h[l + 1] = ws.preact[l];
            for (double& v : ws.h[l + 1]) v = Activation::value(v);
        }
    }
}

inline double half_squared_error(const Vector& f, const Vector& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double e = f[k] - y[k];
        s += e * e;
    }
    return 0.5 * s;
}

} // namespace detail

inline void check_batch(const NetworkParams& net, const std::vector<Sample>& samples,
                        const char* where) {
    if (samples.empty()) throw data_error(std::string(where) + ": empty dataset");
    for (const Sample& s : samples) {
        if (static_cast<int>(s.x.size()) != net.input_dim() ||
            static_cast<int>(s.y.size()) != net.output_dim())
            throw dimension_error(std::string(where) + ": sample dims " +
                                  std::to_string(s.x.size()) + "->" + std::to_string(s.y.size()) +
                                  " vs network " + std::to_string(net.input_dim()) + "->" +
                                  std::to_string(net.output_dim()));
    }
}

/// Mean over the batch of the half squared error, full batch.
template <typename Activation = relu_activation>
double loss(const NetworkParams& net, const std::vector<Sample>& samples) {
    check_batch(net, samples, "loss");
    detail::ForwardWorkspace ws;
    double total = 0.0;
    for (const Sample& s : samples) {
        detail::forward_into<Activation>(net, s.x, ws);
        total += detail::half_squared_error(ws.preact.back(), s.y);
    }
    return total / static_cast<double>(samples.size());
}

/// Ambient gradient of the mean loss with respect to every layer, by reverse
/// accumulation through the stored trace. Samples are processed in dataset
/// order into per-layer accumulators, divided by the batch size at the end.
template <typename Activation = relu_activation>
std::pair<double, std::vector<Matrix>> loss_and_grad(const NetworkParams& net,
                                                     const std::vector<Sample>& samples) {
    check_batch(net, samples, "grad_layerwise");
    const std::size_t layer_count = net.depth();
    std::vector<Matrix> grads;
    grads.reserve(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l)
        grads.emplace_back(net.layer(l).rows(), net.layer(l).cols());

    detail::ForwardWorkspace ws;
    Vector delta, delta_prev;
    double total = 0.0;
    for (const Sample& s : samples) {
        detail::forward_into<Activation>(net, s.x, ws);
        const Vector& f = ws.preact.back();
        total += detail::half_squared_error(f, s.y);

        delta.resize(f.size());
        for (std::size_t k = 0; k < f.size(); ++k) delta[k] = f[k] - s.y[k];

        for (std::size_t l = layer_count; l-- > 0;) {
            add_outer(grads[l], 1.0, delta, ws.h[l]);
            if (l > 0) {
                matvec_transposed(net.layer(l).weights(), delta, delta_prev);
                const Vector& z = ws.preact[l - 1];
                for (std::size_t k = 0; k < delta_prev.size(); ++k)
                    delta_prev[k] *= Activation::slope(z[k]);
                std::swap(delta, delta_prev);
            }
        }
    }
    const double n = static_cast<double>(samples.size());
    for (Matrix& g : grads) g *= 1.0 / n;
    return {total / n, std::move(grads)};
}

template <typename Activation = relu_activation>
std::vector<Matrix> grad_layerwise(const NetworkParams& net, const std::vector<Sample>& samples) {
    return loss_and_grad<Activation>(net, samples).second;
}

/// Product of layer operator norms: certified Lipschitz constant and
/// input-output gain of the network.
inline double lipschitz_bound(const NetworkParams& net, const OpNormOptions& opts = {}) {
    double p = 1.0;
    for (const SpherePoint& l : net.layers()) p *= op_norm(l.weights(), opts).value;
    return p;
}

} // namespace sphnet
