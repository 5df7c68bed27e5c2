#include <catch2/catch.hpp>

#include "test_support.hpp"

using namespace sphnet;
using testsup::fd_gradients;
using testsup::min_preactivation;
using testsup::mixed_close;
using testsup::naive_loss;
using testsup::random_samples;
using testsup::random_sphere_point;
using testsup::random_vector;

namespace {

NetworkParams random_net(Rng& rng, const std::vector<int>& dims, double mu = 1.0) {
    std::vector<SpherePoint> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        layers.push_back(random_sphere_point(rng, dims[i + 1], dims[i], mu));
    return NetworkParams(std::move(layers));
}

struct KinkFreeDraw {
    std::uint64_t seed;
    NetworkParams net;
    std::vector<Sample> samples;
};

/// First seed whose draw keeps all pre-activations clear of the ReLU kink by
/// more than the finite-difference step can shift them.
KinkFreeDraw draw_with_kink_margin(const std::vector<int>& dims, int n_samples, double fd_step) {
    for (std::uint64_t seed = 0;; ++seed) {
        REQUIRE(seed < 1000);
        Rng rng(seed);
        NetworkParams net = random_net(rng, dims);
        std::vector<Sample> samples = random_samples(rng, n_samples, dims.front(), dims.back());
        for (Sample& s : samples) {
            const double n = norm(s.x);
            if (n < 1e-3) s.x[0] = 1.0;
            const double n2 = norm(s.x);
            for (double& v : s.x) v /= n2; // unit inputs, as after the scaling pass
        }
        if (testsup::kink_margin_ok(net, samples, fd_step, 4.0))
            return {seed, std::move(net), std::move(samples)};
    }
}

} // namespace

TEST_CASE("network construction validates the shape chain", "[network]") {
    Rng rng(31);
    std::vector<SpherePoint> bad;
    bad.push_back(random_sphere_point(rng, 3, 2, 1.0));
    bad.push_back(random_sphere_point(rng, 2, 4, 1.0)); // expects input dim 4, gets 3
    CHECK_THROWS_AS(NetworkParams(std::move(bad)), dimension_error);
}

TEST_CASE("forward on zero input is zero", "[network]") {
    Rng rng(32);
    NetworkParams net = random_net(rng, {4, 6, 5, 2});
    const LatentTrace tr = forward(net, Vector(4, 0.0));
    for (double v : tr.output) CHECK(v == 0.0);
}

TEST_CASE("single layer network is linear (no activation on the last layer)", "[network]") {
    NetworkParams net({SpherePoint::rescaled(Matrix{{2, 0}, {0, 2}}, 1.0)});
    const LatentTrace tr = forward(net, Vector{1.0, 0.0});
    CHECK(tr.output[0] == net.layer(0).weights()(0, 0));
    CHECK(tr.output[1] == net.layer(0).weights()(1, 0));
    // negative entries pass through untouched
    const LatentTrace tr2 = forward(net, Vector{-1.0, 0.0});
    CHECK(tr2.output[0] == -net.layer(0).weights()(0, 0));
}

TEST_CASE("forward output norm respects the gain bound", "[network]") {
    Rng rng(33);
    for (int rep = 0; rep < 50; ++rep) {
        NetworkParams net = random_net(rng, {5, 7, 6, 3});
        const double bound = lipschitz_bound(net);
        const Vector x = random_vector(rng, 5, 2.0);
        const LatentTrace tr = forward(net, x);
        CHECK(norm(tr.output) <= bound * norm(x) * (1.0 + 1e-9) + 1e-12);
    }
}

TEST_CASE("latent norms obey the layerwise operator-norm chain", "[network]") {
    Rng rng(34);
    NetworkParams net = random_net(rng, {4, 8, 6, 5, 2});
    for (int rep = 0; rep < 50; ++rep) {
        const Vector x = random_vector(rng, 4, 1.5);
        const LatentTrace tr = forward(net, x);
        double chain = norm(x);
        for (std::size_t l = 1; l < tr.h.size(); ++l) {
            chain *= op_norm(net.layer(l - 1).weights()).value;
            CHECK(norm(tr.h[l]) <= chain * (1.0 + 1e-9) + 1e-12);
        }
    }
}

TEST_CASE("loss basics", "[network]") {
    // a single pair predicted as zero with ||y|| = 2 costs exactly 2
    NetworkParams net({SpherePoint(Matrix{{1, 0}, {0, 1}}, std::sqrt(2.0))});
    std::vector<Sample> pairs{{Vector{0.0, 0.0}, Vector{2.0, 0.0}}};
    CHECK(loss(net, pairs) == 2.0);

    // exact interpolant costs zero
    std::vector<Sample> fit{{Vector{1.0, 0.0}, Vector{1.0, 0.0}},
                            {Vector{0.0, 2.0}, Vector{0.0, 2.0}}};
    CHECK(loss(net, fit) == 0.0);

    CHECK_THROWS_AS(loss(net, std::vector<Sample>{}), data_error);
}

TEST_CASE("loss matches the naive per-sample oracle", "[network]") {
    Rng rng(35);
    for (int rep = 0; rep < 20; ++rep) {
        NetworkParams net = random_net(rng, {6, 9, 4});
        const std::vector<Sample> samples = random_samples(rng, 17, 6, 4);
        std::vector<Matrix> weights;
        for (const SpherePoint& l : net.layers()) weights.push_back(l.weights());
        CHECK(loss(net, samples) == Approx(naive_loss(weights, samples)).epsilon(1e-12));
    }
}

TEST_CASE("gradients vanish at an exact interpolant", "[network]") {
    NetworkParams net({SpherePoint::rescaled(Matrix{{1, 2}, {-1, 3}}, 1.0)});
    std::vector<Sample> pairs;
    Rng rng(36);
    for (int i = 0; i < 5; ++i) {
        Vector x = random_vector(rng, 2);
        Vector y;
        matvec(net.layer(0).weights(), x, y);
        pairs.push_back({std::move(x), std::move(y)});
    }
    for (const Matrix& g : grad_layerwise(net, pairs)) CHECK(frob_norm(g) <= 1e-15);
}

TEST_CASE("single linear layer gradient is the residual outer product", "[network]") {
    Rng rng(37);
    const SpherePoint w = random_sphere_point(rng, 3, 4, 1.0);
    NetworkParams net({w});
    const Vector x = random_vector(rng, 4);
    const Vector y = random_vector(rng, 3);
    const std::vector<Sample> one{{x, y}};

    Vector f;
    matvec(w.weights(), x, f);
    Matrix expected(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            expected(i, j) = (f[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) *
                             x[static_cast<std::size_t>(j)];

    const std::vector<Matrix> grads = grad_layerwise(net, one);
    CHECK(frob_norm(grads[0] - expected) <= 1e-14 * frob_norm(expected));
}

TEST_CASE("gradients match central finite differences, small net", "[network][oracle]") {
    KinkFreeDraw d = draw_with_kink_margin({5, 8, 6, 3}, 20, 1e-5);
    INFO("seed " << d.seed);
    const std::vector<Matrix> grads = grad_layerwise(d.net, d.samples);
    const std::vector<Matrix> fd = fd_gradients(d.net, d.samples, 1e-5);
    for (std::size_t l = 0; l < grads.size(); ++l)
        for (int i = 0; i < grads[l].rows(); ++i)
            for (int j = 0; j < grads[l].cols(); ++j)
                CHECK(mixed_close(grads[l](i, j), fd[l](i, j), 1e-5));
}

TEST_CASE("gradients match central finite differences, reference dims", "[network][oracle]") {
    KinkFreeDraw d = draw_with_kink_margin({12, 25, 30, 15, 3}, 50, 1e-5);
    INFO("seed " << d.seed);
    const std::vector<Matrix> grads = grad_layerwise(d.net, d.samples);
    const std::vector<Matrix> fd = fd_gradients(d.net, d.samples, 1e-5);
    double worst = 0.0;
    for (std::size_t l = 0; l < grads.size(); ++l)
        for (int i = 0; i < grads[l].rows(); ++i)
            for (int j = 0; j < grads[l].cols(); ++j) {
                const double err = std::abs(grads[l](i, j) - fd[l](i, j)) /
                                   (1.0 + std::max(std::abs(grads[l](i, j)),
                                                   std::abs(fd[l](i, j))));
                worst = std::max(worst, err);
            }
    CHECK(worst <= 1e-5);
}

TEST_CASE("lipschitz_bound multiplies layer operator norms", "[network]") {
    // identity-like layers with operator norm 1
    NetworkParams ident({SpherePoint(Matrix{{1, 0}, {0, 1}}, std::sqrt(2.0)),
                         SpherePoint(Matrix{{1, 0}, {0, 1}}, std::sqrt(2.0))});
    CHECK(lipschitz_bound(ident) == Approx(1.0).epsilon(1e-10));

    // operator norms 0.5 and 3 multiply to 1.5
    NetworkParams two({SpherePoint(Matrix{{0.5, 0}, {0, 0.25}}, std::sqrt(0.3125)),
                       SpherePoint(Matrix{{3, 0}, {0, 1}}, std::sqrt(10.0))});
    CHECK(lipschitz_bound(two) == Approx(1.5).epsilon(1e-9));
}

TEST_CASE("lipschitz bound dominates output differences (fuzzed)", "[network]") {
    Rng rng(38);
    NetworkParams net = random_net(rng, {4, 6, 6, 3});
    const double bound = lipschitz_bound(net);
    for (int rep = 0; rep < 1000; ++rep) {
        const Vector x1 = random_vector(rng, 4, 2.0);
        const Vector x2 = random_vector(rng, 4, 2.0);
        const Vector f1 = forward(net, x1).output;
        const Vector f2 = forward(net, x2).output;
        double df = 0.0, dx = 0.0;
        for (std::size_t k = 0; k < f1.size(); ++k) df += (f1[k] - f2[k]) * (f1[k] - f2[k]);
        for (std::size_t k = 0; k < x1.size(); ++k) dx += (x1[k] - x2[k]) * (x1[k] - x2[k]);
        CHECK(std::sqrt(df) <= bound * std::sqrt(dx) * (1.0 + 1e-9) + 1e-12);
    }
}
