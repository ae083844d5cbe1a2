#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "evitram/losses.hpp"
#include "evitram/network.hpp"
#include "oracles.hpp"

using namespace evitram;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

Matrix random_stochastic(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform() + 0.05;
            sum += m(i, j);
        }
        m.row(i) /= sum;
    }
    return m;
}

}  // namespace

TEST_CASE("make_network shapes, Glorot bounds, zero biases") {
    Rng rng(1);
    const Network net = make_network({{7, 4, Activation::relu}, {4, 3, Activation::linear}}, rng);
    REQUIRE(net.layers.size() == 2);
    CHECK(net.input_width() == 7);
    CHECK(net.output_width() == 3);
    CHECK(net.params[0].W.rows() == 7);
    CHECK(net.params[0].W.cols() == 4);
    CHECK(net.params[1].W.rows() == 4);
    CHECK(net.params[1].W.cols() == 3);
    CHECK(param_count(net) == 7 * 4 + 4 + 4 * 3 + 3);

    const double limit0 = std::sqrt(6.0 / (7 + 4));
    CHECK(net.params[0].W.cwiseAbs().maxCoeff() <= limit0);
    CHECK(net.params[0].W.cwiseAbs().maxCoeff() > 0.0);
    CHECK(net.params[0].b.cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.params[1].b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_network rejects bad stacks") {
    Rng rng(2);
    CHECK_THROWS_AS(make_network({}, rng), config_error);
    CHECK_THROWS_AS(make_network({{0, 3, Activation::linear}}, rng), config_error);
    // Width chain must be consistent between layers.
    CHECK_THROWS_AS(make_network({{3, 4, Activation::relu}, {5, 2, Activation::linear}}, rng),
                    config_error);
    // Softmax is only legal on the final layer.
    CHECK_THROWS_AS(
        make_network({{3, 4, Activation::softmax}, {4, 2, Activation::linear}}, rng),
        config_error);
    CHECK_NOTHROW(make_network({{3, 4, Activation::relu}, {4, 2, Activation::softmax}}, rng));
}

TEST_CASE("identity linear layer reproduces its input") {
    Network net;
    net.layers = {{3, 3, Activation::linear}};
    net.params.push_back({Matrix::Identity(3, 3), Vector::Zero(3)});
    Matrix x(2, 3);
    x << 1, -2, 3, 0.5, 0, -1;
    CHECK((forward(net, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("relu zeroes negative pre-activations") {
    Network net;
    net.layers = {{2, 2, Activation::relu}};
    net.params.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
    Matrix x(1, 2);
    x << -5.0, 2.0;
    const Matrix y = forward(net, x);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 2.0);
}

TEST_CASE("sigmoid maps into (0,1) with correct midpoint") {
    Network net;
    net.layers = {{1, 1, Activation::sigmoid}};
    net.params.push_back({Matrix::Identity(1, 1), Vector::Zero(1)});
    Matrix x(3, 1);
    x << 0.0, 100.0, -100.0;
    const Matrix y = forward(net, x);
    CHECK(y(0, 0) == doctest::Approx(0.5));
    CHECK(y(1, 0) == doctest::Approx(1.0));
    CHECK(y(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to 1 and survive large logits") {
    Matrix logits(2, 3);
    logits << 1000.0, 999.0, 998.0, -1000.0, 0.0, 3.0;
    const Matrix s = softmax_rows(logits);
    for (Eigen::Index i = 0; i < 2; ++i) CHECK(s.row(i).sum() == doctest::Approx(1.0));
    CHECK(s.allFinite());
    CHECK(s(0, 0) > s(0, 1));
    CHECK(s(1, 2) > s(1, 1));
}

TEST_CASE("forward rejects width mismatches naming the layer") {
    Rng rng(3);
    Network net = make_network({{4, 2, Activation::linear}}, rng);
    const Matrix x = Matrix::Zero(1, 5);
    CHECK_THROWS_WITH_AS(forward(net, x), doctest::Contains("layer 0"), std::invalid_argument);
}

TEST_CASE("backward needs a cache from the same forward pass") {
    Rng rng(4);
    Network net = make_network({{3, 2, Activation::linear}}, rng);
    ForwardCache cache;
    forward(net, Matrix::Zero(2, 3), &cache);
    const Matrix bad_grad = Matrix::Zero(2, 5);
    CHECK_THROWS_AS(backward(net, cache, bad_grad), std::logic_error);
}

TEST_CASE("hand-computed gradient of a 1-layer linear net") {
    // y = x W + b, loss = mse(y, t) with one sample: dL/dW = x^T * 2(y - t),
    // dL/db = 2(y - t), dL/dx = 2(y - t) W^T.
    Network net;
    net.layers = {{2, 2, Activation::linear}};
    Matrix w(2, 2);
    w << 1.0, 2.0, -1.0, 0.5;
    Vector b(2);
    b << 0.25, -0.5;
    net.params.push_back({w, b});

    Matrix x(1, 2);
    x << 2.0, 3.0;
    Matrix t(1, 2);
    t << 0.0, 0.0;

    ForwardCache cache;
    const Matrix y = forward(net, x, &cache);
    // y = [2*1 + 3*(-1) + 0.25, 2*2 + 3*0.5 - 0.5] = [-0.75, 5.0]
    CHECK(y(0, 0) == doctest::Approx(-0.75));
    CHECK(y(0, 1) == doctest::Approx(5.0));

    const BackwardResult back = backward(net, cache, mse_grad(y, t));
    const Matrix g = 2.0 * (y - t);  // N = 1
    CHECK(back.grads[0].W(0, 0) == doctest::Approx(x(0, 0) * g(0, 0)));
    CHECK(back.grads[0].W(0, 1) == doctest::Approx(x(0, 0) * g(0, 1)));
    CHECK(back.grads[0].W(1, 0) == doctest::Approx(x(0, 1) * g(0, 0)));
    CHECK(back.grads[0].W(1, 1) == doctest::Approx(x(0, 1) * g(0, 1)));
    CHECK(back.grads[0].b[0] == doctest::Approx(g(0, 0)));
    CHECK(back.grads[0].b[1] == doctest::Approx(g(0, 1)));
    CHECK(back.input_grad(0, 0) == doctest::Approx(g(0, 0) * w(0, 0) + g(0, 1) * w(0, 1)));
    CHECK(back.input_grad(0, 1) == doctest::Approx(g(0, 0) * w(1, 0) + g(0, 1) * w(1, 1)));
}

TEST_CASE("backprop matches finite differences under an mse head") {
    Rng rng(100);
    for (int trial = 0; trial < 8; ++trial) {
        Network net = make_network({{3, 4, Activation::relu},
                                    {4, 3, Activation::sigmoid},
                                    {3, 2, Activation::linear}},
                                   rng);
        // Shift inputs away from relu kinks so finite differences are valid.
        const Matrix x = random_matrix(4, 3, rng);
        const Matrix t = random_matrix(4, 2, rng);

        ForwardCache cache;
        const Matrix y = forward(net, x, &cache);
        const BackwardResult back = backward(net, cache, mse_grad(y, t));

        auto loss = [&]() { return mse(forward(net, x), t); };
        CHECK(oracle::max_grad_error(net, back.grads, loss) < 1e-4);

        // Input gradient against finite differences as well.
        Matrix x_mut = x;
        auto loss_x = [&]() { return mse(forward(net, x_mut), t); };
        double worst = 0.0;
        for (Eigen::Index i = 0; i < x_mut.rows(); ++i)
            for (Eigen::Index j = 0; j < x_mut.cols(); ++j) {
                const double fd = oracle::central_diff(x_mut(i, j), 1e-5, loss_x);
                worst = std::max(worst, oracle::rel_err(fd, back.input_grad(i, j)));
            }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("backprop matches finite differences under a cross-entropy head") {
    Rng rng(200);
    for (int trial = 0; trial < 8; ++trial) {
        Network net = make_network({{4, 3, Activation::relu}, {3, 3, Activation::softmax}}, rng);
        const Matrix x = random_matrix(5, 4, rng);
        const Matrix p = random_stochastic(5, 3, rng);

        ForwardCache cache;
        const Matrix q = forward(net, x, &cache);
        const BackwardResult back = backward(net, cache, cross_entropy_grad(p, q));

        auto loss = [&]() { return cross_entropy(p, forward(net, x)); };
        CHECK(oracle::max_grad_error(net, back.grads, loss) < 1e-4);
    }
}

TEST_CASE("activation names round-trip") {
    for (Activation a : {Activation::linear, Activation::relu, Activation::sigmoid,
                         Activation::softmax})
        CHECK(activation_from_name(activation_name(a)) == a);
    CHECK_THROWS_AS(activation_from_name("tanh"), config_error);
}
