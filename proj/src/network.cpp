#include "evitram/network.hpp"

#include <cmath>

namespace evitram {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::linear;
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softmax") return Activation::softmax;
    throw config_error("unknown activation: " + name);
}

LayerParams glorot_init(int in_width, int out_width, Rng& rng) {
    double limit = std::sqrt(6.0 / (in_width + out_width));
    LayerParams p;
    p.W.resize(in_width, out_width);
    for (int i = 0; i < in_width; ++i)
        for (int j = 0; j < out_width; ++j)
            p.W(i, j) = rng.uniform(-limit, limit);
    p.b = Vector::Zero(out_width);
    return p;
}

Network make_network(const std::vector<LayerSpec>& layers, Rng& rng) {
    if (layers.empty()) throw config_error("make_network: empty layer list");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.in_width <= 0 || l.out_width <= 0)
            throw config_error("make_network: layer " + std::to_string(i) +
                               " has non-positive width");
        if (i + 1 < layers.size()) {
            if (l.out_width != layers[i + 1].in_width)
                throw config_error("make_network: layer " + std::to_string(i) +
                                   " out_width " + std::to_string(l.out_width) +
                                   " does not feed layer " + std::to_string(i + 1) +
                                   " in_width " + std::to_string(layers[i + 1].in_width));
            if (l.activation == Activation::softmax)
                throw config_error("make_network: softmax only allowed on the final layer");
        }
    }
    Network net;
    net.layers = layers;
    net.params.reserve(layers.size());
    for (const LayerSpec& l : layers)
        net.params.push_back(glorot_init(l.in_width, l.out_width, rng));
    return net;
}

std::size_t param_count(const Network& net) {
    std::size_t n = 0;
    for (const LayerParams& p : net.params)
        n += static_cast<std::size_t>(p.W.size()) + static_cast<std::size_t>(p.b.size());
    return n;
}

Grads zero_grads_like(const Params& params) {
    Grads g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        g[i].W = Matrix::Zero(params[i].W.rows(), params[i].W.cols());
        g[i].b = Vector::Zero(params[i].b.size());
    }
    return g;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double m = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

namespace {

Matrix apply_activation(Activation a, const Matrix& pre) {
    switch (a) {
        case Activation::linear: return pre;
        case Activation::relu: return pre.cwiseMax(0.0);
        case Activation::sigmoid:
            return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
        case Activation::softmax: return softmax_rows(pre);
    }
    return pre;
}

// dL/dpre given dL/dpost; relies on pre/post from the forward pass.
Matrix activation_backward(Activation a, const Matrix& g_post, const Matrix& pre,
                           const Matrix& post) {
    switch (a) {
        case Activation::linear:
            return g_post;
        case Activation::relu:
            return (pre.array() > 0.0).select(g_post, 0.0);
        case Activation::sigmoid:
            return (g_post.array() * post.array() * (1.0 - post.array())).matrix();
        case Activation::softmax: {
            // Row-wise Jacobian product: g_pre = s .* (g - (g . s))
            Matrix g_pre(post.rows(), post.cols());
            for (Eigen::Index r = 0; r < post.rows(); ++r) {
                double dot = g_post.row(r).dot(post.row(r));
                g_pre.row(r) =
                    (post.row(r).array() * (g_post.row(r).array() - dot)).matrix();
            }
            return g_pre;
        }
    }
    return g_post;
}

}  // namespace

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache) {
    if (x.cols() != net.input_width())
        throw std::invalid_argument("forward: layer 0 expects input width " +
                                    std::to_string(net.input_width()) + ", got " +
                                    std::to_string(x.cols()));
    if (cache) {
        cache->input = x;
        cache->pre.clear();
        cache->post.clear();
        cache->pre.reserve(net.layers.size());
        cache->post.reserve(net.layers.size());
    }
    Matrix cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (cur.cols() != net.layers[i].in_width)
            throw std::invalid_argument("forward: layer " + std::to_string(i) +
                                        " expects input width " +
                                        std::to_string(net.layers[i].in_width) + ", got " +
                                        std::to_string(cur.cols()));
        Matrix pre = cur * net.params[i].W;
        pre.rowwise() += net.params[i].b.transpose();
        Matrix post = apply_activation(net.layers[i].activation, pre);
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        cur = std::move(post);
    }
    return cur;
}

BackwardResult backward(const Network& net, const ForwardCache& cache,
                        const Matrix& loss_grad) {
    const std::size_t L = net.layers.size();
    if (cache.pre.size() != L || cache.post.size() != L)
        throw std::logic_error("backward: cache does not match network (layer count)");
    if (cache.input.cols() != net.input_width())
        throw std::logic_error("backward: cache does not match network (input width)");
    if (loss_grad.rows() != cache.input.rows() ||
        loss_grad.cols() != net.output_width())
        throw std::logic_error("backward: loss_grad shape does not match network output");

    BackwardResult res;
    res.grads.resize(L);
    Matrix g = loss_grad;  // dL/dpost of current layer
    for (std::size_t li = L; li-- > 0;) {
        const LayerSpec& spec = net.layers[li];
        if (cache.pre[li].cols() != spec.out_width)
            throw std::logic_error("backward: cache does not match network (layer " +
                                   std::to_string(li) + ")");
        Matrix g_pre = activation_backward(spec.activation, g, cache.pre[li], cache.post[li]);
        const Matrix& in = (li == 0) ? cache.input : cache.post[li - 1];
        res.grads[li].W.noalias() = in.transpose() * g_pre;
        res.grads[li].b = g_pre.colwise().sum().transpose();
        g.noalias() = g_pre * net.params[li].W.transpose();
    }
    res.input_grad = std::move(g);
    return res;
}

}  // namespace evitram
