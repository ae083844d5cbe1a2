#include "evitram/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evitram/losses.hpp"

namespace evitram {

Standardizer Standardizer::fit(const Matrix& x) {
    if (x.rows() == 0) throw data_error("Standardizer::fit: empty matrix");
    Standardizer s;
    s.mean = x.colwise().mean();
    RowVector var = (x.rowwise() - s.mean).array().square().colwise().mean();
    s.std = var.array().sqrt();
    for (Eigen::Index j = 0; j < s.std.size(); ++j)
        if (s.std[j] < 1e-8) s.std[j] = 1.0;
    return s;
}

Standardizer Standardizer::identity(int width) {
    Standardizer s;
    s.mean = RowVector::Zero(width);
    s.std = RowVector::Ones(width);
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size())
        throw data_error("Standardizer::apply: expected " + std::to_string(mean.size()) +
                         " columns, got " + std::to_string(x.cols()));
    return (x.rowwise() - mean).array().rowwise() / std.array();
}

Matrix Standardizer::unapply(const Matrix& x) const {
    if (x.cols() != mean.size())
        throw data_error("Standardizer::unapply: expected " + std::to_string(mean.size()) +
                         " columns, got " + std::to_string(x.cols()));
    return (x.array().rowwise() * std.array()).matrix().rowwise() + mean;
}

void validate(const DenoisingAEConfig& cfg) {
    if (cfg.input_width <= 0) throw config_error("autoencoder: input_width must be positive");
    if (cfg.latent_width <= 0) throw config_error("autoencoder: latent_width must be positive");
    for (int w : cfg.hidden_widths)
        if (w <= 0) throw config_error("autoencoder: hidden widths must be positive");
    if (!(cfg.corruption_rate >= 0.0 && cfg.corruption_rate < 1.0))
        throw config_error("autoencoder: corruption_rate must be in [0, 1)");
    if (cfg.epochs < 0) throw config_error("autoencoder: epochs must be non-negative");
    validate(cfg.optimizer);
}

Matrix corrupt(const Matrix& x, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw config_error("corrupt: rate must be in [0, 1)");
    Matrix out = x;
    // One draw per entry even when rate == 0, so downstream rng streams do
    // not depend on the corruption setting.
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            if (rng.uniform() < rate) out(i, j) = 0.0;
    return out;
}

namespace {

Network build_encoder(const DenoisingAEConfig& cfg, Rng& rng) {
    std::vector<LayerSpec> layers;
    int in = cfg.input_width;
    for (int w : cfg.hidden_widths) {
        layers.push_back({in, w, Activation::relu});
        in = w;
    }
    layers.push_back({in, cfg.latent_width, Activation::linear});
    return make_network(layers, rng);
}

Network build_decoder(const DenoisingAEConfig& cfg, Rng& rng) {
    std::vector<LayerSpec> layers;
    int in = cfg.latent_width;
    for (auto it = cfg.hidden_widths.rbegin(); it != cfg.hidden_widths.rend(); ++it) {
        layers.push_back({in, *it, Activation::relu});
        in = *it;
    }
    layers.push_back({in, cfg.input_width, Activation::linear});
    return make_network(layers, rng);
}

}  // namespace

std::vector<double> continue_training(DenoisingAutoencoder& ae, const Matrix& x, int epochs,
                                      const OptimizerConfig& opt, double corruption_rate,
                                      Rng& rng) {
    validate(opt);
    if (epochs < 0) throw config_error("continue_training: epochs must be non-negative");
    if (x.cols() != ae.config.input_width)
        throw data_error("continue_training: expected " +
                         std::to_string(ae.config.input_width) + " columns, got " +
                         std::to_string(x.cols()));
    const int n = static_cast<int>(x.rows());
    if (n < opt.batch_size)
        throw config_error("continue_training: batch_size " + std::to_string(opt.batch_size) +
                           " exceeds sample count " + std::to_string(n));

    const Matrix x_std = ae.stats.apply(x);
    OptimizerState enc_state, dec_state;
    std::vector<double> trace;
    trace.reserve(epochs);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const std::vector<int> perm = rng.permutation(n);
        double sq_sum = 0.0;
        for (int start = 0; start < n; start += opt.batch_size) {
            const int count = std::min(opt.batch_size, n - start);
            const Matrix clean = take_rows(x_std, perm.data() + start, count);
            const Matrix noisy = corrupt(clean, corruption_rate, rng);

            ForwardCache enc_cache, dec_cache;
            const Matrix z = forward(ae.encoder, noisy, &enc_cache);
            const Matrix recon = forward(ae.decoder, z, &dec_cache);
            const double batch_loss = mse(recon, clean);

            const Matrix loss_grad = mse_grad(recon, clean);
            BackwardResult dec_back = backward(ae.decoder, dec_cache, loss_grad);
            BackwardResult enc_back = backward(ae.encoder, enc_cache, dec_back.input_grad);

            optimizer_step(ae.encoder.params, enc_back.grads, opt, enc_state);
            optimizer_step(ae.decoder.params, dec_back.grads, opt, dec_state);

            sq_sum += batch_loss * count;
        }
        const double epoch_loss = sq_sum / n;
        if (!std::isfinite(epoch_loss))
            throw divergence_error("training diverged at epoch " + std::to_string(epoch));
        trace.push_back(epoch_loss);
    }
    return trace;
}

PretrainResult pretrain(const Matrix& x, const DenoisingAEConfig& cfg, Rng& rng) {
    validate(cfg);
    if (x.cols() != cfg.input_width)
        throw data_error("pretrain: expected " + std::to_string(cfg.input_width) +
                         " columns, got " + std::to_string(x.cols()));
    if (x.rows() == 0) throw data_error("pretrain: empty dataset");

    PretrainResult result;
    result.model.config = cfg;
    result.model.stats = Standardizer::fit(x);
    result.model.encoder = build_encoder(cfg, rng);
    result.model.decoder = build_decoder(cfg, rng);
    result.trace = continue_training(result.model, x, cfg.epochs, cfg.optimizer,
                                     cfg.corruption_rate, rng);
    return result;
}

Matrix encode(const DenoisingAutoencoder& ae, const Matrix& x) {
    return forward(ae.encoder, ae.stats.apply(x));
}

Matrix reconstruct(const DenoisingAutoencoder& ae, const Matrix& x) {
    return ae.stats.unapply(forward(ae.decoder, forward(ae.encoder, ae.stats.apply(x))));
}

double reconstruction_mse(const DenoisingAutoencoder& ae, const Matrix& x) {
    const Matrix x_std = ae.stats.apply(x);
    return mse(forward(ae.decoder, forward(ae.encoder, x_std)), x_std);
}

}  // namespace evitram
