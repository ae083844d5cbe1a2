#include "evitram/evitram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evitram/losses.hpp"

namespace evitram {

std::string transfer_mode_name(TransferMode m) {
    switch (m) {
        case TransferMode::joint: return "joint";
        case TransferMode::disjoint: return "disjoint";
    }
    throw config_error("unknown transfer mode");
}

TransferMode transfer_mode_from_name(const std::string& name) {
    if (name == "joint") return TransferMode::joint;
    if (name == "disjoint") return TransferMode::disjoint;
    throw config_error("unknown transfer mode '" + name + "'");
}

void validate(const TransferConfig& cfg) {
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
        throw config_error("transfer: lambda must be non-negative");
    if (cfg.epochs < 0) throw config_error("transfer: epochs must be non-negative");
    if (cfg.mode == TransferMode::disjoint && !(cfg.disjoint_lr_ratio > 1.0))
        throw config_error("transfer: disjoint_lr_ratio must exceed 1");
    validate(cfg.optimizer);
}

EviTramModel attach_heads(const DenoisingAutoencoder& base, int k, Rng& rng) {
    if (k <= 0) throw config_error("attach_heads: need at least one head");
    EviTramModel model;
    model.base = base;
    const int latent = base.encoder.output_width();
    model.heads.reserve(k);
    for (int j = 0; j < k; ++j)
        model.heads.push_back(make_network({{latent, latent, Activation::softmax}}, rng));
    return model;
}

void add_head(EviTramModel& model, Rng& rng) {
    const int latent = model.base.encoder.output_width();
    model.heads.push_back(make_network({{latent, latent, Activation::softmax}}, rng));
}

namespace {

void check_targets(const EviTramModel& model, const std::vector<Matrix>& zv_list,
                   Eigen::Index rows) {
    if (zv_list.size() != model.heads.size())
        throw config_error("evidence targets: expected " + std::to_string(model.heads.size()) +
                           " matrices, got " + std::to_string(zv_list.size()));
    const int latent = model.base.encoder.output_width();
    for (size_t j = 0; j < zv_list.size(); ++j) {
        if (zv_list[j].rows() != rows)
            throw data_error("evidence targets: source " + std::to_string(j) + " has " +
                             std::to_string(zv_list[j].rows()) + " rows, expected " +
                             std::to_string(rows));
        if (zv_list[j].cols() != latent)
            throw data_error("evidence targets: source " + std::to_string(j) + " has " +
                             std::to_string(zv_list[j].cols()) + " columns, expected " +
                             std::to_string(latent));
    }
}

}  // namespace

double evidence_loss(const EviTramModel& model, const Matrix& z,
                     const std::vector<Matrix>& zv_list) {
    if (model.heads.empty()) throw config_error("evidence_loss: model has no heads");
    check_targets(model, zv_list, z.rows());
    double sum = 0.0;
    for (size_t j = 0; j < model.heads.size(); ++j)
        sum += cross_entropy(zv_list[j], forward(model.heads[j], z));
    return sum / static_cast<double>(model.heads.size());
}

JointLoss joint_loss(const EviTramModel& model, const Matrix& x_batch,
                     const std::vector<Matrix>& zv_batch_list) {
    const Matrix x_std = model.base.stats.apply(x_batch);
    JointLoss out;
    out.l_ae = mse(forward(model.base.decoder, forward(model.base.encoder, x_std)), x_std);
    out.l_h = evidence_loss(model, forward(model.base.encoder, x_std), zv_batch_list);
    out.l_total = out.l_ae + model.lambda * out.l_h;
    return out;
}

JointBatchResult compute_joint_gradients(const EviTramModel& model, const Matrix& noisy,
                                         const Matrix& clean,
                                         const std::vector<Matrix>& zv_batches) {
    check_targets(model, zv_batches, noisy.rows());
    const int k = static_cast<int>(model.heads.size());

    JointBatchResult out;
    ForwardCache enc_cache, dec_cache;
    const Matrix z = forward(model.base.encoder, noisy, &enc_cache);
    const Matrix recon = forward(model.base.decoder, z, &dec_cache);
    out.l_ae = mse(recon, clean);

    BackwardResult dec_back = backward(model.base.decoder, dec_cache, mse_grad(recon, clean));
    Matrix z_grad = dec_back.input_grad;

    if (model.lambda != 0.0) {
        const double scale = model.lambda / k;
        out.head_grads.reserve(k);
        for (int j = 0; j < k; ++j) {
            ForwardCache head_cache;
            const Matrix q = forward(model.heads[j], z, &head_cache);
            out.l_h += cross_entropy(zv_batches[j], q) / k;
            const Matrix head_loss_grad = scale * cross_entropy_grad(zv_batches[j], q);
            BackwardResult head_back = backward(model.heads[j], head_cache, head_loss_grad);
            z_grad += head_back.input_grad;
            out.head_grads.push_back(std::move(head_back.grads));
        }
    } else {
        // Heads contribute no gradient; evaluate l_h only for the trace.
        for (int j = 0; j < k; ++j)
            out.l_h += cross_entropy(zv_batches[j], forward(model.heads[j], z)) / k;
    }

    BackwardResult enc_back = backward(model.base.encoder, enc_cache, z_grad);
    out.enc_grads = std::move(enc_back.grads);
    out.dec_grads = std::move(dec_back.grads);
    out.l_total = out.l_ae + model.lambda * out.l_h;
    return out;
}

namespace {

struct CommonSetup {
    Matrix x_std;
    double corruption = 0.0;
    int n = 0;
};

CommonSetup prepare_transfer(EviTramModel& model, const Matrix& x, const TransferConfig& cfg) {
    validate(cfg);
    if (model.heads.empty()) throw config_error("transfer: model has no heads");
    if (x.cols() != model.base.config.input_width)
        throw data_error("transfer: expected " + std::to_string(model.base.config.input_width) +
                         " columns, got " + std::to_string(x.cols()));
    check_targets(model, model.zv, x.rows());
    const int n = static_cast<int>(x.rows());
    if (n < cfg.optimizer.batch_size)
        throw config_error("transfer: batch_size " + std::to_string(cfg.optimizer.batch_size) +
                           " exceeds sample count " + std::to_string(n));
    model.lambda = cfg.lambda;
    CommonSetup s;
    s.x_std = model.base.stats.apply(x);
    s.corruption = cfg.corrupt_inputs ? model.base.config.corruption_rate : 0.0;
    s.n = n;
    return s;
}

TransferTrace transfer_joint(EviTramModel& model, const Matrix& x, const TransferConfig& cfg,
                             Rng& rng) {
    CommonSetup s = prepare_transfer(model, x, cfg);
    const int k = static_cast<int>(model.heads.size());

    OptimizerState enc_state, dec_state;
    std::vector<OptimizerState> head_states(k);
    TransferTrace trace;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> perm = rng.permutation(s.n);
        double ae_sum = 0.0, h_sum = 0.0;
        for (int start = 0; start < s.n; start += cfg.optimizer.batch_size) {
            const int count = std::min(cfg.optimizer.batch_size, s.n - start);
            const Matrix clean = take_rows(s.x_std, perm.data() + start, count);
            const Matrix noisy = corrupt(clean, s.corruption, rng);
            std::vector<Matrix> zv_b(k);
            for (int j = 0; j < k; ++j)
                zv_b[j] = take_rows(model.zv[j], perm.data() + start, count);

            JointBatchResult jb = compute_joint_gradients(model, noisy, clean, zv_b);
            optimizer_step(model.base.encoder.params, jb.enc_grads, cfg.optimizer, enc_state);
            optimizer_step(model.base.decoder.params, jb.dec_grads, cfg.optimizer, dec_state);
            if (model.lambda != 0.0)
                for (int j = 0; j < k; ++j)
                    optimizer_step(model.heads[j].params, jb.head_grads[j], cfg.optimizer,
                                   head_states[j]);
            trace.optimizer_applications += 1;

            ae_sum += jb.l_ae * count;
            h_sum += jb.l_h * count;
        }
        const double l_ae = ae_sum / s.n;
        const double l_h = h_sum / s.n;
        const double l_total = l_ae + cfg.lambda * l_h;
        if (!std::isfinite(l_total))
            throw divergence_error("transfer diverged at epoch " + std::to_string(epoch));
        trace.l_ae.push_back(l_ae);
        trace.l_h.push_back(l_h);
        trace.l_total.push_back(l_total);
    }
    return trace;
}

}  // namespace

TransferTrace transfer_disjoint(EviTramModel& model, const Matrix& x, const TransferConfig& cfg,
                                Rng& rng) {
    if (cfg.mode != TransferMode::disjoint)
        throw config_error("transfer_disjoint: cfg.mode must be disjoint");
    CommonSetup s = prepare_transfer(model, x, cfg);
    const int k = static_cast<int>(model.heads.size());

    OptimizerConfig evidence_opt = cfg.optimizer;
    evidence_opt.learning_rate = cfg.optimizer.learning_rate / cfg.disjoint_lr_ratio;

    // Each objective owns its optimizer state: the reconstruction step and
    // the evidence step are independent descent processes.
    OptimizerState ae_enc_state, ae_dec_state, h_enc_state;
    std::vector<OptimizerState> head_states(k);
    TransferTrace trace;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> perm = rng.permutation(s.n);
        double ae_sum = 0.0, h_sum = 0.0;
        for (int start = 0; start < s.n; start += cfg.optimizer.batch_size) {
            const int count = std::min(cfg.optimizer.batch_size, s.n - start);
            const Matrix clean = take_rows(s.x_std, perm.data() + start, count);
            const Matrix noisy = corrupt(clean, s.corruption, rng);

            // Step 1: reconstruction objective at the full learning rate.
            {
                ForwardCache enc_cache, dec_cache;
                const Matrix z = forward(model.base.encoder, noisy, &enc_cache);
                const Matrix recon = forward(model.base.decoder, z, &dec_cache);
                ae_sum += mse(recon, clean) * count;
                BackwardResult dec_back =
                    backward(model.base.decoder, dec_cache, mse_grad(recon, clean));
                BackwardResult enc_back =
                    backward(model.base.encoder, enc_cache, dec_back.input_grad);
                optimizer_step(model.base.encoder.params, enc_back.grads, cfg.optimizer,
                               ae_enc_state);
                optimizer_step(model.base.decoder.params, dec_back.grads, cfg.optimizer,
                               ae_dec_state);
                trace.optimizer_applications += 1;
            }

            // Step 2: lambda-scaled evidence objective at the reduced rate,
            // on the just-updated encoder.
            {
                const double scale = model.lambda / k;
                ForwardCache enc_cache;
                const Matrix z = forward(model.base.encoder, noisy, &enc_cache);
                Matrix z_grad = Matrix::Zero(z.rows(), z.cols());
                double batch_h = 0.0;
                std::vector<Grads> head_grads(k);
                for (int j = 0; j < k; ++j) {
                    const Matrix zv_b = take_rows(model.zv[j], perm.data() + start, count);
                    ForwardCache head_cache;
                    const Matrix q = forward(model.heads[j], z, &head_cache);
                    batch_h += cross_entropy(zv_b, q) / k;
                    BackwardResult head_back = backward(
                        model.heads[j], head_cache, scale * cross_entropy_grad(zv_b, q));
                    z_grad += head_back.input_grad;
                    head_grads[j] = std::move(head_back.grads);
                }
                BackwardResult enc_back = backward(model.base.encoder, enc_cache, z_grad);
                optimizer_step(model.base.encoder.params, enc_back.grads, evidence_opt,
                               h_enc_state);
                for (int j = 0; j < k; ++j)
                    optimizer_step(model.heads[j].params, head_grads[j], evidence_opt,
                                   head_states[j]);
                trace.optimizer_applications += 1;
                h_sum += batch_h * count;
            }
        }
        const double l_ae = ae_sum / s.n;
        const double l_h = h_sum / s.n;
        const double l_total = l_ae + cfg.lambda * l_h;
        if (!std::isfinite(l_total))
            throw divergence_error("transfer diverged at epoch " + std::to_string(epoch));
        trace.l_ae.push_back(l_ae);
        trace.l_h.push_back(l_h);
        trace.l_total.push_back(l_total);
    }
    return trace;
}

TransferTrace transfer(EviTramModel& model, const Matrix& x, const TransferConfig& cfg,
                       Rng& rng) {
    if (cfg.mode == TransferMode::disjoint) return transfer_disjoint(model, x, cfg, rng);
    return transfer_joint(model, x, cfg, rng);
}

}  // namespace evitram
