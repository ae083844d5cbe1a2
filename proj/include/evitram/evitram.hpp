#pragma once

#include <string>
#include <vector>

#include "evitram/autoencoder.hpp"
#include "evitram/network.hpp"
#include "evitram/optimizer.hpp"
#include "evitram/rng.hpp"
#include "evitram/types.hpp"

namespace evitram {

// Pretrained autoencoder plus K predictor heads attached at the latent
// layer. Each head is a single dense latent_width -> latent_width layer with
// softmax output, trained to predict the frozen categorical targets zv[j]
// produced by the evidence encoders.
struct EviTramModel {
    DenoisingAutoencoder base;
    std::vector<Network> heads;
    double lambda = 0.1;
    std::vector<Matrix> zv;  // one N x latent_width target matrix per head
};

enum class TransferMode { joint, disjoint };

std::string transfer_mode_name(TransferMode m);
TransferMode transfer_mode_from_name(const std::string& name);

struct TransferConfig {
    double lambda = 0.1;
    int epochs = 50;
    OptimizerConfig optimizer{OptimizerKind::sgd_momentum, 0.01, 0.9, 256};
    TransferMode mode = TransferMode::joint;
    double disjoint_lr_ratio = 10.0;  // reconstruction lr / evidence lr
    // Keep corrupting inputs during transfer (at the base model's rate) so
    // the reconstruction objective stays a denoising objective.
    bool corrupt_inputs = true;
};

void validate(const TransferConfig& cfg);

// Wraps a pretrained base with k freshly initialized heads. Base parameters
// are copied bit-identically. Targets (zv) are assigned by the caller.
EviTramModel attach_heads(const DenoisingAutoencoder& base, int k, Rng& rng);

// Appends one more freshly initialized head to an already-transferred model
// (incremental evidence); the caller appends the matching target matrix.
void add_head(EviTramModel& model, Rng& rng);

// Mean-over-heads cross-entropy between the frozen targets and the head
// predictions on latent codes z: (1/K) sum_j H(zv[j], head_j(z)).
double evidence_loss(const EviTramModel& model, const Matrix& z,
                     const std::vector<Matrix>& zv_list);

struct JointLoss {
    double l_ae = 0.0;
    double l_h = 0.0;
    double l_total = 0.0;
};

// Combined objective l_ae + lambda * l_h evaluated on a raw input batch
// (standardized internally, no corruption) with aligned target batches.
JointLoss joint_loss(const EviTramModel& model, const Matrix& x_batch,
                     const std::vector<Matrix>& zv_batch_list);

// Loss components and gradients for one standardized batch; this is the
// exact computation the joint training loop applies. With lambda == 0 the
// head pass contributes nothing and head_grads is empty.
struct JointBatchResult {
    double l_ae = 0.0;
    double l_h = 0.0;
    double l_total = 0.0;
    Grads enc_grads;
    Grads dec_grads;
    std::vector<Grads> head_grads;
};

JointBatchResult compute_joint_gradients(const EviTramModel& model, const Matrix& noisy,
                                         const Matrix& clean,
                                         const std::vector<Matrix>& zv_batches);

struct TransferTrace {
    std::vector<double> l_ae;
    std::vector<double> l_h;
    std::vector<double> l_total;
    // Objective descent steps applied: 1 per batch in joint mode, exactly 2
    // per batch in disjoint mode.
    long optimizer_applications = 0;
};

// Mini-batch descent on l_ae + lambda * l_h over all parameters (base and
// heads), in place. Stamps cfg.lambda into the model. Dispatches to the
// disjoint variant when cfg.mode says so.
TransferTrace transfer(EviTramModel& model, const Matrix& x, const TransferConfig& cfg,
                       Rng& rng);

// Alternating variant: per batch, one descent step on l_ae at the configured
// learning rate, then one on lambda * l_h at lr / disjoint_lr_ratio.
TransferTrace transfer_disjoint(EviTramModel& model, const Matrix& x,
                                const TransferConfig& cfg, Rng& rng);

}  // namespace evitram
