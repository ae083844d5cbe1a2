#pragma once

#include <functional>
#include <string>
#include <utility>

#include "evitram/network.hpp"
#include "evitram/rng.hpp"
#include "evitram/types.hpp"

namespace evitram {

enum class EvidenceQuality { real, white_noise, random_index };

std::string evidence_quality_name(EvidenceQuality q);
EvidenceQuality evidence_quality_from_name(const std::string& name);

// External categorical signal, one label per sample, with its one-hot
// encoding. quality records how the source was produced (metadata only).
struct EvidenceSource {
    Labels labels;
    int width = 0;
    Matrix onehot;
    EvidenceQuality quality = EvidenceQuality::real;
};

// Builds a source from raw labels, validating 0 <= label < width.
EvidenceSource evidence_from_labels(const Labels& labels, int width, EvidenceQuality quality);

// Maps each label through `mapping` into [0, width) groups.
EvidenceSource derive_evidence(const Labels& labels, const std::function<int(int)>& mapping,
                               int width);

// Labels drawn i.i.d. uniform over [0, width).
EvidenceSource white_noise_evidence(int n, int width, Rng& rng);

// Same label multiset as `real`, rows permuted uniformly at random, so the
// signal no longer corresponds to the samples it is attached to.
EvidenceSource random_index_evidence(const EvidenceSource& real, Rng& rng);

// Single-hidden-layer autoencoder over one-hot evidence: w -> latent
// (softmax) -> w. Deliberately under-trained so it reproduces its input
// rather than generalizing; the softmax hidden activations are the
// categorical targets used during transfer.
struct EvidenceEncoder {
    Network encoder;  // w -> latent, softmax
    Network decoder;  // latent -> w, linear
    int trained_epochs = 0;
};

// Minimizes the one-hot reconstruction MSE with plain SGD (lr 0.01) for a
// small number of epochs (default 5 at call sites).
EvidenceEncoder train_evidence_encoder(const EvidenceSource& v, int latent_width, int epochs,
                                       Rng& rng);

// Softmax hidden activations for every sample: N x latent_width, rows are
// categorical distributions. Equal labels map to identical rows.
Matrix latent_evidence(const EvidenceEncoder& enc, const EvidenceSource& v);

// Reconstruction objective of the evidence autoencoder on v.
double evidence_reconstruction_mse(const EvidenceEncoder& enc, const EvidenceSource& v);

// Plain text, one integer label per line, preceded by a `# width=<w>` header.
void save_evidence_file(const std::string& path, const EvidenceSource& v);

// Reads labels and width. Without a header the width is max(label)+1.
std::pair<Labels, int> load_evidence_file(const std::string& path);

}  // namespace evitram
