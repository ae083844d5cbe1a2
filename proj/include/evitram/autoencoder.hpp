#pragma once

#include <vector>

#include "evitram/network.hpp"
#include "evitram/optimizer.hpp"
#include "evitram/rng.hpp"
#include "evitram/types.hpp"

namespace evitram {

// Per-feature z-score transform fitted on the training set and stored with
// the model. Constant features (std below 1e-8) pass through unscaled.
struct Standardizer {
    RowVector mean;
    RowVector std;

    static Standardizer fit(const Matrix& x);
    static Standardizer identity(int width);

    Matrix apply(const Matrix& x) const;
    Matrix unapply(const Matrix& x) const;
};

struct DenoisingAEConfig {
    int input_width = 0;
    std::vector<int> hidden_widths{500, 500, 200};
    int latent_width = 10;
    double corruption_rate = 0.2;
    int epochs = 100;
    OptimizerConfig optimizer{OptimizerKind::adam, 0.001, 0.9, 256};
};

void validate(const DenoisingAEConfig& cfg);

// Encoder runs input -> hidden widths -> latent (relu hidden layers, linear
// latent); the decoder mirrors the widths back to the input with a linear
// output head. Inputs are standardized before entering the encoder.
struct DenoisingAutoencoder {
    Network encoder;
    Network decoder;
    DenoisingAEConfig config;
    Standardizer stats;
};

// Zero-masking corruption: each entry is independently set to 0 with
// probability rate. Consumes one rng draw per entry regardless of rate.
Matrix corrupt(const Matrix& x, double rate, Rng& rng);

struct PretrainResult {
    DenoisingAutoencoder model;
    std::vector<double> trace;  // per-epoch training MSE (standardized space)
};

// Initializes a fresh stack and minimizes the reconstruction MSE of clean
// (standardized) inputs from corrupted ones by mini-batch descent. With
// epochs = 0 the returned parameters are the freshly initialized ones and
// the trace is empty.
PretrainResult pretrain(const Matrix& x, const DenoisingAEConfig& cfg, Rng& rng);

// Runs further epochs of the exact pretraining loop on an existing model,
// in place. Returns the per-epoch training MSE.
std::vector<double> continue_training(DenoisingAutoencoder& ae, const Matrix& x, int epochs,
                                      const OptimizerConfig& opt, double corruption_rate,
                                      Rng& rng);

// Latent codes for x; deterministic, no corruption.
Matrix encode(const DenoisingAutoencoder& ae, const Matrix& x);

// decoder(encoder(x)) mapped back to the input scale.
Matrix reconstruct(const DenoisingAutoencoder& ae, const Matrix& x);

// Training-objective value on x without corruption: MSE between the
// standardized input and its reconstruction in standardized space. This is
// the quantity reported in loss traces and stability checks.
double reconstruction_mse(const DenoisingAutoencoder& ae, const Matrix& x);

}  // namespace evitram
