#pragma once

#include <string>

#include "evitram/network.hpp"
#include "evitram/types.hpp"

namespace evitram {

enum class OptimizerKind { sgd, sgd_momentum, adam };

std::string optimizer_kind_name(OptimizerKind k);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd_momentum;
    double learning_rate = 0.01;
    double momentum = 0.9;  // sgd_momentum only, in [0, 1)
    int batch_size = 256;
};

void validate(const OptimizerConfig& cfg);

// Per-parameter-group slots, lazily shaped on first step.
struct OptimizerState {
    Params velocity;  // sgd_momentum
    Params m, v;      // adam moments
    long step = 0;
};

// One descent update in place. Update rules:
//   sgd:          p -= lr * g
//   sgd_momentum: vel = momentum * vel + g;  p -= lr * vel
//   adam:         standard biased-moment recurrence, beta1=0.9, beta2=0.999,
//                 eps=1e-8, with bias-corrected moments.
void optimizer_step(Params& params, const Grads& grads, const OptimizerConfig& cfg,
                    OptimizerState& state);

}  // namespace evitram
