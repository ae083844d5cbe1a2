#include "evitram/optimizer.hpp"

#include <cmath>

namespace evitram {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void require_shapes(const Params& params, const Grads& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer_step: group count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].W.rows() != grads[i].W.rows() || params[i].W.cols() != grads[i].W.cols() ||
            params[i].b.size() != grads[i].b.size())
            throw std::invalid_argument("optimizer_step: shape mismatch in group " +
                                        std::to_string(i));
    }
}
}  // namespace

std::string optimizer_kind_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sgd_momentum: return "sgd_momentum";
        case OptimizerKind::adam: return "adam";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
    if (name == "adam") return OptimizerKind::adam;
    throw config_error("unknown optimizer kind: " + name);
}

void validate(const OptimizerConfig& cfg) {
    if (cfg.learning_rate <= 0.0)
        throw config_error("optimizer: learning_rate must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw config_error("optimizer: momentum must be in [0, 1)");
    if (cfg.batch_size < 1)
        throw config_error("optimizer: batch_size must be >= 1");
}

void optimizer_step(Params& params, const Grads& grads, const OptimizerConfig& cfg,
                    OptimizerState& state) {
    require_shapes(params, grads);
    const double lr = cfg.learning_rate;

    switch (cfg.kind) {
        case OptimizerKind::sgd:
            for (std::size_t i = 0; i < params.size(); ++i) {
                params[i].W -= lr * grads[i].W;
                params[i].b -= lr * grads[i].b;
            }
            break;

        case OptimizerKind::sgd_momentum: {
            if (state.velocity.empty()) state.velocity = zero_grads_like(params);
            for (std::size_t i = 0; i < params.size(); ++i) {
                state.velocity[i].W = cfg.momentum * state.velocity[i].W + grads[i].W;
                state.velocity[i].b = cfg.momentum * state.velocity[i].b + grads[i].b;
                params[i].W -= lr * state.velocity[i].W;
                params[i].b -= lr * state.velocity[i].b;
            }
            break;
        }

        case OptimizerKind::adam: {
            if (state.m.empty()) {
                state.m = zero_grads_like(params);
                state.v = zero_grads_like(params);
            }
            state.step += 1;
            const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
            const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                state.m[i].W = kAdamBeta1 * state.m[i].W + (1.0 - kAdamBeta1) * grads[i].W;
                state.m[i].b = kAdamBeta1 * state.m[i].b + (1.0 - kAdamBeta1) * grads[i].b;
                state.v[i].W = kAdamBeta2 * state.v[i].W +
                               (1.0 - kAdamBeta2) * grads[i].W.array().square().matrix();
                state.v[i].b = kAdamBeta2 * state.v[i].b +
                               (1.0 - kAdamBeta2) * grads[i].b.array().square().matrix();
                params[i].W.array() -= lr * (state.m[i].W.array() / c1) /
                                       ((state.v[i].W.array() / c2).sqrt() + kAdamEps);
                params[i].b.array() -= lr * (state.m[i].b.array() / c1) /
                                       ((state.v[i].b.array() / c2).sqrt() + kAdamEps);
            }
            break;
        }
    }
}

}  // namespace evitram
