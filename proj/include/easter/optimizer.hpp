#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "easter/model.hpp"

namespace easter {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moments aligned with Model::parameters() by name and position.
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::string> names;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState for_model(const Model& model, AdamConfig config = {});
};

/// One bias-corrected Adam update. Throws ContractViolation when names or
/// shapes disagree with the state.
void adam_step(const std::vector<NamedTensor>& params, const Gradients& grads, AdamState& state, double lr);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(Gradients& grads, double max_norm);

}  // namespace easter
