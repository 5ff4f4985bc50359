#include "easter/optimizer.hpp"

#include <cmath>

#include "easter/error.hpp"

namespace easter {

AdamState AdamState::for_model(const Model& model, AdamConfig config) {
    AdamState s;
    s.config = config;
    for (const auto& p : model.parameters()) {
        s.names.push_back(p.name);
        s.m.push_back(Tensor::zeros_like(*p.tensor));
        s.v.push_back(Tensor::zeros_like(*p.tensor));
    }
    return s;
}

void adam_step(const std::vector<NamedTensor>& params, const Gradients& grads, AdamState& state, double lr) {
    if (params.size() != grads.tensors.size() || params.size() != state.m.size()) {
        contract_fail("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != state.names[i] || params[i].name != grads.names[i]) {
            contract_fail("adam_step: name mismatch at " + params[i].name);
        }
        if (params[i].tensor->shape() != grads.tensors[i].shape() ||
            params[i].tensor->shape() != state.m[i].shape()) {
            contract_fail("adam_step: shape mismatch for " + params[i].name);
        }
    }
    ++state.step;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        float* p = params[i].tensor->raw();
        const float* g = grads.tensors[i].raw();
        float* m = state.m[i].raw();
        float* v = state.v[i].raw();
        for (std::size_t k = 0; k < params[i].tensor->size(); ++k) {
            const double mk = b1 * m[k] + (1.0 - b1) * g[k];
            const double vk = b2 * v[k] + (1.0 - b2) * static_cast<double>(g[k]) * g[k];
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + state.config.epsilon);
            p[k] = static_cast<float>(p[k] - update);
        }
    }
}

double clip_global_norm(Gradients& grads, double max_norm) {
    const double norm = grads.global_norm();
    if (max_norm > 0.0 && norm > max_norm) {
        const auto scale = static_cast<float>(max_norm / norm);
        for (auto& t : grads.tensors) t.scale_(scale);
    }
    return norm;
}

}  // namespace easter
