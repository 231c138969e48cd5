#pragma once

#include <cmath>
#include <unordered_map>

#include "slu/tensor.hpp"

namespace slu {

template <typename S>
struct AdamConfig {
    S lr = static_cast<S>(1e-3);
    S beta1 = static_cast<S>(0.9);
    S beta2 = static_cast<S>(0.999);
    S epsilon = static_cast<S>(1e-8);
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// allocated on first use.
template <typename S>
class Adam {
  public:
    explicit Adam(AdamConfig<S> config = {}) : config_(config) {}

    // Requires a gradient entry for every requires_grad parameter; a zero
    // buffer counts, a missing one is an error.
    void step(ParamStore<S>& params, const GradMap<S>& grads) {
        ++step_;
        S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(config_.beta1), static_cast<double>(step_)));
        S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(config_.beta2), static_cast<double>(step_)));
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Parameter<S>& p = params[pi];
            if (!p.requires_grad) continue;
            const std::vector<S>* g = grads.find(p.name);
            if (!g) throw OptimizerError("missing gradient for trainable parameter " + p.name);
            if (g->size() != p.value.size())
                throw OptimizerError("gradient shape mismatch for parameter " + p.name);
            Moments& mom = moments_[p.name];
            if (mom.m.empty()) {
                mom.m.assign(p.value.size(), S(0));
                mom.v.assign(p.value.size(), S(0));
            }
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                S gi = (*g)[i];
                mom.m[i] = config_.beta1 * mom.m[i] + (S(1) - config_.beta1) * gi;
                mom.v[i] = config_.beta2 * mom.v[i] + (S(1) - config_.beta2) * gi * gi;
                S mhat = mom.m[i] / bc1;
                S vhat = mom.v[i] / bc2;
                p.value.data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
            }
        }
    }

    long long step_count() const { return step_; }
    const AdamConfig<S>& config() const { return config_; }

  private:
    struct Moments {
        std::vector<S> m, v;
    };
    AdamConfig<S> config_;
    long long step_ = 0;
    std::unordered_map<std::string, Moments> moments_;
};

// Scales all gradients so the global L2 norm does not exceed max_norm.
// max_norm <= 0 disables clipping.
template <typename S>
void clip_global_norm(GradMap<S>& grads, double max_norm) {
    if (max_norm <= 0) return;
    double norm = grads.global_norm();
    if (norm > max_norm) grads.scale(static_cast<S>(max_norm / norm));
}

}  // namespace slu
