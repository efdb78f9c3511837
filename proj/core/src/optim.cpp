#include "lintrain/optim.hpp"

#include "lintrain/errors.hpp"

namespace lintrain {

template <typename T>
void sgd_step(ParamVectorT<T>& weights, const ParamVectorT<T>& grads, SgdStateT<T>& state) {
    require_same_layout(weights, grads, "sgd_step");
    require_same_layout(weights, state.velocity, "sgd_step");

    const T lr = static_cast<T>(state.hyper.lr);
    const T mu = static_cast<T>(state.hyper.momentum);
    const T lambda = static_cast<T>(state.hyper.weight_decay);

    T* w = weights.ptr();
    const T* g = grads.ptr();
    T* v = state.velocity.ptr();

    if (lambda != T(0) && !state.hyper.decay_biases) {
        // per-entry walk so bias entries can skip the decay term
        const auto& entries = weights.layout()->entries();
        for (const ParamEntry& e : entries) {
            const bool is_bias = e.shape.size() == 1;
            for (std::int64_t i = e.offset, end = e.offset + e.count; i < end; ++i) {
                const T adjusted = is_bias ? g[i] : g[i] + lambda * w[i];
                v[i] = mu * v[i] + adjusted;
                w[i] -= lr * v[i];
            }
        }
        return;
    }

    for (std::int64_t i = 0, n = weights.size(); i < n; ++i) {
        const T adjusted = g[i] + lambda * w[i];
        v[i] = mu * v[i] + adjusted;
        w[i] -= lr * v[i];
    }
}

double schedule_lr(const LrSchedule& schedule, std::int64_t epoch) {
    if (epoch < 0) throw Error("schedule_lr: epoch must be >= 0");
    if (!schedule.enabled) return schedule.base_lr;
    double lr = schedule.base_lr;
    for (std::int64_t i = 0, k = epoch / schedule.period_epochs; i < k; ++i)
        lr /= schedule.decay_factor;
    return lr;
}

template void sgd_step<float>(ParamVectorT<float>&, const ParamVectorT<float>&,
                              SgdStateT<float>&);
template void sgd_step<double>(ParamVectorT<double>&, const ParamVectorT<double>&,
                               SgdStateT<double>&);

} // namespace lintrain
