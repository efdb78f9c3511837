#pragma once

#include <cstdint>

#include "lintrain/params.hpp"

namespace lintrain {

struct SgdHyper {
    double lr = 0.1;
    double momentum = 0.9;     // mu in [0, 1)
    double weight_decay = 0.0; // lambda >= 0
    bool decay_biases = true;  // config switch; decay applies to biases by default
};

/// Heavy-ball SGD state. Decay is folded into the gradient before the momentum
/// buffer: g' = g + lambda*w; v <- mu*v + g'; w <- w - lr*v.
template <typename T>
struct SgdStateT {
    ParamVectorT<T> velocity;
    SgdHyper hyper;

    SgdStateT(ParamLayoutPtr layout, SgdHyper h)
        : velocity(std::move(layout)), hyper(h) {}
};

template <typename T>
void sgd_step(ParamVectorT<T>& weights, const ParamVectorT<T>& grads, SgdStateT<T>& state);

/// Step schedule: lr(epoch) = base_lr / decay_factor^floor(epoch/period) when
/// enabled, base_lr otherwise.
struct LrSchedule {
    double base_lr = 0.1;
    double decay_factor = 10.0;
    std::int64_t period_epochs = 30;
    bool enabled = false;
};

double schedule_lr(const LrSchedule& schedule, std::int64_t epoch);

} // namespace lintrain
