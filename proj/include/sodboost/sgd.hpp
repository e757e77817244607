#pragma once

#include <vector>

#include "sodboost/tensor.hpp"

namespace sodboost {

// SGD with momentum and decoupled-skip semantics: parameters whose gradient
// was never populated this step (their tape node was unreachable from the
// loss) are left untouched, velocity included. Parameters with an explicit
// zero gradient still update, so momentum keeps decaying for them.
//
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
//
// Gradients are zeroed after the update.
template <typename T>
void sgd_step(const std::vector<Parameter<T>*>& params, T lr, T momentum, T weight_decay) {
    require(lr > T(0), "sgd_step: learning rate must be positive");
    for (Parameter<T>* p : params) {
        if (!p->has_grad) continue;
        const size_t n = p->value.size();
        for (size_t i = 0; i < n; ++i) {
            const T g = p->grad[i] + weight_decay * p->value[i];
            p->velocity[i] = momentum * p->velocity[i] + g;
            p->value[i] -= lr * p->velocity[i];
        }
        p->zero_grad();
    }
}

}  // namespace sodboost
