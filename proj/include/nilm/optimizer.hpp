#pragma once

#include <cstdint>
#include <vector>

#include "nilm/common.hpp"

namespace nilm {

// Adaptive-moment gradient descent with bias-corrected first/second moments.
struct OptimizerState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    static OptimizerState for_params(std::size_t count) {
        OptimizerState s;
        s.first_moment.assign(count, 0.0);
        s.second_moment.assign(count, 0.0);
        return s;
    }
};

// In-place update of params from grads; increments the step counter.
// Throws ConfigError on size mismatch, NumericError on non-finite gradients.
void optimizer_step(std::vector<double>& params, const std::vector<double>& grads,
                    OptimizerState& state);

}  // namespace nilm
