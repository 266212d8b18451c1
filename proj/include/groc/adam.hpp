#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "groc/dense_matrix.hpp"

namespace groc {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<DenseMatrix> m;  // first moments, mirror parameter shapes
    std::vector<DenseMatrix> v;  // second moments
};

// One bias-corrected Adam update with the L2 penalty folded into the
// gradient (g + lambda * theta). Moments are created on the first call.
// Throws NumericalError on a non-finite gradient, leaving params untouched.
void adam_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads,
               AdamState& state, double lr, double weight_decay);

} // namespace groc
