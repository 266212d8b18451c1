#include "groc/adam.hpp"

#include <cmath>
#include <string>

#include "groc/errors.hpp"

namespace groc {

void adam_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads,
               AdamState& state, double lr, double weight_decay) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]))
            throw ShapeError("adam_step: gradient " + std::to_string(i) + " has the wrong shape");
        if (!grads[i]->all_finite())
            throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i));
    }
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match params");

    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->values();
        const auto& g = grads[i]->values();
        auto& m = state.m[i].values();
        auto& v = state.v[i].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k] + weight_decay * p[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

} // namespace groc
