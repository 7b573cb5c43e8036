#include "wavedenoise/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace wdn::ad {

AdamState AdamState::init(const std::vector<Tensor>& params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& p : params) {
        s.m.emplace_back(p.numel(), 0.0);
        s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (params.size() != state.m.size()) throw std::invalid_argument("adam_step: parameter count does not match state");
    for (std::size_t j = 0; j < params.size(); ++j)
        if (params[j].numel() != state.m[j].size())
            throw std::invalid_argument("adam_step: parameter " + std::to_string(j) + " shape does not match state");

    const auto& h = state.hyper;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (std::size_t j = 0; j < params.size(); ++j) {
        auto data = params[j].data();
        auto grad = params[j].grad();
        auto& m = state.m[j];
        auto& v = state.v[j];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
}

}  // namespace wdn::ad
