#pragma once

#include <cstdint>
#include <vector>

#include "wavedenoise/autodiff.hpp"

namespace wdn::ad {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter moment estimates. Moments are laid out in the order of the
/// parameter list the state was created for.
struct AdamState {
    AdamHyper hyper;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState init(const std::vector<Tensor>& params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace wdn::ad
