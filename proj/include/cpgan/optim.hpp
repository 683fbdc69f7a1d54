#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpgan/tensor.hpp"

namespace cpgan {

// Named parameter list; the order defines the checkpoint / optimizer layout.
struct NamedTensor {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

void zero_grads(ParamList& params);

// Adam with bias correction. Defaults are the conventional GAN settings.
struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptState {
    AdamConfig config;
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const ParamList& params, const AdamConfig& cfg);
    bool initialized() const { return !m.empty(); }
};

// One Adam update over all parameters; absent gradients count as zero.
void optimizer_step(ParamList& params, OptState& state);

// Max over coordinates of |analytic - central difference| /
// max(1e-8, |analytic| + |numeric|). f must be scalar-valued; x is
// perturbed in place and restored.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps);

}  // namespace cpgan
