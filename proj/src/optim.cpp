#include "cpgan/optim.hpp"

#include <cmath>

namespace cpgan {

void zero_grads(ParamList& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

void OptState::init(const ParamList& params, const AdamConfig& cfg) {
    config = cfg;
    step = 0;
    m.clear();
    v.clear();
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.tensor.data().size(), 0.0);
        v.emplace_back(p.tensor.data().size(), 0.0);
    }
}

void optimizer_step(ParamList& params, OptState& state) {
    check(state.initialized(), "optimizer_step: state not initialized");
    check(state.m.size() == params.size(), "optimizer_step: %zu params but state holds %zu",
          params.size(), state.m.size());
    state.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].tensor;
        auto& m = state.m[i];
        auto& v = state.v[i];
        check(m.size() == t.data().size(), "optimizer_step: shape drift on '%s'",
              params[i].name.c_str());
        const bool has_g = t.has_grad();
        const double* g = has_g ? t.node()->grad.data() : nullptr;
        double* w = t.data().data();
        for (size_t j = 0; j < m.size(); ++j) {
            const double gj = has_g ? g[j] : 0.0;
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
    check(eps > 0.0, "grad_check: eps must be positive");
    const bool had_rg = x.requires_grad();
    // Analytic gradient.
    Tape tape;
    std::vector<double> analytic;
    {
        TapeScope scope(tape);
        x.set_requires_grad(true);
        Tensor y = f(x);
        check(y.size() == 1, "grad_check: f must be scalar-valued, got %s",
              shape_str(y.shape()).c_str());
        tape.backward(y);
        analytic = x.has_grad() ? x.node()->grad : std::vector<double>(x.data().size(), 0.0);
    }
    tape.clear();
    x.set_requires_grad(false);
    // Central differences, no tape.
    double worst = 0.0;
    auto& data = x.data();
    for (size_t i = 0; i < data.size(); ++i) {
        const double keep = data[i];
        data[i] = keep + eps;
        const double fp = f(x).item();
        data[i] = keep - eps;
        const double fm = f(x).item();
        data[i] = keep;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    x.set_requires_grad(had_rg);
    return worst;
}

}  // namespace cpgan
