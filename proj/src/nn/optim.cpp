#include "vfr/nn/optim.hpp"

#include <cmath>

namespace vfr::nn {

void Adam::step(ParamStore& store) {
    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (auto& [name, param] : store.entries()) {
        if (!param.requires_grad() || param.grad().empty()) continue;
        Tensor& m = m_.try_emplace(name, param.shape()).first->second;
        Tensor& v = v_.try_emplace(name, param.shape()).first->second;
        auto p = param.mutable_value().data();
        const auto g = param.grad().data();
        auto md = m.data();
        auto vd = v.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            md[i] = b1 * md[i] + (1.0 - b1) * g[i];
            vd[i] = b2 * vd[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = md[i] / c1;
            const double vhat = vd[i] / c2;
            p[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

}  // namespace vfr::nn
