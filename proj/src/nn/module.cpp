#include "vfr/nn/module.hpp"

#include <cmath>

#include "vfr/error.hpp"

namespace vfr::nn {

Var& ParamStore::add(const std::string& name, Tensor init) {
    require(!contains(name), ErrorCode::invalid_input, "duplicate parameter " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, Var(std::move(init), true));
    return entries_.back().second;
}

Var& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::not_found, "no parameter named " + name);
    return entries_[it->second].second;
}

const Var& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::not_found, "no parameter named " + name);
    return entries_[it->second].second;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, v] : entries_) total += v.value().numel();
    return total;
}

void ParamStore::zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
}

void ParamStore::set_trainable(bool trainable) {
    for (auto& [name, v] : entries_) v.node()->requires_grad = trainable;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel,
               int stride, int pad, Rng& rng, Init weight_init, double bias_fill)
    : in_(in_channels), out_(out_channels), stride_(stride), pad_(pad) {
    require(in_channels > 0 && out_channels > 0 && kernel > 0, ErrorCode::invalid_input,
            "conv " + name + ": channel counts and kernel must be positive");
    Tensor w(Shape{out_channels, in_channels, kernel, kernel});
    switch (weight_init) {
        case Init::he_uniform: {
            // Kaiming-uniform for leaky-ReLU(0.2) fan-in.
            const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
            const double bound = std::sqrt(6.0 / ((1.0 + 0.04) * fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& v : w.data()) v = dist(rng);
            break;
        }
        case Init::zeros: break;
        case Init::ones: w.fill(1.0); break;
    }
    weight_ = store.add(name + ".weight", std::move(w));
    bias_ = store.add(name + ".bias", Tensor(Shape{1, out_channels, 1, 1}, bias_fill));
}

}  // namespace vfr::nn
