#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vfr/nn/module.hpp"

namespace vfr::nn {

struct AdamOptions {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected first/second moment estimates.
class Adam {
  public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    /// Applies one update to every parameter of `store` that has a gradient.
    void step(ParamStore& store);

    const AdamOptions& options() const noexcept { return options_; }
    void set_lr(double lr) noexcept { options_.lr = lr; }
    std::int64_t steps() const noexcept { return t_; }

    // Moment buffers are keyed by parameter name so they survive a checkpoint.
    std::map<std::string, Tensor>& first_moments() noexcept { return m_; }
    std::map<std::string, Tensor>& second_moments() noexcept { return v_; }
    const std::map<std::string, Tensor>& first_moments() const noexcept { return m_; }
    const std::map<std::string, Tensor>& second_moments() const noexcept { return v_; }
    void set_steps(std::int64_t t) noexcept { t_ = t; }

  private:
    AdamOptions options_;
    std::int64_t t_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

}  // namespace vfr::nn
