#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vfr/nn/autograd.hpp"
#include "vfr/nn/ops.hpp"

namespace vfr::nn {

using Rng = std::mt19937_64;

/// Insertion-ordered registry of trainable leaves, keyed by dotted names.
class ParamStore {
  public:
    Var& add(const std::string& name, Tensor init);
    Var& get(const std::string& name);
    const Var& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::pair<std::string, Var>>& entries() const noexcept { return entries_; }
    std::vector<std::pair<std::string, Var>>& entries() noexcept { return entries_; }

    std::size_t parameter_count() const;
    void zero_grad();
    /// Flips requires_grad on every parameter (frozen networks skip grad work).
    void set_trainable(bool trainable);

  private:
    std::vector<std::pair<std::string, Var>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class Init { he_uniform, zeros, ones };

/// 2-D convolution layer owning its weight/bias in a ParamStore.
class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
           int pad, Rng& rng, Init weight_init = Init::he_uniform, double bias_fill = 0.0);

    Var operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

    int in_channels() const noexcept { return in_; }
    int out_channels() const noexcept { return out_; }

  private:
    Var weight_;
    Var bias_;
    int in_ = 0;
    int out_ = 0;
    int stride_ = 1;
    int pad_ = 0;
};

}  // namespace vfr::nn
