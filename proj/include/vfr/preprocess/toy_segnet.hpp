#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vfr/data/sample.hpp"
#include "vfr/nn/checkpoint.hpp"
#include "vfr/preprocess/backend.hpp"

namespace vfr {

/// Small encoder-decoder that labels every pixel with one of the parse
/// classes. Input is RGB plus two normalized coordinate planes.
struct SegNetConfig {
    int width = 48;
    int height = 64;
    std::array<int, 4> widths{16, 32, 48, 64};  // encoder widths, full to 1/8 resolution
    int head = 16;                              // decoder width at full resolution
    int steps = 1600;
    int batch = 4;
    double lr = 2e-3;
    double decay_at = 0.75;  // lr drops tenfold after this fraction of the steps
    std::uint64_t seed = 7;

    nlohmann::json to_json() const;
    static SegNetConfig from_json(const nlohmann::json& j);
    void validate() const;
};

class ConvSegmenter final : public Segmenter {
  public:
    /// Randomly initialized network.
    explicit ConvSegmenter(const SegNetConfig& config);
    static ConvSegmenter from_checkpoint(const nn::Checkpoint& ckpt);

    /// Minibatch Adam on per-pixel cross entropy. `on_step(step, loss)` is
    /// called after every update.
    void fit(const std::vector<TryOnSample>& samples,
             const std::function<void(int, double)>& on_step = {});

    std::string name() const override { return "toy"; }
    /// Any input size; the photo is resampled to the network resolution and
    /// labels are mapped back by nearest neighbour.
    ParseMap segment(const RasterImage& img) const override;

    nn::Checkpoint checkpoint() const;
    const SegNetConfig& config() const noexcept { return config_; }

  private:
    struct Net;
    SegNetConfig config_;
    std::shared_ptr<Net> net_;
};

}  // namespace vfr
