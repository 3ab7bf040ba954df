#pragma once

#include <optional>
#include <string>

#include "vfr/preprocess/types.hpp"

namespace vfr {

/// One paired unit: a person photo with its annotations plus a flat garment.
/// Synthetic samples also carry the exact dressed result.
struct TryOnSample {
    std::string id;
    RasterImage person;
    RasterImage cloth;
    ClothMask cloth_mask;
    ParseMap parse;
    PoseKeypoints pose;
    DenseposeMap densepose;
    std::optional<RasterImage> dressed;
    std::optional<ParseMap> dressed_parse;

    int width() const noexcept { return person.width(); }
    int height() const noexcept { return person.height(); }

    /// Throws validation when rasters disagree in size or annotations break
    /// their invariants.
    void validate() const;

    friend bool operator==(const TryOnSample&, const TryOnSample&) = default;
};

}  // namespace vfr
