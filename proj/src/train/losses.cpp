#include "vfr/train/losses.hpp"

#include "vfr/error.hpp"

namespace vfr {

using namespace nn;

namespace {

Var average_over_scales(const std::vector<Var>& scores, double target) {
    require(!scores.empty(), ErrorCode::invalid_input, "no discriminator scores");
    Var total;
    for (const Var& s : scores) {
        require(s.value().all_finite(), ErrorCode::numeric_failure, "non-finite discriminator score");
        const Var term = mean_squared_to(s, target);
        total = total.defined() ? add(total, term) : term;
    }
    return scale(total, 1.0 / static_cast<double>(scores.size()));
}

}  // namespace

Var lsgan_generator_loss(const std::vector<Var>& d_fake) { return scale(average_over_scales(d_fake, 1.0), 0.5); }

Var lsgan_discriminator_loss(const std::vector<Var>& d_real, const std::vector<Var>& d_fake) {
    return add(scale(average_over_scales(d_real, 1.0), 0.5), scale(average_over_scales(d_fake, 0.0), 0.5));
}

LsganLosses lsgan_losses(const std::vector<Var>& d_real, const std::vector<Var>& d_fake) {
    return {lsgan_discriminator_loss(d_real, d_fake), lsgan_generator_loss(d_fake)};
}

FeatureExtractor pyramid_extractor(int levels) {
    require(levels >= 1, ErrorCode::invalid_input, "pyramid extractor needs at least one level");
    return [levels](const Var& x) {
        std::vector<Var> out{x};
        for (int i = 1; i < levels; ++i) out.push_back(avg_pool2(out.back()));
        return out;
    };
}

FeatureExtractor identity_extractor() {
    return [](const Var& x) { return std::vector<Var>{x}; };
}

Var perceptual_loss(const Var& a, const Var& b, const FeatureExtractor& extractor) {
    require(a.shape() == b.shape(), ErrorCode::invalid_input, "perceptual loss inputs differ in shape");
    const std::vector<Var> fa = extractor(a), fb = extractor(b);
    require(!fa.empty() && fa.size() == fb.size(), ErrorCode::invalid_input, "extractor produced mismatched layers");
    Var total = l1(fa[0], fb[0]);
    for (std::size_t i = 1; i < fa.size(); ++i) total = add(total, l1(fa[i], fb[i]));
    return total;
}

}  // namespace vfr
