#include "vfr/data/sample.hpp"

#include "vfr/error.hpp"

namespace vfr {

void TryOnSample::validate() const {
    const std::string where = id.empty() ? std::string("sample") : "sample " + id;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) fail(ErrorCode::validation, where + ": " + what);
    };
    check(!person.empty() && person.channels() == 3, "person image must be RGB");
    check(!cloth.empty() && cloth.channels() == 3, "cloth image must be RGB");
    const int w = person.width(), h = person.height();
    auto sized = [&](int ww, int hh) { return ww == w && hh == h; };
    check(sized(cloth.width(), cloth.height()), "cloth size differs from person size");
    check(sized(cloth_mask.width(), cloth_mask.height()), "cloth mask size differs from person size");
    check(sized(parse.width(), parse.height()), "parse map size differs from person size");
    check(sized(densepose.width(), densepose.height()), "densepose size differs from person size");
    check(cloth_mask.is_binary(), "cloth mask is not binary");
    check(densepose.satisfies_invariants(), "densepose breaks its invariants");
    try {
        parse.validate();
        if (dressed_parse) dressed_parse->validate();
    } catch (const Error& e) {
        fail(ErrorCode::validation, where + ": " + e.what());
    }
    for (const Keypoint& k : pose.joints) {
        if (!k.detected()) continue;
        check(k.x >= 0 && k.y >= 0 && k.x < w && k.y < h && k.confidence <= 1.0, "keypoint outside the frame");
    }
    if (dressed) check(dressed->same_size(person) && dressed->channels() == 3, "dressed image size differs");
    if (dressed_parse) check(sized(dressed_parse->width(), dressed_parse->height()), "dressed parse size differs");
}

}  // namespace vfr
