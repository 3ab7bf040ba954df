#include "vfr/nn/encode.hpp"

#include <algorithm>
#include <cstring>

#include "vfr/error.hpp"

namespace vfr::nn {

Tensor image_tensor(const RasterImage& img) {
    require(!img.empty(), ErrorCode::invalid_input, "empty image");
    const bool bytes = img.range() == PixelRange::byte;
    Tensor t({1, img.channels(), img.height(), img.width()});
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                const double v = img.at(x, y, c);
                t(0, c, y, x) = bytes ? v / 127.5 - 1.0 : v;
            }
    return t;
}

RasterImage tensor_image(const Tensor& t, int n) {
    const Shape s = t.shape();
    require(s.c == 1 || s.c == 3, ErrorCode::invalid_input, "image tensors have 1 or 3 channels");
    RasterImage img(s.w, s.h, s.c, PixelRange::signed_unit);
    for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) img.at(x, y, c) = static_cast<float>(t(n, c, y, x));
    return img;
}

Tensor one_hot(const ParseMap& parse) {
    Tensor t({1, kNumParseClasses, parse.height(), parse.width()});
    for (int y = 0; y < parse.height(); ++y)
        for (int x = 0; x < parse.width(); ++x) t(0, parse.at(x, y), y, x) = 1.0;
    return t;
}

Tensor densepose_tensor(const DenseposeMap& dp) {
    Tensor t({1, kDenseChannels, dp.height(), dp.width()});
    for (int y = 0; y < dp.height(); ++y)
        for (int x = 0; x < dp.width(); ++x) {
            t(0, dp.part(x, y), y, x) = 1.0;
            t(0, kNumDenseParts, y, x) = dp.u(x, y);
            t(0, kNumDenseParts + 1, y, x) = dp.v(x, y);
        }
    return t;
}

Tensor mask_tensor(const ClothMask& mask) {
    Tensor t({1, 1, mask.height(), mask.width()});
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) t(0, 0, y, x) = mask.at(x, y) ? 1.0 : 0.0;
    return t;
}

FlowField tensor_flow(const Tensor& flow, int n) {
    const Shape s = flow.shape();
    require(s.c == 2, ErrorCode::invalid_input, "flow tensors have 2 channels");
    FlowField f(s.w, s.h);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            f.dx[f.index(x, y)] = flow(n, 0, y, x);
            f.dy[f.index(x, y)] = flow(n, 1, y, x);
        }
    return f;
}

Tensor stack(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorCode::invalid_input, "nothing to stack");
    Shape s = parts.front().shape();
    s.n = 0;
    for (const Tensor& p : parts) {
        const Shape& q = p.shape();
        require(q.c == s.c && q.h == s.h && q.w == s.w, ErrorCode::invalid_input, "stack: mismatched shapes");
        s.n += q.n;
    }
    std::vector<double> values;
    values.reserve(s.numel());
    for (const Tensor& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
    return Tensor(s, std::move(values));
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorCode::invalid_input, "nothing to concatenate");
    Shape s = parts.front().shape();
    s.c = 0;
    for (const Tensor& p : parts) {
        const Shape& q = p.shape();
        require(q.n == s.n && q.h == s.h && q.w == s.w, ErrorCode::invalid_input, "concat: mismatched shapes");
        s.c += q.c;
    }
    Tensor out(s);
    for (int n = 0; n < s.n; ++n) {
        int c0 = 0;
        for (const Tensor& p : parts) {
            for (int c = 0; c < p.shape().c; ++c) std::copy_n(p.plane(n, c), s.plane(), out.plane(n, c0 + c));
            c0 += p.shape().c;
        }
    }
    return out;
}

Tensor sample_of(const Tensor& t, int n) {
    Shape s = t.shape();
    require(n >= 0 && n < s.n, ErrorCode::invalid_input, "sample index out of range");
    const std::size_t per = s.numel() / s.n;
    s.n = 1;
    return Tensor(s, std::vector<double>(t.data().begin() + n * per, t.data().begin() + (n + 1) * per));
}

ParseMap argmax_parse(const Tensor& logits, int n) {
    const Shape s = logits.shape();
    require(s.c <= kNumParseClasses, ErrorCode::invalid_input, "too many classes for a parse map");
    ParseMap out(s.w, s.h);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            int best = 0;
            for (int c = 1; c < s.c; ++c)
                if (logits(n, c, y, x) > logits(n, best, y, x)) best = c;
            out.at(x, y) = static_cast<std::uint8_t>(best);
        }
    return out;
}

}  // namespace vfr::nn
