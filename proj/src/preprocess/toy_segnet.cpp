#include "vfr/preprocess/toy_segnet.hpp"

#include <algorithm>

#include "vfr/error.hpp"
#include "vfr/nn/encode.hpp"
#include "vfr/nn/module.hpp"
#include "vfr/nn/ops.hpp"
#include "vfr/nn/optim.hpp"

namespace vfr {

using nlohmann::json;

json SegNetConfig::to_json() const {
    return {{"width", width},   {"height", height}, {"widths", widths}, {"head", head},
            {"steps", steps},   {"batch", batch},   {"lr", lr},         {"decay_at", decay_at},
            {"seed", seed}};
}

SegNetConfig SegNetConfig::from_json(const json& j) {
    SegNetConfig c;
    try {
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.widths = j.value("widths", c.widths);
        c.head = j.value("head", c.head);
        c.steps = j.value("steps", c.steps);
        c.batch = j.value("batch", c.batch);
        c.lr = j.value("lr", c.lr);
        c.decay_at = j.value("decay_at", c.decay_at);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("segmenter config: ") + e.what());
    }
    c.validate();
    return c;
}

void SegNetConfig::validate() const {
    require(width >= 8 && height >= 8 && width % 8 == 0 && height % 8 == 0, ErrorCode::configuration,
            "segmenter resolution must be a positive multiple of 8");
    for (int w : widths) require(w > 0, ErrorCode::configuration, "segmenter widths must be positive");
    require(head > 0 && steps >= 0 && batch > 0 && lr > 0, ErrorCode::configuration,
            "segmenter head, batch and lr must be positive and steps non-negative");
    require(decay_at > 0 && decay_at <= 1, ErrorCode::configuration, "segmenter decay_at must lie in (0, 1]");
}

struct ConvSegmenter::Net {
    nn::ParamStore params;
    nn::Conv2d e0a, e0b, e1a, e1b, e2a, e2b, e3a, e3b, d2, d1, d0, out;

    explicit Net(const SegNetConfig& c) {
        nn::Rng rng(c.seed);
        const auto [w0, w1, w2, w3] = c.widths;
        e0a = nn::Conv2d(params, "e0a", 5, w0, 3, 1, 1, rng);
        e0b = nn::Conv2d(params, "e0b", w0, w0, 3, 1, 1, rng);
        e1a = nn::Conv2d(params, "e1a", w0, w1, 3, 2, 1, rng);
        e1b = nn::Conv2d(params, "e1b", w1, w1, 3, 1, 1, rng);
        e2a = nn::Conv2d(params, "e2a", w1, w2, 3, 2, 1, rng);
        e2b = nn::Conv2d(params, "e2b", w2, w2, 3, 1, 1, rng);
        e3a = nn::Conv2d(params, "e3a", w2, w3, 3, 2, 1, rng);
        e3b = nn::Conv2d(params, "e3b", w3, w3, 3, 1, 1, rng);
        d2 = nn::Conv2d(params, "d2", w3 + w2, w2, 3, 1, 1, rng);
        d1 = nn::Conv2d(params, "d1", w2 + w1, w1, 3, 1, 1, rng);
        d0 = nn::Conv2d(params, "d0", w1 + w0, c.head, 3, 1, 1, rng);
        out = nn::Conv2d(params, "out", c.head, kNumParseClasses, 1, 1, 0, rng);
    }

    nn::Var forward(const nn::Var& x) const {
        auto act = [](const nn::Var& v) { return nn::leaky_relu(v); };
        auto up = [](const nn::Var& v, const nn::Var& like) {
            return nn::resize_bilinear(v, like.shape().h, like.shape().w);
        };
        const nn::Var a0 = act(e0b(act(e0a(x))));
        const nn::Var a1 = act(e1b(act(e1a(a0))));
        const nn::Var a2 = act(e2b(act(e2a(a1))));
        const nn::Var a3 = act(e3b(act(e3a(a2))));
        const nn::Var b2 = act(d2(nn::concat({up(a3, a2), a2})));
        const nn::Var b1 = act(d1(nn::concat({up(b2, a1), a1})));
        const nn::Var b0 = act(d0(nn::concat({up(b1, a0), a0})));
        return out(b0);
    }
};

namespace {

// RGB in [-1, 1] followed by x and y in [-1, 1].
void write_input(nn::Tensor& t, int n, const RasterImage& img) {
    const nn::Tensor rgb = nn::image_tensor(img);
    const int H = t.shape().h, W = t.shape().w;
    const int C = rgb.shape().c;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) t(n, c, y, x) = rgb(0, std::min(c, C - 1), y, x);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            t(n, 3, y, x) = 2.0 * (x + 0.5) / W - 1.0;
            t(n, 4, y, x) = 2.0 * (y + 0.5) / H - 1.0;
        }
    }
}

}  // namespace

ConvSegmenter::ConvSegmenter(const SegNetConfig& config) : config_(config) {
    config_.validate();
    net_ = std::make_shared<Net>(config_);
}

ConvSegmenter ConvSegmenter::from_checkpoint(const nn::Checkpoint& ckpt) {
    ConvSegmenter seg(SegNetConfig::from_json(ckpt.config));
    nn::load_params(ckpt, "segnet/", seg.net_->params);
    return seg;
}

nn::Checkpoint ConvSegmenter::checkpoint() const {
    nn::Checkpoint ckpt;
    ckpt.config = config_.to_json();
    ckpt.seed = config_.seed;
    ckpt.step = config_.steps;
    ckpt.meta = {{"model", "segmenter"}};
    nn::store_params(ckpt, "segnet/", net_->params);
    return ckpt;
}

void ConvSegmenter::fit(const std::vector<TryOnSample>& samples, const std::function<void(int, double)>& on_step) {
    require(!samples.empty(), ErrorCode::insufficient_samples, "segmenter needs at least one training sample");
    for (const TryOnSample& s : samples) {
        require(s.width() == config_.width && s.height() == config_.height, ErrorCode::configuration,
                "segmenter training samples must match the network resolution");
    }
    const int B = config_.batch, H = config_.height, W = config_.width;
    nn::Adam opt({config_.lr, 0.9, 0.999, 1e-8});
    nn::Rng rng(config_.seed ^ 0x5e9u);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const int decay_step = static_cast<int>(config_.decay_at * config_.steps);
    std::vector<std::uint8_t> labels;
    for (int step = 0; step < config_.steps; ++step) {
        if (step == decay_step) opt.set_lr(config_.lr * 0.1);
        nn::Tensor x(nn::Shape{B, 5, H, W});
        labels.clear();
        for (int b = 0; b < B; ++b) {
            const TryOnSample& s = samples[pick(rng)];
            write_input(x, b, s.person);
            labels.insert(labels.end(), s.parse.labels().begin(), s.parse.labels().end());
        }
        net_->params.zero_grad();
        const nn::Var loss = nn::cross_entropy(net_->forward(nn::constant(std::move(x))), labels);
        nn::backward(loss);
        opt.step(net_->params);
        if (on_step) on_step(step, loss.value().data()[0]);
    }
}

ParseMap ConvSegmenter::segment(const RasterImage& img) const {
    require(!img.empty(), ErrorCode::invalid_input, "empty image");
    // A frame without any variation holds no person.
    if (is_uniform(img)) return ParseMap(img.width(), img.height());
    const int H = config_.height, W = config_.width;
    const RasterImage scaled =
        img.width() == W && img.height() == H ? img : resize_bilinear(img, W, H);
    nn::Tensor x(nn::Shape{1, 5, H, W});
    write_input(x, 0, scaled);
    nn::NoGradGuard guard;
    const ParseMap small = nn::argmax_parse(net_->forward(nn::constant(std::move(x))).value());
    if (img.width() == W && img.height() == H) return small;
    ParseMap out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(x, y) = small.at(std::min(W - 1, x * W / img.width()), std::min(H - 1, y * H / img.height()));
    return out;
}

}  // namespace vfr
