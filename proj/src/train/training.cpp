#include "vfr/train/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vfr/nn/optim.hpp"

namespace vfr {

using nlohmann::json;
using namespace nn;

TrainConfig TrainConfig::toy() {
    TrainConfig c;
    c.width = 48;
    c.height = 64;
    c.batch_size = 2;
    c.steps = 300;
    c.disc_widths = {16, 32};
    c.checkpoint_every = 50;
    c.condgen.widths = {16, 24, 32, 48, 64};
    c.imggen.channels = {32, 32, 24, 16};
    c.imggen.hidden = 16;
    return c.synced();
}

TrainConfig TrainConfig::synced() const {
    TrainConfig c = *this;
    c.condgen.width = c.imggen.width = width;
    c.condgen.height = c.imggen.height = height;
    c.condgen.seed = seed;
    c.imggen.seed = seed + 1;
    return c;
}

void TrainConfig::validate() const {
    require(width > 0 && height > 0, ErrorCode::configuration, "working resolution must be positive");
    require(batch_size > 0, ErrorCode::configuration, "batch size must be positive");
    require(steps >= 0, ErrorCode::configuration, "step count must be non-negative");
    require(lr > 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, ErrorCode::configuration,
            "learning rate and moment coefficients must be positive (betas below 1)");
    require(weights.ce >= 0 && weights.l1 >= 0 && weights.perceptual >= 0 && weights.adversarial >= 0,
            ErrorCode::configuration, "loss weights must be non-negative");
    require(disc_scales >= 1, ErrorCode::configuration, "discriminator needs at least one scale");
    require(checkpoint_every >= 0, ErrorCode::configuration, "checkpoint cadence must be non-negative");
    CondGenConfig::from_json(condgen.to_json());
    SpadeGenConfig::from_json(imggen.to_json());
}

json TrainConfig::to_json() const {
    return {{"seed", seed},
            {"width", width},
            {"height", height},
            {"batch_size", batch_size},
            {"steps", steps},
            {"lr", lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"weights", weights.to_json()},
            {"disc_scales", disc_scales},
            {"disc_widths", disc_widths},
            {"checkpoint_every", checkpoint_every},
            {"condgen", condgen.to_json()},
            {"imggen", imggen.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    require(j.is_object(), ErrorCode::configuration, "training config must be a JSON object");
    TrainConfig c = j.value("toy", false) ? toy() : TrainConfig{};
    try {
        c.seed = j.value("seed", c.seed);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.steps = j.value("steps", c.steps);
        c.lr = j.value("lr", c.lr);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        if (j.contains("weights")) c.weights = LossWeights::from_json(j.at("weights"));
        c.disc_scales = j.value("disc_scales", c.disc_scales);
        if (j.contains("disc_widths")) c.disc_widths = j.at("disc_widths").get<std::array<int, 2>>();
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        if (j.contains("condgen")) c.condgen = CondGenConfig::from_json(j.at("condgen"));
        if (j.contains("imggen")) c.imggen = SpadeGenConfig::from_json(j.at("imggen"));
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("training config: ") + e.what());
    }
    c = c.synced();
    c.validate();
    return c;
}

TrainingExample make_training_example(const TryOnSample& sample, const AgnosticOptions& options) {
    require(sample.dressed.has_value() && sample.dressed_parse.has_value(), ErrorCode::invalid_input,
            "training sample " + sample.id + " has no dressed ground truth");
    sample.validate();
    TrainingExample ex;
    ex.id = sample.id;
    const Agnostic ag =
        generate_agnostic(remove_background(sample.person, sample.parse), sample.parse, sample.pose, options);
    ex.cloth = cloth_input(sample.cloth);
    ex.cloth_mask = mask_tensor(sample.cloth_mask);
    ex.seg = seg_input(ag.parse, sample.densepose);
    ex.agnostic = image_tensor(ag.image);
    ex.densepose = densepose_tensor(sample.densepose);
    ex.dressed = image_tensor(*sample.dressed);
    ex.dressed_labels = sample.dressed_parse->labels();
    const int w = sample.width(), h = sample.height();
    ex.garment_mask = Tensor({1, 1, h, w});
    ex.cloth_on_person = Tensor({1, 3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (sample.dressed_parse->at(x, y) != label(BodyPart::upper_clothes)) continue;
            ex.garment_mask(0, 0, y, x) = 1.0;
            for (int c = 0; c < 3; ++c) ex.cloth_on_person(0, c, y, x) = ex.dressed(0, c, y, x);
        }
    return ex;
}

std::vector<TrainingExample> make_training_set(const std::vector<TryOnSample>& samples, const AgnosticOptions& options) {
    std::vector<TrainingExample> out;
    out.reserve(samples.size());
    for (const TryOnSample& s : samples) out.push_back(make_training_example(s, options));
    return out;
}

void LossHistory::add(std::int64_t step, const std::string& component, double value) {
    records.push_back({step, component, value});
}

std::vector<double> LossHistory::series(const std::string& component) const {
    std::vector<double> out;
    for (const LossRecord& r : records)
        if (r.component == component) out.push_back(r.value);
    return out;
}

std::string LossHistory::csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "step,component,value\n";
    for (const LossRecord& r : records) os << r.step << ',' << r.component << ',' << r.value << '\n';
    return os.str();
}

void LossHistory::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::io, "cannot write " + path.string());
    f << csv();
    require(static_cast<bool>(f), ErrorCode::io, "cannot write " + path.string());
}

namespace {

DiscriminatorConfig disc_config(const TrainConfig& c, int image_channels, int cond_channels, std::uint64_t salt) {
    DiscriminatorConfig d;
    d.scales = c.disc_scales;
    d.widths = c.disc_widths;
    d.image_channels = image_channels;
    d.cond_channels = cond_channels;
    d.seed = c.seed * 1000003ULL + salt;
    return d;
}

/// Deterministic epoch-wise shuffled batches.
class BatchSampler {
  public:
    BatchSampler(std::size_t n, int batch, std::uint64_t seed) : order_(n), batch_(batch), rng_(seed) {
        std::iota(order_.begin(), order_.end(), 0);
        reshuffle();
    }

    std::vector<std::size_t> next() {
        std::vector<std::size_t> out;
        while (static_cast<int>(out.size()) < batch_) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

  private:
    void reshuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order_[i - 1], order_[pick(rng_)]);
        }
        pos_ = 0;
    }
    std::vector<std::size_t> order_;
    int batch_;
    Rng rng_;
    std::size_t pos_ = 0;
};

template <typename Get>
Tensor gather(const std::vector<TrainingExample>& data, const std::vector<std::size_t>& idx, Get get) {
    std::vector<Tensor> parts;
    for (std::size_t i : idx) parts.push_back(get(data[i]));
    return stack(parts);
}

void check_data(const TrainConfig& c, const std::vector<TrainingExample>& data) {
    require(!data.empty(), ErrorCode::insufficient_samples, "training set is empty");
    for (const TrainingExample& ex : data)
        require(ex.cloth.shape().h == c.height && ex.cloth.shape().w == c.width, ErrorCode::invalid_input,
                "training example " + ex.id + " is not at the working resolution");
}

Checkpoint snapshot(const std::string& kind, const TrainConfig& c, const ParamStore& g, const ParamStore& d,
                    const Adam& opt_g, const Adam& opt_d, const json& model_config, const json& disc, std::int64_t step) {
    Checkpoint ck;
    ck.config = {{"kind", kind}, {"model", model_config}, {"discriminator", disc}, {"train", c.to_json()}};
    ck.seed = c.seed;
    ck.step = step;
    store_params(ck, "g.", g);
    store_params(ck, "d.", d);
    store_optimizer(ck, "opt_g.", opt_g);
    store_optimizer(ck, "opt_d.", opt_d);
    return ck;
}

bool finite(const std::map<std::string, double>& components) {
    return std::all_of(components.begin(), components.end(),
                       [](const auto& kv) { return std::isfinite(kv.second); });
}

/// Shared alternating loop. `step_fn` performs one D and one G update and
/// returns that step's loss components (possibly non-finite).
template <typename StepFn, typename SnapFn>
TrainResult run_loop(const TrainConfig& c, StepFn step_fn, SnapFn snap, const StepCallback& on_step) {
    TrainResult result;
    result.checkpoint = snap(0);
    for (std::int64_t step = 1; step <= c.steps; ++step) {
        std::map<std::string, double> components;
        try {
            components = step_fn();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::numeric_failure) throw;
            throw TrainingAborted("training aborted at step " + std::to_string(step) + ": " + e.what(), result);
        }
        if (!finite(components))
            throw TrainingAborted("training aborted at step " + std::to_string(step) + ": non-finite loss", result);
        for (const auto& [name, value] : components) result.history.add(step, name, value);
        if (on_step) on_step(step, components);
        if (step == c.steps || (c.checkpoint_every > 0 && step % c.checkpoint_every == 0))
            result.checkpoint = snap(step);
    }
    return result;
}

}  // namespace

TrainResult train_condgen(const TrainConfig& config, const std::vector<TrainingExample>& data,
                          const StepCallback& on_step) {
    const TrainConfig c = config.synced();
    c.validate();
    check_data(c, data);
    CondGenModel gen(c.condgen);
    const DiscriminatorConfig dcfg = disc_config(c, 3 + kNumParseClasses, kSegInputChannels, 1);
    MultiScaleDiscriminator disc(dcfg);
    Adam opt_g({c.lr, c.beta1, c.beta2}), opt_d({c.lr, c.beta1, c.beta2});
    BatchSampler sampler(data.size(), c.batch_size, c.seed);

    const auto step_fn = [&]() {
        const auto idx = sampler.next();
        const Var cloth = constant(gather(data, idx, [](const auto& e) { return e.cloth; }));
        const Var mask = constant(gather(data, idx, [](const auto& e) { return e.cloth_mask; }));
        const Var seg = constant(gather(data, idx, [](const auto& e) { return e.seg; }));
        CondGenTruth truth;
        truth.cloth_on_person = gather(data, idx, [](const auto& e) { return e.cloth_on_person; });
        truth.mask = gather(data, idx, [](const auto& e) { return e.garment_mask; });
        std::vector<Tensor> onehots;
        for (std::size_t i : idx) {
            const auto& l = data[i].dressed_labels;
            truth.labels.insert(truth.labels.end(), l.begin(), l.end());
            ParseMap p(c.width, c.height);
            p.labels() = l;
            onehots.push_back(one_hot(p));
        }
        const Var real = constant(concat_channels({truth.cloth_on_person, stack(onehots)}));

        const CondGenVars out = gen.forward(cloth, mask, seg);
        const Var fake = concat({out.warped_cloth, softmax_channels(out.seg_logits)});

        disc.params().zero_grad();
        const Var d_loss = lsgan_discriminator_loss(disc.forward(real, seg), disc.forward(constant(fake.value()), seg));
        const double d_value = d_loss.value().item();
        if (!std::isfinite(d_value)) fail(ErrorCode::numeric_failure, "non-finite discriminator loss");
        backward(d_loss);
        opt_d.step(disc.params());

        disc.params().set_trainable(false);
        gen.params().zero_grad();
        LossTerms terms = condgen_loss(out, truth, disc.forward(fake, seg), c.weights);
        backward(terms.total);
        disc.params().set_trainable(true);
        opt_g.step(gen.params());
        terms.components["discriminator"] = d_value;
        return terms.components;
    };
    const auto snap = [&](std::int64_t step) {
        return snapshot("condgen", c, gen.params(), disc.params(), opt_g, opt_d, c.condgen.to_json(),
                        dcfg.to_json(), step);
    };
    return run_loop(c, step_fn, snap, on_step);
}

StageOneProducts stage_one(const CondGenModel& model, const TrainingExample& example) {
    NoGradGuard guard;
    const CondGenVars v = model.forward(constant(example.cloth), constant(example.cloth_mask), constant(example.seg));
    const Shape s = example.cloth.shape();
    CondGenOutput out;
    out.flow = tensor_flow(v.flow.value());
    out.seg_logits = v.seg_logits.value();
    out.warped_cloth = tensor_image(v.warped_cloth.value());
    out.warped_mask = ClothMask(s.w, s.h);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.warped_mask.at(x, y) = v.warped_mask.value()(0, 0, y, x) > 0.5 ? 1 : 0;
    const CondGenOutput aligned = conditional_align(out);
    return {argmax_parse(aligned.seg_logits), aligned.warped_cloth};
}

TrainResult train_imggen(const TrainConfig& config, const std::vector<TrainingExample>& data,
                         const Checkpoint& condgen, const StepCallback& on_step) {
    const TrainConfig c = config.synced();
    c.validate();
    check_data(c, data);
    const CondGenModel frozen = load_condgen(condgen);
    require(frozen.config().width == c.width && frozen.config().height == c.height, ErrorCode::configuration,
            "condition generator checkpoint is at a different resolution");

    SpadeGenModel gen(c.imggen);
    const int cond_ch = c.imggen.cond_channels();
    std::vector<Tensor> conds;
    for (const TrainingExample& ex : data) {
        require(ex.agnostic.shape().c == c.imggen.agnostic_channels, ErrorCode::configuration,
                "training examples carry a " + std::to_string(ex.agnostic.shape().c) +
                    "-channel agnostic but the generator expects " + std::to_string(c.imggen.agnostic_channels));
        const StageOneProducts p = stage_one(frozen, ex);
        conds.push_back(concat_channels({ex.agnostic, one_hot(p.parse), ex.densepose, image_tensor(p.warped_cloth)}));
    }
    const DiscriminatorConfig dcfg = disc_config(c, 3, cond_ch, 2);
    MultiScaleDiscriminator disc(dcfg);
    Adam opt_g({c.lr, c.beta1, c.beta2}), opt_d({c.lr, c.beta1, c.beta2});
    BatchSampler sampler(data.size(), c.batch_size, c.seed + 1);

    const auto step_fn = [&]() {
        const auto idx = sampler.next();
        std::vector<Tensor> cs;
        for (std::size_t i : idx) cs.push_back(conds[i]);
        const Var cond = constant(stack(cs));
        const Var real = constant(gather(data, idx, [](const auto& e) { return e.dressed; }));
        const Var fake = gen.forward(cond);

        disc.params().zero_grad();
        const Var d_loss = lsgan_discriminator_loss(disc.forward(real, cond), disc.forward(constant(fake.value()), cond));
        const double d_value = d_loss.value().item();
        if (!std::isfinite(d_value)) fail(ErrorCode::numeric_failure, "non-finite discriminator loss");
        backward(d_loss);
        opt_d.step(disc.params());

        disc.params().set_trainable(false);
        gen.params().zero_grad();
        const Var l1_term = l1(fake, real);
        const Var perc = perceptual_loss(fake, real);
        const Var adv = lsgan_generator_loss(disc.forward(fake, cond));
        const Var total = add(add(scale(l1_term, c.weights.l1), scale(perc, c.weights.perceptual)),
                              scale(adv, c.weights.adversarial));
        std::map<std::string, double> comp = {{"l1", l1_term.value().item()},
                                              {"perceptual", perc.value().item()},
                                              {"adversarial", adv.value().item()},
                                              {"total", total.value().item()},
                                              {"discriminator", d_value}};
        if (finite(comp)) backward(total);
        disc.params().set_trainable(true);
        if (finite(comp)) opt_g.step(gen.params());
        return comp;
    };
    const auto snap = [&](std::int64_t step) {
        return snapshot("imggen", c, gen.params(), disc.params(), opt_g, opt_d, c.imggen.to_json(), dcfg.to_json(),
                        step);
    };
    return run_loop(c, step_fn, snap, on_step);
}

namespace {

void expect_kind(const Checkpoint& ckpt, const std::string& kind) {
    require(ckpt.config.is_object() && ckpt.config.value("kind", std::string{}) == kind, ErrorCode::validation,
            "checkpoint does not hold a " + kind + " model");
}

}  // namespace

CondGenModel load_condgen(const Checkpoint& ckpt) {
    expect_kind(ckpt, "condgen");
    CondGenModel model(CondGenConfig::from_json(ckpt.config.at("model")));
    load_params(ckpt, "g.", model.params());
    return model;
}

SpadeGenModel load_imggen(const Checkpoint& ckpt) {
    expect_kind(ckpt, "imggen");
    SpadeGenModel model(SpadeGenConfig::from_json(ckpt.config.at("model")));
    load_params(ckpt, "g.", model.params());
    return model;
}

MultiScaleDiscriminator load_discriminator(const Checkpoint& ckpt) {
    require(ckpt.config.is_object() && ckpt.config.contains("discriminator"), ErrorCode::validation,
            "checkpoint holds no discriminator");
    MultiScaleDiscriminator d(DiscriminatorConfig::from_json(ckpt.config.at("discriminator")));
    load_params(ckpt, "d.", d.params());
    return d;
}

}  // namespace vfr
