#include "vfr/service/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfr/data/dataset.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/metrics/metrics.hpp"
#include "vfr/preprocess/annotation_io.hpp"
#include "vfr/preprocess/ops.hpp"
#include "vfr/preprocess/toy_segnet.hpp"
#include "vfr/service/evaluation.hpp"
#include "vfr/service/pipeline.hpp"
#include "vfr/service/server.hpp"
#include "vfr/train/training.hpp"

namespace vfr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

json read_json(const fs::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<RasterImage> load_image_dir(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::not_found, "image directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RasterImage> out;
    for (const fs::path& f : files) out.push_back(load_image(f));
    return out;
}

// Training pairs without a synthetic composite follow the paired convention:
// the person already wears the garment.
std::vector<TryOnSample> training_samples(const fs::path& root, const std::string& split) {
    const DatasetManifest m = load_manifest(root, split);
    std::vector<TryOnSample> out;
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        TryOnSample s = load_sample(m, i);
        if (!s.dressed) s.dressed = s.person;
        if (!s.dressed_parse) s.dressed_parse = s.parse;
        out.push_back(std::move(s));
    }
    return out;
}

TrainConfig train_config(const std::string& path, int steps, long long seed, const DatasetManifest& data) {
    TrainConfig c = path.empty() ? TrainConfig::toy() : TrainConfig::from_json(read_json(path));
    if (steps >= 0) c.steps = steps;
    if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    require(c.width == data.width && c.height == data.height, ErrorCode::configuration,
            "training runs at " + std::to_string(c.height) + "x" + std::to_string(c.width) + " but the dataset is " +
                std::to_string(data.height) + "x" + std::to_string(data.width));
    return c;
}

StepCallback progress(std::ostream& err, int every) {
    if (every <= 0) return {};
    return [&err, every](std::int64_t step, const std::map<std::string, double>& c) {
        if (step % every != 0) return;
        json line = {{"step", step}};
        for (const auto& [k, v] : c) line[k] = v;
        err << line.dump() << '\n';
    };
}

json summary_of(const TrainResult& r, const std::string& component, const fs::path& out) {
    const std::vector<double> s = r.history.series(component);
    return {{"checkpoint", out.string()},
            {"steps", s.size()},
            {component + "_first", s.empty() ? 0.0 : s.front()},
            {component + "_last", s.empty() ? 0.0 : s.back()}};
}

struct Args {
    // shared
    std::string config;
    std::string data;
    std::string split = "train";
    std::string out;
    long long seed = -1;
    int width = 48;
    int height = 64;
    // synth
    int count = 64;
    // training
    int steps = -1;
    std::string condgen;
    std::string history;
    int log_every = 0;
    // tryon
    std::string person;
    std::string cloth;
    // fid
    std::string real;
    std::string fake;
    int dim = 64;
    // preprocess, bench and train-segmenter
    BackendSelection backends{"toy", "toy", "toy", "toy-floodfill"};
    int segnet_steps = -1;
    int fit_samples = -1;
    std::string segnet_checkpoint;
    // bench
    bool csv = false;
    // serve
    std::string host = "0.0.0.0";
    int port = 8080;
    std::string catalog;
};

void cmd_synth(const Args& a, std::ostream& out) {
    const std::uint64_t seed = a.seed < 0 ? 1 : static_cast<std::uint64_t>(a.seed);
    require(a.count > 0, ErrorCode::usage, "--count must be positive");
    fs::create_directories(a.out);
    const DatasetManifest m = export_dataset(synth_dataset(seed, a.count, a.width, a.height), a.out, a.split);
    out << json{{"root", a.out}, {"split", a.split}, {"pairs", m.pairs.size()}, {"width", m.width}, {"height", m.height}}
               .dump()
        << '\n';
}

BackendContext toy_context(const Args& a, int width, int height, std::uint64_t seed) {
    BackendContext ctx;
    ctx.width = width;
    ctx.height = height;
    ctx.seed = seed;
    if (a.segnet_steps >= 0) ctx.segnet_steps = a.segnet_steps;
    if (a.fit_samples >= 0) ctx.fit_samples = a.fit_samples;
    ctx.segnet_checkpoint = a.segnet_checkpoint;
    return ctx;
}

void cmd_preprocess(const Args& a, std::ostream& out) {
    const fs::path root = a.data;
    const std::vector<PairEntry> pairs = read_pairs(root, a.split);
    const BackendRegistry registry = BackendRegistry::with_defaults();
    registry.require_registered(a.backends);
    const BackendContext ctx = toy_context(a, a.width, a.height, a.seed < 0 ? 7 : static_cast<std::uint64_t>(a.seed));
    const auto seg = registry.segmenter(a.backends.segmenter, ctx);
    const auto pose = registry.pose_detector(a.backends.pose_detector, ctx);
    const auto dp = registry.densepose_estimator(a.backends.densepose_estimator, ctx);
    const auto cloth_seg = registry.cloth_segmenter(a.backends.cloth_segmenter, ctx);

    for (const char* sub : {"cloth-mask", "image-parse", "openpose-json", "image-densepose"})
        fs::create_directories(root / sub);
    for (const PairEntry& pair : pairs) {
        const SamplePaths p = sample_paths(root, pair);
        const RasterImage person = load_image(p.person);
        const ParseMap parse = segment_human(person, *seg).value;
        write_file(p.parse, encode_parse_png(parse));
        write_text(p.pose, encode_pose_json(detect_pose(person, *pose)));
        write_file(p.densepose, encode_densepose_png(compute_densepose(person, *dp)));
        write_file(p.cloth_mask, encode_mask_png(make_cloth_mask(load_image(p.cloth), *cloth_seg)));
    }
    out << json{{"root", a.data}, {"split", a.split}, {"annotated", pairs.size()}}.dump() << '\n';
}

void cmd_train_condgen(const Args& a, std::ostream& out, std::ostream& err) {
    const DatasetManifest m = load_manifest(a.data, a.split);
    const TrainConfig cfg = train_config(a.config, a.steps, a.seed, m);
    const auto data = make_training_set(training_samples(a.data, a.split));
    const TrainResult r = train_condgen(cfg, data, progress(err, a.log_every));
    r.checkpoint.save(a.out);
    if (!a.history.empty()) r.history.write_csv(a.history);
    out << summary_of(r, "ce", a.out).dump() << '\n';
}

void cmd_train_imggen(const Args& a, std::ostream& out, std::ostream& err) {
    const DatasetManifest m = load_manifest(a.data, a.split);
    const TrainConfig cfg = train_config(a.config, a.steps, a.seed, m);
    const nn::Checkpoint condgen = nn::Checkpoint::load(a.condgen);
    const auto data = make_training_set(training_samples(a.data, a.split));
    const TrainResult r = train_imggen(cfg, data, condgen, progress(err, a.log_every));
    r.checkpoint.save(a.out);
    if (!a.history.empty()) r.history.write_csv(a.history);
    out << summary_of(r, "l1", a.out).dump() << '\n';
}

// Fits the toy segmentation network on synthetic samples, or on a dataset
// split when --data is given.
void cmd_train_segmenter(const Args& a, std::ostream& out, std::ostream& err) {
    SegNetConfig cfg;
    cfg.width = a.width;
    cfg.height = a.height;
    if (a.steps >= 0) cfg.steps = a.steps;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    std::vector<TryOnSample> samples;
    if (!a.data.empty()) {
        const DatasetManifest m = load_manifest(a.data, a.split);
        cfg.width = m.width;
        cfg.height = m.height;
        for (std::size_t i = 0; i < m.pairs.size(); ++i) samples.push_back(load_sample(m, i));
    } else {
        const int n = a.fit_samples > 0 ? a.fit_samples : BackendContext{}.fit_samples;
        samples = synth_dataset(1'000'000'000ULL + cfg.seed * 1000, n, cfg.width, cfg.height);
    }
    ConvSegmenter seg(cfg);
    std::vector<double> losses;
    seg.fit(samples, [&](int step, double loss) {
        losses.push_back(loss);
        if (a.log_every > 0 && step % a.log_every == 0) err << json{{"step", step}, {"ce", loss}}.dump() << '\n';
    });
    seg.checkpoint().save(a.out);
    out << json{{"checkpoint", a.out},
                {"steps", losses.size()},
                {"ce_first", losses.empty() ? 0.0 : losses.front()},
                {"ce_last", losses.empty() ? 0.0 : losses.back()}}
               .dump()
        << '\n';
}

int cmd_tryon(const Args& a, std::ostream& out, std::ostream& err) {
    const auto pipeline = Pipeline::load(PipelineConfig::load(a.config));
    const RasterImage person = load_image(a.person);
    const RasterImage cloth = load_image(a.cloth);
    const TryOnResult r = pipeline->run(person, cloth);
    json timings = json::object();
    for (const StageTiming& t : r.timings) timings[t.stage] = t.seconds;
    if (!r.accepted) {
        err << json{{"error",
                     {{"code", "rejected"},
                      {"stage", "rejection_filter"},
                      {"message", "generated image scored below the rejection threshold"},
                      {"score", r.score},
                      {"tau", pipeline->config().tau}}}}
                   .dump()
            << '\n';
        return kExitRejected;
    }
    save_image(a.out, r.image);
    out << json{{"out", a.out}, {"score", r.score}, {"total_seconds", r.total_seconds}, {"timings", timings}}.dump()
        << '\n';
    return kExitOk;
}

void cmd_fid(const Args& a, std::ostream& out) {
    const auto real = load_image_dir(a.real);
    const auto fake = load_image_dir(a.fake);
    const std::uint64_t seed = a.seed < 0 ? 1234 : static_cast<std::uint64_t>(a.seed);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", fid(real, fake, random_conv_embedder(seed, a.dim)));
    out << buf << '\n';
}

// Ablation config: {"pipeline": path or object, "bindings": {...},
// "samples": {"dataset", "split", "synth_first_seed", "synth_count"},
// "embedder": {"seed", "dim"}, "tau": number}
void cmd_ablate(const Args& a, std::ostream& out) {
    const fs::path path = a.config;
    const json j = read_json(path);
    const fs::path base = path.parent_path();
    require(j.contains("pipeline"), ErrorCode::configuration, "ablation config needs a \"pipeline\" entry");
    PipelineConfig pipeline = j["pipeline"].is_string() ? PipelineConfig::load(base / j["pipeline"].get<std::string>())
                                                        : PipelineConfig::from_json(j["pipeline"], base);
    pipeline.tau = j.value("tau", 0.0);
    const AblationBindings bindings =
        j.contains("bindings") ? AblationBindings::from_json(j["bindings"]) : AblationBindings{};
    OracleSource source = pipeline.oracle;
    if (j.contains("samples")) {
        const json& s = j["samples"];
        source = OracleSource{};
        if (s.contains("dataset")) {
            source.dataset = fs::path(s["dataset"].get<std::string>());
            if (source.dataset.is_relative()) source.dataset = base / source.dataset;
        }
        source.split = s.value("split", std::string("test"));
        source.synth_first_seed = s.value("synth_first_seed", std::uint64_t{0});
        source.synth_count = s.value("synth_count", 0);
    }
    const json e = j.value("embedder", json::object());
    const ImageEmbedder embedder = random_conv_embedder(e.value("seed", std::uint64_t{1234}), e.value("dim", 64));
    const AblationReport report =
        pipeline_ablation(pipeline, bindings, source_samples(source, pipeline.width, pipeline.height), embedder);
    if (a.out.empty()) {
        out << report.csv();
    } else {
        write_text(a.out, report.csv());
        out << report.to_json().dump() << '\n';
    }
}

void cmd_bench(const Args& a, std::ostream& out) {
    std::vector<TryOnSample> samples;
    if (!a.data.empty()) {
        const DatasetManifest m = load_manifest(a.data, a.split);
        for (std::size_t i = 0; i < m.pairs.size(); ++i) samples.push_back(load_sample(m, i));
    } else {
        samples = synth_dataset(a.seed < 0 ? 900001 : static_cast<std::uint64_t>(a.seed), a.count, a.width, a.height);
    }
    const BackendContext ctx = toy_context(a, samples.front().width(), samples.front().height(), 7);
    const BackendBench bench = bench_backends(samples, ctx);
    out << (a.csv ? bench.csv() : bench.table());
}

void cmd_serve(const Args& a, std::ostream& out) {
    PipelineConfig cfg = PipelineConfig::load(a.config);
    ServiceOptions opts;
    opts.catalog_dir = a.catalog.empty() ? cfg.catalog_dir : fs::path(a.catalog);
    TryOnService service(opts);
    const int port = service.start(a.host, a.port);
    out << json{{"listening", port}, {"host", a.host}, {"status", "loading"}}.dump() << std::endl;
    service.set_pipeline(Pipeline::load(cfg));
    out << json{{"listening", port}, {"host", a.host}, {"status", "ready"}}.dump() << std::endl;
    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
}

void print_error(std::ostream& err, const std::string& code, const std::string& stage, const std::string& message) {
    err << json{{"error", {{"code", code}, {"stage", stage}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Virtual fitting room: data, training, evaluation and serving", "vfr"};
    app.require_subcommand(1);
    Args a;

    auto* synth = app.add_subcommand("synth", "write a synthetic annotated dataset");
    synth->add_option("--out", a.out, "dataset root")->required();
    synth->add_option("--count", a.count, "number of pairs");
    synth->add_option("--seed", a.seed, "first sample seed");
    synth->add_option("--width", a.width);
    synth->add_option("--height", a.height);
    synth->add_option("--split", a.split);

    auto* pre = app.add_subcommand("preprocess", "annotate a dataset split with perception backends");
    pre->add_option("--data", a.data, "dataset root")->required();
    pre->add_option("--split", a.split);
    pre->add_option("--segmenter", a.backends.segmenter);
    pre->add_option("--pose", a.backends.pose_detector);
    pre->add_option("--densepose", a.backends.densepose_estimator);
    pre->add_option("--cloth-segmenter", a.backends.cloth_segmenter);
    pre->add_option("--width", a.width, "resolution the toy backends are fitted at");
    pre->add_option("--height", a.height);
    pre->add_option("--seed", a.seed);
    pre->add_option("--segnet-steps", a.segnet_steps, "optimizer steps when fitting the toy segmenter");
    pre->add_option("--fit-samples", a.fit_samples, "synthetic samples used to fit toy backends");
    pre->add_option("--segnet-checkpoint", a.segnet_checkpoint, "pretrained toy segmenter");

    const auto add_train = [&](CLI::App* cmd) {
        cmd->add_option("--data", a.data, "dataset root")->required();
        cmd->add_option("--split", a.split);
        cmd->add_option("--config", a.config, "training config JSON (toy defaults when absent)");
        cmd->add_option("--steps", a.steps);
        cmd->add_option("--seed", a.seed);
        cmd->add_option("--out", a.out, "checkpoint path")->required();
        cmd->add_option("--history", a.history, "loss history CSV");
        cmd->add_option("--log-every", a.log_every, "print losses to stderr every N steps");
    };
    auto* tcond = app.add_subcommand("train-condgen", "train the condition generator");
    add_train(tcond);
    auto* timg = app.add_subcommand("train-imggen", "train the image generator");
    add_train(timg);
    timg->add_option("--condgen", a.condgen, "trained condition generator checkpoint")->required();

    auto* tryon = app.add_subcommand("tryon", "dress a person photo in a garment");
    tryon->add_option("--config", a.config, "pipeline config JSON")->required();
    tryon->add_option("--person", a.person)->required();
    tryon->add_option("--cloth", a.cloth)->required();
    tryon->add_option("--out", a.out, "output PNG")->required();

    auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between two image folders");
    fid_cmd->add_option("--real", a.real)->required();
    fid_cmd->add_option("--fake", a.fake)->required();
    fid_cmd->add_option("--seed", a.seed, "embedder seed");
    fid_cmd->add_option("--dim", a.dim, "embedding size");

    auto* ablate = app.add_subcommand("ablate", "run the six-experiment backend ablation");
    ablate->add_option("--config", a.config, "ablation config JSON")->required();
    ablate->add_option("--out", a.out, "CSV path (stdout when absent)");

    auto* bench = app.add_subcommand("bench-backends", "IoU and time per perception backend");
    bench->add_option("--data", a.data, "annotated dataset root (synthetic samples when absent)");
    bench->add_option("--split", a.split);
    bench->add_option("--count", a.count, "synthetic samples");
    bench->add_option("--seed", a.seed);
    bench->add_option("--width", a.width);
    bench->add_option("--height", a.height);
    bench->add_flag("--csv", a.csv);
    bench->add_option("--segnet-steps", a.segnet_steps, "optimizer steps when fitting the toy segmenter");
    bench->add_option("--fit-samples", a.fit_samples, "synthetic samples used to fit toy backends");
    bench->add_option("--segnet-checkpoint", a.segnet_checkpoint, "pretrained toy segmenter");

    auto* tseg = app.add_subcommand("train-segmenter", "fit the toy segmentation network");
    tseg->add_option("--out", a.out, "checkpoint path")->required();
    tseg->add_option("--data", a.data, "annotated dataset root (synthetic samples when absent)");
    tseg->add_option("--split", a.split);
    tseg->add_option("--steps", a.steps);
    tseg->add_option("--seed", a.seed);
    tseg->add_option("--samples", a.fit_samples, "synthetic samples to fit on");
    tseg->add_option("--width", a.width);
    tseg->add_option("--height", a.height);
    tseg->add_option("--log-every", a.log_every, "print losses to stderr every N steps");

    auto* serve = app.add_subcommand("serve", "run the HTTP try-on service");
    serve->add_option("--config", a.config, "pipeline config JSON")->required();
    serve->add_option("--port", a.port);
    serve->add_option("--host", a.host);
    serve->add_option("--catalog", a.catalog, "garment catalog directory");

    std::vector<const char*> argv;
    for (const std::string& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", "cli", e.what());
        return kExitUsage;
    }

    try {
        if (synth->parsed()) cmd_synth(a, out);
        else if (pre->parsed()) cmd_preprocess(a, out);
        else if (tcond->parsed()) cmd_train_condgen(a, out, err);
        else if (timg->parsed()) cmd_train_imggen(a, out, err);
        else if (tryon->parsed()) return cmd_tryon(a, out, err);
        else if (fid_cmd->parsed()) cmd_fid(a, out);
        else if (ablate->parsed()) cmd_ablate(a, out);
        else if (bench->parsed()) cmd_bench(a, out);
        else if (tseg->parsed()) cmd_train_segmenter(a, out, err);
        else if (serve->parsed()) cmd_serve(a, out);
        return kExitOk;
    } catch (const Error& e) {
        print_error(err, std::string(to_string(e.code())), e.stage().empty() ? "cli" : e.stage(), e.what());
        return e.code() == ErrorCode::usage ? kExitUsage : kExitError;
    } catch (const fs::filesystem_error& e) {
        print_error(err, "io", "cli", e.what());
        return kExitError;
    } catch (const std::exception& e) {
        print_error(err, "internal", "cli", e.what());
        return kExitError;
    }
}

}  // namespace vfr
