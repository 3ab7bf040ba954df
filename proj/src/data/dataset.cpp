#include "vfr/data/dataset.hpp"

#include <fstream>
#include <sstream>

#include "vfr/error.hpp"
#include "vfr/imaging/image_io.hpp"
#include "vfr/preprocess/annotation_io.hpp"

namespace vfr {

namespace fs = std::filesystem;

namespace {

std::string stem_of(const std::string& file) { return fs::path(file).stem().string(); }

fs::path pairs_file(const fs::path& root, const std::string& split) { return root / (split + "_pairs.txt"); }

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) fail(ErrorCode::not_found, "missing file " + path.string());
}

template <typename F>
auto loading(const fs::path& path, F&& load) {
    require_file(path);
    try {
        return load(path);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::validation) throw;
        fail(ErrorCode::validation, path.string() + ": " + e.what());
    }
}

void require_size(const fs::path& path, int w, int h, int ew, int eh) {
    if (w != ew || h != eh) {
        fail(ErrorCode::validation, path.string() + ": resolution " + std::to_string(w) + "x" + std::to_string(h) +
                                        " differs from " + std::to_string(ew) + "x" + std::to_string(eh));
    }
}

RasterImage load_rgb(const fs::path& path) {
    return loading(path, [](const fs::path& p) {
        RasterImage img = load_image(p);
        return img.channels() == 3 ? img : gray_to_rgb(img);
    });
}

}  // namespace

SamplePaths sample_paths(const fs::path& root, const PairEntry& pair) {
    const std::string p = stem_of(pair.person), c = stem_of(pair.cloth);
    return {root / "image" / pair.person,
            root / "cloth" / pair.cloth,
            root / "cloth-mask" / (c + ".png"),
            root / "image-parse" / (p + ".png"),
            root / "openpose-json" / (p + "_keypoints.json"),
            root / "image-densepose" / (p + ".png"),
            root / "image-dressed" / (p + ".png"),
            root / "image-parse-dressed" / (p + ".png")};
}

TryOnSample load_sample(const DatasetManifest& manifest, std::size_t index) {
    require(index < manifest.pairs.size(), ErrorCode::invalid_input, "pair index out of range");
    const PairEntry& pair = manifest.pairs[index];
    const SamplePaths paths = sample_paths(manifest.root, pair);
    const int w = manifest.width, h = manifest.height;

    TryOnSample s;
    s.id = stem_of(pair.person);
    if (s.id.size() > 2 && s.id.ends_with("_0")) s.id.resize(s.id.size() - 2);
    s.person = load_rgb(paths.person);
    require_size(paths.person, s.person.width(), s.person.height(), w, h);
    s.cloth = load_rgb(paths.cloth);
    require_size(paths.cloth, s.cloth.width(), s.cloth.height(), w, h);
    s.cloth_mask = loading(paths.cloth_mask, [](const fs::path& p) { return load_mask(p); });
    require_size(paths.cloth_mask, s.cloth_mask.width(), s.cloth_mask.height(), w, h);
    s.parse = loading(paths.parse, [](const fs::path& p) { return load_parse(p); });
    require_size(paths.parse, s.parse.width(), s.parse.height(), w, h);
    s.pose = loading(paths.pose, [](const fs::path& p) { return load_pose(p); });
    for (const Keypoint& k : s.pose.joints) {
        if (k.detected() && (k.x < 0 || k.y < 0 || k.x >= w || k.y >= h)) {
            fail(ErrorCode::validation, paths.pose.string() + ": detected keypoint outside the frame");
        }
    }
    s.densepose = loading(paths.densepose, [](const fs::path& p) { return load_densepose(p); });
    require_size(paths.densepose, s.densepose.width(), s.densepose.height(), w, h);
    if (fs::exists(paths.dressed)) {
        s.dressed = load_rgb(paths.dressed);
        require_size(paths.dressed, s.dressed->width(), s.dressed->height(), w, h);
    }
    if (fs::exists(paths.dressed_parse)) {
        s.dressed_parse = loading(paths.dressed_parse, [](const fs::path& p) { return load_parse(p); });
        require_size(paths.dressed_parse, s.dressed_parse->width(), s.dressed_parse->height(), w, h);
    }
    return s;
}

std::vector<PairEntry> read_pairs(const fs::path& root, const std::string& split) {
    require(fs::is_directory(root), ErrorCode::not_found, "dataset root " + root.string() + " does not exist");
    const fs::path list = pairs_file(root, split);
    require_file(list);
    std::ifstream in(list);
    require(static_cast<bool>(in), ErrorCode::io, "cannot read " + list.string());

    std::vector<PairEntry> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream fields(line);
        PairEntry e;
        std::string extra;
        if (!(fields >> e.person)) continue;
        if (!(fields >> e.cloth) || (fields >> extra)) {
            fail(ErrorCode::validation,
                 list.string() + ":" + std::to_string(line_no) + ": expected \"person_file cloth_file\"");
        }
        pairs.push_back(std::move(e));
    }
    require(!pairs.empty(), ErrorCode::validation, "empty split: " + list.string());
    return pairs;
}

DatasetManifest load_manifest(const fs::path& root, const std::string& split) {
    DatasetManifest m;
    m.root = root;
    m.split = split;
    m.pairs = read_pairs(root, split);

    const RasterImage first = load_rgb(sample_paths(root, m.pairs.front()).person);
    m.width = first.width();
    m.height = first.height();
    for (std::size_t i = 0; i < m.pairs.size(); ++i) load_sample(m, i);
    return m;
}

DatasetManifest export_dataset(const std::vector<TryOnSample>& samples, const fs::path& root,
                               const std::string& split) {
    require(!samples.empty(), ErrorCode::validation, "empty split: no samples to export");
    const int w = samples.front().width(), h = samples.front().height();
    for (const TryOnSample& s : samples) {
        s.validate();
        require(s.width() == w && s.height() == h, ErrorCode::validation,
                "sample " + s.id + " resolution differs from the first sample");
    }

    std::error_code ec;
    for (const char* dir : {"image", "cloth", "cloth-mask", "image-parse", "openpose-json", "image-densepose",
                            "image-dressed", "image-parse-dressed"}) {
        fs::create_directories(root / dir, ec);
        require(!ec, ErrorCode::io, "cannot create " + (root / dir).string() + ": " + ec.message());
    }

    DatasetManifest m;
    m.root = root;
    m.split = split;
    m.width = w;
    m.height = h;
    std::string listing;
    for (const TryOnSample& s : samples) {
        require(!s.id.empty() && s.id.find_first_of(" \t\n/\\") == std::string::npos, ErrorCode::validation,
                "sample id '" + s.id + "' is not a valid file stem");
        const PairEntry pair{s.id + "_0.png", s.id + "_1.png"};
        const SamplePaths p = sample_paths(root, pair);
        write_file(p.person, encode_png(s.person));
        write_file(p.cloth, encode_png(s.cloth));
        write_file(p.cloth_mask, encode_mask_png(s.cloth_mask));
        write_file(p.parse, encode_parse_png(s.parse));
        const std::string pose = encode_pose_json(s.pose);
        write_file(p.pose, std::span(reinterpret_cast<const std::uint8_t*>(pose.data()), pose.size()));
        write_file(p.densepose, encode_densepose_png(s.densepose));
        if (s.dressed) write_file(p.dressed, encode_png(*s.dressed));
        if (s.dressed_parse) write_file(p.dressed_parse, encode_parse_png(*s.dressed_parse));
        listing += pair.person + " " + pair.cloth + "\n";
        m.pairs.push_back(pair);
    }
    write_file(pairs_file(root, split), std::span(reinterpret_cast<const std::uint8_t*>(listing.data()), listing.size()));
    return m;
}

}  // namespace vfr
