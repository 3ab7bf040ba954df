#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vfr/data/sample.hpp"

namespace vfr {

/// One line of `<split>_pairs.txt`: person file and cloth file names.
struct PairEntry {
    std::string person;
    std::string cloth;

    friend bool operator==(const PairEntry&, const PairEntry&) = default;
};

/// On-disk layout (file stems are shared between a photo and its annotations):
///   image/<p>             person photo (PNG or JPEG)
///   cloth/<c>             flat garment photo
///   cloth-mask/<c stem>.png
///   image-parse/<p stem>.png            indexed label PNG
///   openpose-json/<p stem>_keypoints.json
///   image-densepose/<p stem>.png        IUV PNG
///   image-dressed/<p stem>.png          synthetic ground truth (optional)
///   image-parse-dressed/<p stem>.png    synthetic ground truth (optional)
///   <split>_pairs.txt                   "person_file cloth_file" per line
struct DatasetManifest {
    std::filesystem::path root;
    std::string split;
    std::vector<PairEntry> pairs;
    int width = 0;
    int height = 0;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct SamplePaths {
    std::filesystem::path person, cloth, cloth_mask, parse, pose, densepose, dressed, dressed_parse;
};

SamplePaths sample_paths(const std::filesystem::path& root, const PairEntry& pair);

/// Parses `<split>_pairs.txt` without touching the referenced files.
std::vector<PairEntry> read_pairs(const std::filesystem::path& root, const std::string& split);

/// Reads and validates the split: every referenced file must exist, parse and
/// share one resolution. Missing files are not_found errors naming the path;
/// unreadable or mismatched ones are validation errors naming the path.
DatasetManifest load_manifest(const std::filesystem::path& root, const std::string& split);

/// Loads pair `index` of the manifest (dressed ground truth when present).
TryOnSample load_sample(const DatasetManifest& manifest, std::size_t index);

/// Writes samples in the layout above. Samples must share one resolution.
DatasetManifest export_dataset(const std::vector<TryOnSample>& samples, const std::filesystem::path& root,
                               const std::string& split = "train");

}  // namespace vfr
