#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfr/service/pipeline.hpp"

namespace vfr {

struct ServiceOptions {
    std::filesystem::path catalog_dir;  // garment images; ids are file names
    int thumbnail_width = 48;
    std::size_t max_upload_bytes = 16u << 20;
};

/// One garment of the catalog directory.
struct CatalogItem {
    std::string id;
    std::filesystem::path path;
};

/// Image files (png, jpg, jpeg) directly inside `dir`, sorted by id.
std::vector<CatalogItem> list_catalog(const std::filesystem::path& dir);

/// HTTP front end over a shared read-only pipeline:
///   GET  /health   readiness and model versions (503 until a pipeline is set)
///   GET  /catalog  garment ids with PNG thumbnails; GET /catalog/<id> the image
///   POST /tryon    multipart person + (cloth | cloth_id); PNG on success,
///                  422 JSON on rejection, 400 invalid input, 500 stage failure
///   GET  /metrics  per-stage latency summaries
class TryOnService {
  public:
    explicit TryOnService(ServiceOptions options = {});
    ~TryOnService();
    TryOnService(const TryOnService&) = delete;
    TryOnService& operator=(const TryOnService&) = delete;

    void set_pipeline(std::shared_ptr<const Pipeline> pipeline);
    bool ready() const;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

    nlohmann::json metrics() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vfr
