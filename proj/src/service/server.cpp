#include "vfr/service/server.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "vfr/error.hpp"

namespace vfr {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<CatalogItem> list_catalog(const fs::path& dir) {
    std::vector<CatalogItem> items;
    if (dir.empty()) return items;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorCode::not_found, "catalog directory " + dir.string() + " does not exist");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            items.push_back({entry.path().filename().string(), entry.path()});
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return items;
}

namespace {

struct LatencyLog {
    mutable std::mutex mutex;
    std::map<std::string, std::vector<double>> stages;
    std::vector<double> end_to_end;
    std::size_t requests = 0, accepted = 0, rejected = 0, client_errors = 0, failures = 0;
};

json summarize(std::vector<double> v) {
    if (v.empty()) return {{"count", 0}};
    std::sort(v.begin(), v.end());
    double total = 0.0;
    for (double x : v) total += x;
    const auto pct = [&](double p) { return v[static_cast<std::size_t>(p * (v.size() - 1) + 0.5)]; };
    return {{"count", v.size()}, {"mean", total / v.size()}, {"p50", pct(0.5)}, {"p95", pct(0.95)},
            {"max", v.back()}};
}

json error_body(ErrorCode code, const std::string& stage, const std::string& message) {
    return {{"error", {{"code", std::string(to_string(code))}, {"stage", stage}, {"message", message}}}};
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input:
        case ErrorCode::validation:
        case ErrorCode::usage:
        case ErrorCode::not_found: return 400;
        default: return 500;
    }
}

json timings_json(const std::vector<StageTiming>& timings) {
    json out = json::array();
    for (const StageTiming& t : timings) out.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    return out;
}

bool safe_id(const std::string& id) {
    return !id.empty() && id.find('/') == std::string::npos && id.find('\\') == std::string::npos && id != "." &&
           id != "..";
}

}  // namespace

struct TryOnService::Impl {
    ServiceOptions options;
    httplib::Server server;
    std::shared_ptr<const Pipeline> pipeline;
    mutable std::mutex pipeline_mutex;
    LatencyLog log;
    std::thread thread;

    std::shared_ptr<const Pipeline> current() const {
        std::lock_guard lock(pipeline_mutex);
        return pipeline;
    }

    void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void send_error(httplib::Response& res, const Error& e, const std::string& fallback_stage) {
        const std::string stage = e.stage().empty() ? fallback_stage : e.stage();
        const int status = http_status(e.code());
        {
            std::lock_guard lock(log.mutex);
            (status == 400 ? log.client_errors : log.failures)++;
        }
        send_json(res, status, error_body(e.code(), stage, e.what()));
    }

    RasterImage decode_part(const httplib::Request& req, const std::string& field) {
        const auto& file = req.get_file_value(field);
        require(!file.content.empty(), ErrorCode::invalid_input, "multipart field '" + field + "' is empty");
        try {
            return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(file.content.data()),
                                          file.content.size()));
        } catch (const Error& e) {
            fail(ErrorCode::invalid_input, "multipart field '" + field + "' is not a decodable image: " + e.what());
        }
    }

    RasterImage catalog_image(const std::string& id) {
        require(safe_id(id), ErrorCode::invalid_input, "invalid catalog id '" + id + "'");
        for (const CatalogItem& item : list_catalog(options.catalog_dir))
            if (item.id == id) return load_image(item.path);
        fail(ErrorCode::not_found, "no catalog garment with id '" + id + "'");
    }

    void handle_tryon(const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(log.mutex);
            ++log.requests;
        }
        const auto p = current();
        if (!p) {
            send_json(res, 503, error_body(ErrorCode::configuration, "startup", "models are not loaded yet"));
            return;
        }
        RasterImage person, cloth;
        try {
            require(req.is_multipart_form_data(), ErrorCode::invalid_input,
                    "request must be multipart/form-data with fields 'person' and 'cloth' or 'cloth_id'");
            require(req.has_file("person"), ErrorCode::invalid_input, "missing multipart field 'person'");
            const bool by_id = req.has_file("cloth_id");
            require(req.has_file("cloth") || by_id, ErrorCode::invalid_input,
                    "missing multipart field 'cloth' (or 'cloth_id')");
            person = decode_part(req, "person");
            cloth = req.has_file("cloth") ? decode_part(req, "cloth") : catalog_image(req.get_file_value("cloth_id").content);
        } catch (const Error& e) {
            send_error(res, e, "input");
            return;
        }

        TryOnResult result;
        try {
            result = p->run(person, cloth);
        } catch (const Error& e) {
            send_error(res, e, "pipeline");
            return;
        }
        {
            std::lock_guard lock(log.mutex);
            for (const StageTiming& t : result.timings) log.stages[t.stage].push_back(t.seconds);
            if (p->config().timing) log.end_to_end.push_back(result.total_seconds);
            (result.accepted ? log.accepted : log.rejected)++;
        }
        if (!result.accepted) {
            send_json(res, 422,
                      {{"accepted", false},
                       {"score", result.score},
                       {"tau", p->config().tau},
                       {"stage", "rejection_filter"},
                       {"message", "generated image rejected by the discriminator"},
                       {"timings", timings_json(result.timings)}});
            return;
        }
        const Bytes png = encode_png(result.image);
        if (req.get_param_value("format") == "json") {
            send_json(res, 200,
                      {{"accepted", true},
                       {"score", result.score},
                       {"image", httplib::detail::base64_encode(std::string(png.begin(), png.end()))},
                       {"timings", timings_json(result.timings)},
                       {"total_seconds", result.total_seconds}});
            return;
        }
        res.status = 200;
        res.set_header("X-Accepted", "true");
        res.set_header("X-Rejection-Score", std::to_string(result.score));
        res.set_header("X-Stage-Timings", timings_json(result.timings).dump());
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }

    void handle_catalog(httplib::Response& res) {
        try {
            json items = json::array();
            for (const CatalogItem& item : list_catalog(options.catalog_dir)) {
                const RasterImage img = load_image(item.path);
                const int tw = std::min(options.thumbnail_width, img.width());
                const int th = std::max(1, img.height() * tw / img.width());
                const Bytes thumb = encode_png(resize_bilinear(img, tw, th));
                items.push_back({{"id", item.id},
                                 {"width", img.width()},
                                 {"height", img.height()},
                                 {"thumbnail", "data:image/png;base64," + httplib::detail::base64_encode(
                                                                              std::string(thumb.begin(), thumb.end()))}});
            }
            send_json(res, 200, {{"items", items}});
        } catch (const Error& e) {
            send_error(res, e, "catalog");
        }
    }

    void handle_catalog_item(const std::string& id, httplib::Response& res) {
        try {
            const Bytes png = encode_png(catalog_image(id));
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        } catch (const Error& e) {
            send_json(res, e.code() == ErrorCode::not_found ? 404 : http_status(e.code()),
                      error_body(e.code(), "catalog", e.what()));
        }
    }

    json metrics_json() const {
        std::lock_guard lock(log.mutex);
        json stages = json::object();
        for (const auto& [name, values] : log.stages) stages[name] = summarize(values);
        return {{"requests", log.requests},   {"accepted", log.accepted}, {"rejected", log.rejected},
                {"client_errors", log.client_errors}, {"failures", log.failures}, {"stages", stages},
                {"end_to_end", summarize(log.end_to_end)}};
    }

    void routes() {
        server.set_payload_max_length(options.max_upload_bytes);
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            const auto p = current();
            if (!p) {
                send_json(res, 503, {{"status", "not_ready"}});
                return;
            }
            send_json(res, 200,
                      {{"status", "ready"},
                       {"models", p->model_versions()},
                       {"resolution", {{"width", p->config().width}, {"height", p->config().height}}},
                       {"tau", p->config().tau}});
        });
        server.Get("/catalog", [this](const httplib::Request&, httplib::Response& res) { handle_catalog(res); });
        server.Get(R"(/catalog/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle_catalog_item(req.matches[1], res);
        });
        server.Post("/tryon", [this](const httplib::Request& req, httplib::Response& res) { handle_tryon(req, res); });
        server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, metrics_json());
        });
        server.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "unexpected failure";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            send_json(res, 500, error_body(ErrorCode::backend_error, "server", message));
        });
    }
};

TryOnService::TryOnService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = std::move(options);
    impl_->routes();
}

TryOnService::~TryOnService() { stop(); }

void TryOnService::set_pipeline(std::shared_ptr<const Pipeline> pipeline) {
    std::lock_guard lock(impl_->pipeline_mutex);
    impl_->pipeline = std::move(pipeline);
}

bool TryOnService::ready() const { return impl_->current() != nullptr; }

int TryOnService::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    require(bound > 0, ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void TryOnService::run(const std::string& host, int port) {
    require(impl_->server.bind_to_port(host, port), ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    impl_->server.listen_after_bind();
}

void TryOnService::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

json TryOnService::metrics() const { return impl_->metrics_json(); }

}  // namespace vfr
