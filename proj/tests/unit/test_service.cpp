#include <gtest/gtest.h>

#include <future>

#include "fixtures.hpp"
#include "vfr/service/server.hpp"

#include <httplib.h>

using namespace vfr;
using nlohmann::json;

namespace {

const fixture::Models& models() {
    static const fixture::Models m = fixture::tiny_models();
    return m;
}

std::string png_of(const RasterImage& img) {
    const Bytes b = encode_png(img);
    return std::string(b.begin(), b.end());
}

httplib::MultipartFormData part(const std::string& name, const std::string& content, const std::string& file = "") {
    return {name, content, file, file.empty() ? "" : "image/png"};
}

class ServiceTest : public ::testing::Test {
  protected:
    void SetUp() override {
        catalog_ = fixture::temp_dir("catalog");
        for (int i = 0; i < 3; ++i) {
            const TryOnSample s = synth_sample(fixture::kOracleSeed + i, 48, 64);
            save_image(catalog_ / ("garment_" + std::to_string(i) + ".png"), s.cloth);
        }
        write_file(catalog_ / "notes.txt", Bytes{'x'});
        ServiceOptions o;
        o.catalog_dir = catalog_;
        service_ = std::make_unique<TryOnService>(o);
        port_ = service_->start("127.0.0.1", 0);
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(60);
    }
    void TearDown() override {
        service_->stop();
        std::filesystem::remove_all(catalog_);
    }
    void load(double tau) {
        PipelineConfig c = models().config;
        c.tau = tau;
        service_->set_pipeline(Pipeline::load(c));
    }
    httplib::Result tryon(const httplib::MultipartFormDataItems& items) { return client_->Post("/tryon", items); }

    std::filesystem::path catalog_;
    std::unique_ptr<TryOnService> service_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, HealthReflectsReadiness) {
    auto r = client_->Get("/health");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 503);
    EXPECT_EQ(json::parse(r->body)["status"], "not_ready");
    const TryOnSample s = synth_sample(fixture::kOracleSeed, 48, 64);
    auto t = tryon({part("person", png_of(s.person), "p.png"), part("cloth", png_of(s.cloth), "c.png")});
    EXPECT_EQ(t->status, 503);
    load(0.0);
    r = client_->Get("/health");
    EXPECT_EQ(r->status, 200);
    const json h = json::parse(r->body);
    EXPECT_EQ(h["status"], "ready");
    EXPECT_EQ(h["models"]["condgen"].get<std::string>().size(), 16u);
    EXPECT_TRUE(h["models"].contains("imggen"));
}

TEST_F(ServiceTest, CatalogListsGarmentsWithThumbnails) {
    auto r = client_->Get("/catalog");
    ASSERT_EQ(r->status, 200);
    const json items = json::parse(r->body)["items"];
    ASSERT_EQ(items.size(), 3u);
    EXPECT_EQ(items[0]["id"], "garment_0.png");
    EXPECT_EQ(items[2]["id"], "garment_2.png");
    EXPECT_EQ(items[0]["thumbnail"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
    auto img = client_->Get("/catalog/garment_1.png");
    ASSERT_EQ(img->status, 200);
    EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(client_->Get("/catalog/missing.png")->status, 404);
}

TEST_F(ServiceTest, TryOnHappyPathAndCatalogId) {
    load(0.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed, 48, 64);
    auto r = tryon({part("person", png_of(s.person), "p.png"), part("cloth", png_of(s.cloth), "c.png")});
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(r->get_header_value("X-Accepted"), "true");
    const RasterImage out = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(r->body.data()), r->body.size()));
    EXPECT_EQ(out.width(), 48);
    EXPECT_EQ(out.height(), 64);
    EXPECT_EQ(json::parse(r->get_header_value("X-Stage-Timings")).size(), pipeline_stages().size());
    auto by_id = tryon({part("person", png_of(s.person), "p.png"), part("cloth_id", "garment_0.png")});
    ASSERT_EQ(by_id->status, 200) << by_id->body;
    EXPECT_EQ(by_id->body, r->body);
}

TEST_F(ServiceTest, RequestValidationMatrix) {
    load(0.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed, 48, 64);
    const auto expect_400 = [&](const httplib::MultipartFormDataItems& items, const std::string& needle) {
        auto r = tryon(items);
        ASSERT_TRUE(r);
        EXPECT_EQ(r->status, 400) << r->body;
        const json e = json::parse(r->body)["error"];
        EXPECT_EQ(e["stage"], "input");
        EXPECT_NE(e["message"].get<std::string>().find(needle), std::string::npos) << e.dump();
    };
    expect_400({part("person", png_of(s.person), "p.png")}, "'cloth'");
    expect_400({part("cloth", png_of(s.cloth), "c.png")}, "'person'");
    expect_400({part("person", "not an image", "p.png"), part("cloth", png_of(s.cloth), "c.png")}, "decodable");
    expect_400({part("person", png_of(s.person), "p.png"), part("cloth_id", "../secret.png")}, "invalid catalog id");
    expect_400({part("person", png_of(s.person), "p.png"), part("cloth_id", "nothing.png")}, "nothing.png");
    auto plain = client_->Post("/tryon", "{}", "application/json");
    EXPECT_EQ(plain->status, 400);
}

TEST_F(ServiceTest, RejectionIs422WithScore) {
    load(1.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed, 48, 64);
    auto r = tryon({part("person", png_of(s.person), "p.png"), part("cloth", png_of(s.cloth), "c.png")});
    ASSERT_EQ(r->status, 422);
    const json body = json::parse(r->body);
    EXPECT_EQ(body["accepted"], false);
    EXPECT_EQ(body["stage"], "rejection_filter");
    EXPECT_GT(body["score"].get<double>(), 0.0);
    EXPECT_LT(body["score"].get<double>(), 1.0);
}

TEST_F(ServiceTest, StageFailureIs500NamingTheStage) {
    load(0.0);
    const TryOnSample stranger = synth_sample(4242, 48, 64);
    const TryOnSample known = synth_sample(fixture::kOracleSeed, 48, 64);
    auto r = tryon({part("person", png_of(stranger.person), "p.png"), part("cloth", png_of(known.cloth), "c.png")});
    ASSERT_EQ(r->status, 500);
    const json e = json::parse(r->body)["error"];
    EXPECT_EQ(e["stage"], "segment_human");
    EXPECT_EQ(e["code"], "backend_error");
}

TEST_F(ServiceTest, ConcurrentIdenticalRequestsAreByteIdentical) {
    load(0.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed + 3, 48, 64);
    const httplib::MultipartFormDataItems items = {part("person", png_of(s.person), "p.png"),
                                                   part("cloth", png_of(s.cloth), "c.png")};
    std::vector<std::future<std::pair<int, std::string>>> jobs;
    for (int i = 0; i < 4; ++i)
        jobs.push_back(std::async(std::launch::async, [&] {
            httplib::Client c("127.0.0.1", port_);
            c.set_read_timeout(60);
            auto r = c.Post("/tryon", items);
            return r ? std::pair(r->status, r->body) : std::pair(-1, std::string());
        }));
    std::vector<std::pair<int, std::string>> results;
    for (auto& j : jobs) results.push_back(j.get());
    for (const auto& r : results) {
        EXPECT_EQ(r.first, 200);
        EXPECT_EQ(r.second, results[0].second);
    }
    const json m = json::parse(client_->Get("/metrics")->body);
    EXPECT_EQ(m["accepted"], 4);
    EXPECT_EQ(m["stages"]["segment_human"]["count"], 4);
    EXPECT_EQ(m["end_to_end"]["count"], 4);
}
