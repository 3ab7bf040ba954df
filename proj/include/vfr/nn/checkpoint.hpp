#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfr/nn/module.hpp"
#include "vfr/nn/optim.hpp"

namespace vfr::nn {

/// Self-describing archive: magic, JSON header (config, seed, step, array
/// index), then raw little-endian doubles. Serialization is canonical, so
/// save -> load -> save reproduces the same bytes.
struct Checkpoint {
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json meta = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::vector<std::pair<std::string, Tensor>> arrays;

    void put(const std::string& name, Tensor t);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(std::span<const std::uint8_t> bytes);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void store_params(Checkpoint& ckpt, const std::string& prefix, const ParamStore& params);
/// Every parameter in `params` must be present with a matching shape.
void load_params(const Checkpoint& ckpt, const std::string& prefix, ParamStore& params);

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const Adam& opt);
void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, Adam& opt);

/// FNV-1a over the serialized bytes, hex encoded; used as a model version tag.
std::string fingerprint(std::span<const std::uint8_t> bytes);

}  // namespace vfr::nn
