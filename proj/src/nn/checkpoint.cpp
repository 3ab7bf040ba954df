#include "vfr/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vfr/error.hpp"

namespace vfr::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'F', 'R', 'C', 'K', 'P', 'T', '1'};

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t read_u64(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, Tensor t) {
    auto it = std::find_if(arrays.begin(), arrays.end(), [&](const auto& e) { return e.first == name; });
    if (it != arrays.end()) {
        it->second = std::move(t);
    } else {
        arrays.emplace_back(name, std::move(t));
    }
}

bool Checkpoint::has(const std::string& name) const {
    return std::any_of(arrays.begin(), arrays.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = std::find_if(arrays.begin(), arrays.end(), [&](const auto& e) { return e.first == name; });
    require(it != arrays.end(), ErrorCode::not_found, "checkpoint has no array " + name);
    return it->second;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : arrays) {
        const Shape& s = t.shape();
        index.push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}});
        offset += t.numel();
    }
    const nlohmann::json header = {{"format", 1},  {"config", config}, {"meta", meta},
                                   {"seed", seed}, {"step", step},     {"arrays", index}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    append_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    const std::size_t data_at = out.size();
    out.resize(data_at + offset * sizeof(double));
    std::size_t cursor = data_at;
    for (const auto& [name, t] : arrays) {
        std::memcpy(out.data() + cursor, t.data().data(), t.numel() * sizeof(double));
        cursor += t.numel() * sizeof(double);
    }
    return out;
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 16 && std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()),
            ErrorCode::validation, "not a checkpoint archive (bad magic)");
    const std::uint64_t header_len = read_u64(bytes, 8);
    require(16 + header_len <= bytes.size(), ErrorCode::validation, "checkpoint header truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::validation, std::string("checkpoint header corrupt: ") + e.what());
    }
    Checkpoint ckpt;
    try {
        require(header.at("format").get<int>() == 1, ErrorCode::validation, "unsupported checkpoint format");
        ckpt.config = header.at("config");
        ckpt.meta = header.at("meta");
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.step = header.at("step").get<std::int64_t>();
        const std::size_t data_at = 16 + header_len;
        for (const auto& entry : header.at("arrays")) {
            const auto dims = entry.at("shape").get<std::vector<int>>();
            require(dims.size() == 4, ErrorCode::validation, "checkpoint array shape must be 4-D");
            const Shape s{dims[0], dims[1], dims[2], dims[3]};
            const std::size_t offset = entry.at("offset").get<std::size_t>();
            const std::size_t begin = data_at + offset * sizeof(double);
            require(begin + s.numel() * sizeof(double) <= bytes.size(), ErrorCode::validation,
                    "checkpoint data truncated");
            Tensor t(s);
            std::memcpy(t.data().data(), bytes.data() + begin, s.numel() * sizeof(double));
            ckpt.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::validation, std::string("checkpoint header malformed: ") + e.what());
    }
    return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::not_found, "cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void store_params(Checkpoint& ckpt, const std::string& prefix, const ParamStore& params) {
    for (const auto& [name, v] : params.entries()) ckpt.put(prefix + name, v.value());
}

void load_params(const Checkpoint& ckpt, const std::string& prefix, ParamStore& params) {
    for (auto& [name, v] : params.entries()) {
        const Tensor& t = ckpt.get(prefix + name);
        require(t.shape() == v.shape(), ErrorCode::validation,
                "checkpoint array " + prefix + name + " has shape " + t.shape().str() + ", model expects " +
                    v.shape().str());
        v.mutable_value() = t;
    }
}

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const Adam& opt) {
    ckpt.meta[prefix + "steps"] = opt.steps();
    for (const auto& [name, t] : opt.first_moments()) ckpt.put(prefix + "m/" + name, t);
    for (const auto& [name, t] : opt.second_moments()) ckpt.put(prefix + "v/" + name, t);
}

void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, Adam& opt) {
    opt.first_moments().clear();
    opt.second_moments().clear();
    opt.set_steps(ckpt.meta.value(prefix + "steps", std::int64_t{0}));
    const std::string m_prefix = prefix + "m/";
    const std::string v_prefix = prefix + "v/";
    for (const auto& [name, t] : ckpt.arrays) {
        if (name.rfind(m_prefix, 0) == 0) opt.first_moments()[name.substr(m_prefix.size())] = t;
        if (name.rfind(v_prefix, 0) == 0) opt.second_moments()[name.substr(v_prefix.size())] = t;
    }
}

std::string fingerprint(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace vfr::nn
