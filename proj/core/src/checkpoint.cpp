#include "ugt/checkpoint.hpp"

#include <cstring>

#include "json.hpp"

namespace ugt {

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& config_hash) {
    nlohmann::ordered_json meta;
    meta["config_hash"] = config_hash;
    nlohmann::ordered_json shapes = nlohmann::ordered_json::object();
    for (const auto& name : params.names()) shapes[name] = params.at(name).shape;
    meta["shapes"] = shapes;
    meta["dtype"] = "f64";
    std::string mj = meta.dump();

    std::string out = "UGT1";
    std::uint32_t len = static_cast<std::uint32_t>(mj.size());
    for (int i = 0; i < 4; ++i) out.push_back(char((len >> (8 * i)) & 0xff));
    out += mj;
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name);
        std::size_t off = out.size();
        out.resize(off + t.data.size() * 8);
        std::memcpy(out.data() + off, t.data.data(), t.data.size() * 8);
    }
    write_text_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::string data = read_text_file(path);
    if (data.size() < 8 || data.substr(0, 4) != "UGT1")
        throw DataError(path + ": not a UGT1 checkpoint");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t(std::uint8_t(data[4 + i])) << (8 * i);
    if (8 + std::size_t(len) > data.size()) throw DataError(path + ": truncated metadata");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(data.substr(8, len));
    } catch (const std::exception& e) {
        throw DataError(path + ": bad metadata: " + e.what());
    }

    Checkpoint ck;
    ck.config_hash = meta.at("config_hash").get<std::string>();
    std::size_t pos = 8 + len;
    const auto& shapes = meta.at("shapes");
    // ordered_json round-trips insertion order == sorted name order
    for (auto it = shapes.begin(); it != shapes.end(); ++it) {
        std::vector<std::size_t> shape = it.value().get<std::vector<std::size_t>>();
        Tensor t(shape);
        std::size_t bytes = t.data.size() * 8;
        if (pos + bytes > data.size()) throw DataError(path + ": truncated tensor data");
        std::memcpy(t.data.data(), data.data() + pos, bytes);
        pos += bytes;
        ck.params.add(it.key(), std::move(t));
    }
    if (pos != data.size()) throw DataError(path + ": trailing bytes");
    return ck;
}

} // namespace ugt
