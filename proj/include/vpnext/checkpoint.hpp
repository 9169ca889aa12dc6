#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "vpnext/params.hpp"

namespace vpnext {

/// Checkpoint container format:
///   magic "VPNX", u32 version, u32 tensor count, then per tensor
///   (u32 name length, UTF-8 name, u8 rank, u32 extents, little-endian fp32
///   payload). Save order is parameter registration order, so a load/save
///   round-trip is byte-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("checkpoint: truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(out, u);
}

inline float get_f32(std::istream& in, const std::string& what) {
    std::uint32_t u = get_u32(in, what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore<float>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path);
    out.write("VPNX", 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(params.count()));
    for (const auto& e : params.entries()) {
        detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        out.put(static_cast<char>(e.value.rank()));
        for (int d : e.value.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : e.value.data) detail::put_f32(out, v);
    }
    if (!out) throw IoError("checkpoint: short write to " + path);
}

struct CheckpointTensor {
    std::string name;
    TensorData<float> value;
};

inline std::vector<CheckpointTensor> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VPNX", 4) != 0) throw IoError("checkpoint: bad magic in " + path);
    std::uint32_t version = detail::get_u32(in, "version");
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    std::uint32_t count = detail::get_u32(in, "tensor count");
    std::vector<CheckpointTensor> tensors;
    std::unordered_set<std::string> seen;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = detail::get_u32(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IoError("checkpoint: truncated name in " + path);
        if (!seen.insert(name).second) throw IoError("checkpoint: duplicate tensor name '" + name + "'");
        int rank = in.get();
        if (rank == EOF) throw IoError("checkpoint: truncated rank in " + path);
        Shape shape(static_cast<std::size_t>(rank));
        for (int d = 0; d < rank; ++d) shape[static_cast<std::size_t>(d)] = static_cast<int>(detail::get_u32(in, "extent"));
        TensorData<float> t(shape);
        for (auto& v : t.data) v = detail::get_f32(in, "payload of '" + name + "'");
        tensors.push_back({std::move(name), std::move(t)});
    }
    return tensors;
}

/// Loads a checkpoint into an existing parameter set. Any name or shape
/// disagreement reports the first offending tensor.
inline void load_checkpoint(const std::string& path, ParamStore<float>& params) {
    auto tensors = read_checkpoint(path);
    if (tensors.size() != params.count())
        throw ValueError("checkpoint: holds " + std::to_string(tensors.size()) + " tensors, model has " +
                         std::to_string(params.count()));
    for (const auto& t : tensors) {
        if (!params.has(t.name)) throw ValueError("checkpoint: tensor '" + t.name + "' unknown to this architecture");
        auto& dst = params.at(t.name);
        if (dst.shape != t.value.shape)
            throw ValueError("checkpoint: tensor '" + t.name + "' has shape " + shape_str(t.value.shape) +
                             ", model expects " + shape_str(dst.shape));
        dst.data = t.value.data;
    }
}

}  // namespace vpnext
