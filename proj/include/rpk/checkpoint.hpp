#ifndef RPK_CHECKPOINT_HPP
#define RPK_CHECKPOINT_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rpk/common.hpp"

namespace rpk {

// Versioned binary manifest of named tensors: magic "RPKT", u32 version, u64
// entry count, then per entry name length/bytes, 3 x i64 dims, f64 data.
// Little-endian host layout assumed.
struct CkptEntry {
    std::string name;
    std::array<int64_t, 3> dims{1, 1, 1};
    std::vector<double> data;
};

inline constexpr uint32_t kCkptVersion = 1;

inline void write_ckpt(const std::string& path, const std::vector<CkptEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("checkpoint: cannot open " + path + " for writing");
    out.write("RPKT", 4);
    uint32_t ver = kCkptVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    uint64_t n = entries.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& e : entries) {
        uint32_t len = static_cast<uint32_t>(e.name.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(e.name.data(), len);
        out.write(reinterpret_cast<const char*>(e.dims.data()), sizeof(int64_t) * 3);
        int64_t numel = e.dims[0] * e.dims[1] * e.dims[2];
        if (numel != static_cast<int64_t>(e.data.size()))
            throw ShapeError("checkpoint: entry " + e.name + " dims/data mismatch");
        out.write(reinterpret_cast<const char*>(e.data.data()), sizeof(double) * e.data.size());
    }
    if (!out) throw InputError("checkpoint: write failed for " + path);
}

inline std::vector<CkptEntry> read_ckpt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RPKT", 4) != 0) throw ParseError("checkpoint: bad magic in " + path);
    uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kCkptVersion) throw UnsupportedFormat("checkpoint: version " + std::to_string(ver));
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<CkptEntry> entries;
    entries.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        CkptEntry e;
        uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        if (!in || len > (1u << 20)) throw ParseError("checkpoint: corrupt entry name");
        e.name.resize(len);
        in.read(e.name.data(), len);
        in.read(reinterpret_cast<char*>(e.dims.data()), sizeof(int64_t) * 3);
        int64_t numel = e.dims[0] * e.dims[1] * e.dims[2];
        if (!in || numel < 0) throw ParseError("checkpoint: corrupt dims for " + e.name);
        e.data.resize(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(e.data.data()), sizeof(double) * e.data.size());
        if (!in) throw ParseError("checkpoint: truncated data for " + e.name);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace rpk

#endif  // RPK_CHECKPOINT_HPP
