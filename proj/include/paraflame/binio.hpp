#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "paraflame/common.hpp"

// Little-endian byte packing shared by the trajectory container and the
// checkpoint format. Encoding is explicit byte shifts, independent of host
// endianness.

namespace paraflame::io {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    put_bytes(out, b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 8);
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 8);
    put_u64(out, u);
}

inline void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

/// Sequential reader that reports the byte offset of any malformed read.
class Reader {
  public:
    Reader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(p[i]);
        return v;
    }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(p[i]);
        return v;
    }
    double f64() {
        const std::uint64_t u = u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t len = u32();
        const char* p = take(len);
        return std::string(p, len);
    }
    const char* take(std::size_t n) {
        if (pos_ + n > buf_.size()) throw FormatError(what_ + ": truncated file", pos_);
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t offset() const { return pos_; }
    bool exhausted() const { return pos_ == buf_.size(); }
    void fail(const std::string& why, std::uint64_t at) const { throw FormatError(what_ + ": " + why, at); }

  private:
    const std::string& buf_;
    std::string what_;
    std::uint64_t pos_ = 0;
};

/// Writes via a temp file and rename so readers never observe partial output.
inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace paraflame::io
