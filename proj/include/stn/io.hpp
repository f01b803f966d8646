#ifndef STN_IO_HPP
#define STN_IO_HPP

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "stn/errors.hpp"

namespace stn {

// Little-endian binary writer/reader over std::fstream. The reader tracks
// its byte offset so format errors can point at the offending position.

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing");
    }

    void write_bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw FormatError("write failed on '" + path_ + "'");
    }

    void write_u8(std::uint8_t v) { write_bytes(&v, 1); }

    void write_u16(std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xff),
                                   static_cast<std::uint8_t>(v >> 8)};
        write_bytes(b, 2);
    }

    void write_u32(std::uint32_t v) {
        const std::uint8_t b[4] = {
            static_cast<std::uint8_t>(v & 0xff), static_cast<std::uint8_t>((v >> 8) & 0xff),
            static_cast<std::uint8_t>((v >> 16) & 0xff), static_cast<std::uint8_t>(v >> 24)};
        write_bytes(b, 4);
    }

    void write_i32(std::int32_t v) { write_u32(static_cast<std::uint32_t>(v)); }
    void write_f32(float v) { write_u32(std::bit_cast<std::uint32_t>(v)); }

    void write_f32_array(const std::vector<float>& values) {
        for (float v : values) write_f32(v);
    }

    void write_magic(const char (&magic)[5]) { write_bytes(magic, 4); }

private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open '" + path + "' for reading");
    }

    std::size_t offset() const { return offset_; }

    void read_bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError("'" + path_ + "' truncated at byte " + std::to_string(offset_));
        }
        offset_ += n;
    }

    std::uint8_t read_u8() {
        std::uint8_t v;
        read_bytes(&v, 1);
        return v;
    }

    std::uint16_t read_u16() {
        std::uint8_t b[2];
        read_bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t read_u32() {
        std::uint8_t b[4];
        read_bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::int32_t read_i32() { return static_cast<std::int32_t>(read_u32()); }
    float read_f32() { return std::bit_cast<float>(read_u32()); }

    void read_f32_array(std::vector<float>& values) {
        for (float& v : values) v = read_f32();
    }

    void expect_magic(const char (&magic)[5]) {
        const std::size_t at = offset_;
        char got[4];
        read_bytes(got, 4);
        if (got[0] != magic[0] || got[1] != magic[1] || got[2] != magic[2] || got[3] != magic[3]) {
            throw FormatError("'" + path_ + "': bad magic at byte " + std::to_string(at) +
                              " (expected " + magic + ")");
        }
    }

    void expect_version(std::uint32_t version) {
        const std::size_t at = offset_;
        const std::uint32_t got = read_u32();
        if (got != version) {
            throw FormatError("'" + path_ + "': unsupported version " + std::to_string(got) +
                              " at byte " + std::to_string(at));
        }
    }

    // True if the stream has no bytes left.
    bool at_end() {
        return in_.peek() == std::char_traits<char>::eof();
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

} // namespace stn

#endif
