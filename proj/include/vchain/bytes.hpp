#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace vchain {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

/// 32-byte SHA-256 digest.
struct HashDigest {
    std::array<uint8_t, 32> d{};

    bool operator==(const HashDigest&) const = default;
    auto operator<=>(const HashDigest&) const = default;
    bool is_zero() const;
    std::string hex() const;
};

HashDigest sha256(BytesView data);
HashDigest sha256(const std::string& s);

/// Digest of the empty string; used for empty merkle/skip commitments.
const HashDigest& empty_hash();

std::string to_hex(BytesView data);
Bytes from_hex(const std::string& hex);

/// Little-endian append/read helpers for canonical encodings.
class ByteWriter {
public:
    Bytes out;

    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(BytesView v) { out.insert(out.end(), v.begin(), v.end()); }
    void raw(const Bytes& v) { out.insert(out.end(), v.begin(), v.end()); }
    void digest(const HashDigest& h) { out.insert(out.end(), h.d.begin(), h.d.end()); }
    void str(const std::string& s); // u32 length prefix + bytes
    void blob(BytesView v);         // u32 length prefix + bytes
};

class ByteReader {
public:
    explicit ByteReader(BytesView data) : data_(data) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    Bytes raw(size_t n);
    HashDigest digest();
    std::string str();
    Bytes blob();
    bool done() const { return pos_ == data_.size(); }
    size_t remaining() const { return data_.size() - pos_; }

private:
    void need(size_t n);
    BytesView data_;
    size_t pos_ = 0;
};

Bytes read_file(const std::string& path);
void write_file_atomic(const std::string& path, BytesView data);

} // namespace vchain
