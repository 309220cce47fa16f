#include "vchain/bytes.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vchain/errors.hpp"

namespace vchain {

bool HashDigest::is_zero() const {
    for (auto b : d)
        if (b) return false;
    return true;
}

std::string HashDigest::hex() const {
    return to_hex(BytesView(d.data(), d.size()));
}

HashDigest sha256(BytesView data) {
    HashDigest h;
    unsigned int len = 32;
    EVP_Digest(data.data(), data.size(), h.d.data(), &len, EVP_sha256(), nullptr);
    return h;
}

HashDigest sha256(const std::string& s) {
    return sha256(BytesView(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

const HashDigest& empty_hash() {
    static const HashDigest h = sha256(BytesView{});
    return h;
}

std::string to_hex(BytesView data) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (uint8_t b : data) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ParseError("invalid hex character");
}

Bytes from_hex(const std::string& hex) {
    if (hex.size() % 2) throw ParseError("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>(hex_nibble(hex[2 * i]) << 4 | hex_nibble(hex[2 * i + 1]));
    return out;
}

void ByteWriter::u16(uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back(v >> 8);
}

void ByteWriter::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void ByteWriter::str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void ByteWriter::blob(BytesView v) {
    u32(static_cast<uint32_t>(v.size()));
    raw(v);
}

void ByteReader::need(size_t n) {
    if (pos_ + n > data_.size()) throw ParseError("truncated input");
}

uint8_t ByteReader::u8() {
    need(1);
    return data_[pos_++];
}

uint16_t ByteReader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] | data_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

Bytes ByteReader::raw(size_t n) {
    need(n);
    Bytes v(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return v;
}

HashDigest ByteReader::digest() {
    need(32);
    HashDigest h;
    std::memcpy(h.d.data(), data_.data() + pos_, 32);
    pos_ += 32;
    return h;
}

std::string ByteReader::str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

Bytes ByteReader::blob() {
    uint32_t n = u32();
    return raw(n);
}

Bytes read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    auto n = f.tellg();
    f.seekg(0);
    Bytes data(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(data.data()), n);
    if (!f) throw IoError("read failed: " + path);
    return data;
}

void write_file_atomic(const std::string& path, BytesView data) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open file for writing: " + tmp);
        f.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size()));
        if (!f) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path + ": " + ec.message());
}

} // namespace vchain
