#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vchain/bytes.hpp"
#include "vchain/transform.hpp"

namespace vchain {

/// One temporal record: timestamp, quantized numeric vector, keyword
/// multiset (repeats allowed). Keywords are kept sorted so the canonical
/// serialization, and therefore the object id, is deterministic.
struct TemporalObject {
    uint64_t t = 0;
    std::vector<uint64_t> v;
    std::vector<std::string> w;

    void canonicalize();

    /// enc(V) || enc(W), without the timestamp.
    Bytes payload_bytes() const;
    HashDigest payload_digest() const { return sha256(payload_bytes()); }
    /// id = sha256(le64(t) || payload_digest). The two-level shape lets a
    /// boundary proof reveal only (t, payload_digest) while still binding
    /// the timestamp.
    HashDigest id() const;

    void serialize_into(ByteWriter& w) const;
    static TemporalObject deserialize(ByteReader& r);
    bool operator==(const TemporalObject&) const = default;
};

HashDigest object_id_from_parts(uint64_t t, const HashDigest& payload_digest);

/// W' = trans(V) + W: per-dimension prefix elements plus the keyword
/// multiset.
AttrMultiset transform_object(const TemporalObject& o, const std::vector<uint8_t>& widths);

} // namespace vchain
