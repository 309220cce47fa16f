#include "vchain/object.hpp"

#include <algorithm>

#include "vchain/errors.hpp"

namespace vchain {

void TemporalObject::canonicalize() {
    std::sort(w.begin(), w.end());
}

Bytes TemporalObject::payload_bytes() const {
    ByteWriter wr;
    wr.u16(static_cast<uint16_t>(v.size()));
    for (uint64_t x : v) wr.u64(x);
    wr.u16(static_cast<uint16_t>(w.size()));
    for (const auto& kw : w) wr.str(kw);
    return std::move(wr.out);
}

HashDigest TemporalObject::id() const {
    return object_id_from_parts(t, payload_digest());
}

HashDigest object_id_from_parts(uint64_t t, const HashDigest& payload_digest) {
    ByteWriter w;
    w.u64(t);
    w.digest(payload_digest);
    return sha256(w.out);
}

void TemporalObject::serialize_into(ByteWriter& wr) const {
    wr.u64(t);
    wr.raw(payload_bytes());
}

TemporalObject TemporalObject::deserialize(ByteReader& r) {
    TemporalObject o;
    o.t = r.u64();
    uint16_t nv = r.u16();
    o.v.reserve(nv);
    for (uint16_t i = 0; i < nv; ++i) o.v.push_back(r.u64());
    uint16_t nw = r.u16();
    o.w.reserve(nw);
    for (uint16_t i = 0; i < nw; ++i) o.w.push_back(r.str());
    if (!std::is_sorted(o.w.begin(), o.w.end()))
        throw ParseError("object keywords not in canonical order");
    return o;
}

AttrMultiset transform_object(const TemporalObject& o, const std::vector<uint8_t>& widths) {
    if (o.v.size() != widths.size())
        throw DomainError("object dimensionality does not match configured widths");
    AttrMultiset m;
    for (size_t d = 0; d < o.v.size(); ++d)
        for (const auto& e : trans_value(o.v[d], widths[d], static_cast<uint8_t>(d))) m.add(e);
    for (const auto& kw : o.w) m.add(AttrElement::make_keyword(kw));
    return m;
}

} // namespace vchain
