#include "vchain/vo.hpp"

#include "vchain/errors.hpp"

namespace vchain {

namespace {

constexpr char kVoMagic[4] = {'V', 'C', 'V', 'O'};

void write_entry(ByteWriter& w, const VoEntry& e, const PairingGroup& g) {
    w.u8(e.kind);
    switch (e.kind) {
        case VoEntry::internal:
            e.att_digest.serialize_into(w, g);
            if (e.children.size() != 2) throw LogicError("internal VO entry needs two children");
            write_entry(w, e.children[0], g);
            write_entry(w, e.children[1], g);
            break;
        case VoEntry::matched_leaf:
            e.object.serialize_into(w);
            break;
        case VoEntry::mismatch_leaf:
        case VoEntry::mismatch_subtree:
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            e.proof.serialize_into(w, g);
            w.u32(e.clause_idx);
            break;
        case VoEntry::oow_leaf:
            w.u64(e.ts);
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            break;
        case VoEntry::mismatch_leaf_ref:
        case VoEntry::mismatch_subtree_ref:
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            w.u32(e.batch_idx);
            break;
    }
}

VoEntry read_entry(ByteReader& r, const PairingGroup& g, bool check, int depth) {
    if (depth > 64) throw ParseError("VO tree too deep");
    VoEntry e;
    uint8_t k = r.u8();
    if (k > VoEntry::mismatch_subtree_ref) throw ParseError("bad VO entry kind");
    e.kind = static_cast<VoEntry::Kind>(k);
    switch (e.kind) {
        case VoEntry::internal:
            e.att_digest = AccValue::deserialize(r, g, check);
            e.children.push_back(read_entry(r, g, check, depth + 1));
            e.children.push_back(read_entry(r, g, check, depth + 1));
            break;
        case VoEntry::matched_leaf:
            e.object = TemporalObject::deserialize(r);
            break;
        case VoEntry::mismatch_leaf:
        case VoEntry::mismatch_subtree:
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            e.proof = DisjointProof::deserialize(r, g, check);
            e.clause_idx = r.u32();
            break;
        case VoEntry::oow_leaf:
            e.ts = r.u64();
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            break;
        case VoEntry::mismatch_leaf_ref:
        case VoEntry::mismatch_subtree_ref:
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            e.batch_idx = r.u32();
            break;
    }
    return e;
}

void write_flat(ByteWriter& w, const VoFlatEntry& e, const PairingGroup& g) {
    w.u8(e.kind);
    switch (e.kind) {
        case VoFlatEntry::matched:
            e.object.serialize_into(w);
            break;
        case VoFlatEntry::mismatch:
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            e.proof.serialize_into(w, g);
            w.u32(e.clause_idx);
            break;
        case VoFlatEntry::oow:
            w.u64(e.ts);
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            break;
        case VoFlatEntry::mismatch_ref:
            w.digest(e.hash);
            e.att_digest.serialize_into(w, g);
            w.u32(e.batch_idx);
            break;
    }
}

VoFlatEntry read_flat(ByteReader& r, const PairingGroup& g, bool check) {
    VoFlatEntry e;
    uint8_t k = r.u8();
    if (k > VoFlatEntry::mismatch_ref) throw ParseError("bad flat VO entry kind");
    e.kind = static_cast<VoFlatEntry::Kind>(k);
    switch (e.kind) {
        case VoFlatEntry::matched:
            e.object = TemporalObject::deserialize(r);
            break;
        case VoFlatEntry::mismatch:
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            e.proof = DisjointProof::deserialize(r, g, check);
            e.clause_idx = r.u32();
            break;
        case VoFlatEntry::oow:
            e.ts = r.u64();
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            break;
        case VoFlatEntry::mismatch_ref:
            e.hash = r.digest();
            e.att_digest = AccValue::deserialize(r, g, check);
            e.batch_idx = r.u32();
            break;
    }
    return e;
}

} // namespace

Bytes VerificationObject::serialize(const PairingGroup& g) const {
    ByteWriter w;
    w.raw(BytesView(reinterpret_cast<const uint8_t*>(kVoMagic), 4));
    w.u8(1);
    w.u8(static_cast<uint8_t>(construction));
    w.u8(batched ? 1 : 0);
    w.str(query_text);
    w.u16(static_cast<uint16_t>(clause_table.size()));
    for (const auto& c : clause_table) c.serialize_into(w);
    w.u32(static_cast<uint32_t>(segments.size()));
    for (const auto& s : segments) {
        w.u64(s.height);
        w.u8(static_cast<uint8_t>(s.mode));
        switch (s.mode) {
            case SegmentMode::empty_block:
                break;
            case SegmentMode::tree:
            case SegmentMode::tree_straddle:
                if (!s.tree) throw LogicError("tree segment without entries");
                write_entry(w, *s.tree, g);
                break;
            case SegmentMode::flat:
            case SegmentMode::flat_straddle:
                w.u32(static_cast<uint32_t>(s.flat.size()));
                for (const auto& e : s.flat) write_flat(w, e, g);
                break;
            case SegmentMode::skip:
                w.u32(s.distance);
                w.digest(s.pre_skipped);
                s.att_digest.serialize_into(w, g);
                s.proof.serialize_into(w, g);
                w.u32(s.clause_idx);
                w.u16(static_cast<uint16_t>(s.sibling_hashes.size()));
                for (const auto& [k, h] : s.sibling_hashes) {
                    w.u32(k);
                    w.digest(h);
                }
                break;
        }
    }
    w.u32(static_cast<uint32_t>(batches.size()));
    for (const auto& b : batches) {
        w.u32(b.clause_idx);
        b.agg_digest.serialize_into(w, g);
        b.agg_proof.serialize_into(w, g);
    }
    return std::move(w.out);
}

VerificationObject VerificationObject::deserialize(BytesView data, const PairingGroup& g,
                                                   bool check_subgroup) {
    ByteReader r(data);
    Bytes magic = r.raw(4);
    if (std::memcmp(magic.data(), kVoMagic, 4) != 0) throw ParseError("bad VO magic");
    if (r.u8() != 1) throw ParseError("unsupported VO version");
    VerificationObject vo;
    uint8_t c = r.u8();
    if (c != 1 && c != 2) throw ParseError("bad VO construction tag");
    vo.construction = static_cast<Construction>(c);
    vo.batched = r.u8() != 0;
    vo.query_text = r.str();
    uint16_t nclauses = r.u16();
    vo.clause_table.reserve(nclauses);
    for (uint16_t i = 0; i < nclauses; ++i) vo.clause_table.push_back(Clause::deserialize(r));
    uint32_t nsegs = r.u32();
    for (uint32_t i = 0; i < nsegs; ++i) {
        VoSegment s;
        s.height = r.u64();
        uint8_t m = r.u8();
        if (m > static_cast<uint8_t>(SegmentMode::skip)) throw ParseError("bad VO segment mode");
        s.mode = static_cast<SegmentMode>(m);
        switch (s.mode) {
            case SegmentMode::empty_block:
                break;
            case SegmentMode::tree:
            case SegmentMode::tree_straddle:
                s.tree = read_entry(r, g, check_subgroup, 0);
                break;
            case SegmentMode::flat:
            case SegmentMode::flat_straddle: {
                uint32_t n = r.u32();
                s.flat.reserve(n);
                for (uint32_t j = 0; j < n; ++j) s.flat.push_back(read_flat(r, g, check_subgroup));
                break;
            }
            case SegmentMode::skip: {
                s.distance = r.u32();
                s.pre_skipped = r.digest();
                s.att_digest = AccValue::deserialize(r, g, check_subgroup);
                s.proof = DisjointProof::deserialize(r, g, check_subgroup);
                s.clause_idx = r.u32();
                uint16_t ns = r.u16();
                for (uint16_t j = 0; j < ns; ++j) {
                    uint32_t k = r.u32();
                    HashDigest h = r.digest();
                    s.sibling_hashes.emplace_back(k, h);
                }
                break;
            }
        }
        vo.segments.push_back(std::move(s));
    }
    uint32_t nb = r.u32();
    for (uint32_t i = 0; i < nb; ++i) {
        VoBatch b;
        b.clause_idx = r.u32();
        b.agg_digest = AccValue::deserialize(r, g, check_subgroup);
        b.agg_proof = DisjointProof::deserialize(r, g, check_subgroup);
        vo.batches.push_back(std::move(b));
    }
    if (!r.done()) throw ParseError("trailing bytes in VO");
    return vo;
}

} // namespace vchain
