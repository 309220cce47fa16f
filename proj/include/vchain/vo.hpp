#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vchain/accumulator.hpp"
#include "vchain/chain.hpp"
#include "vchain/object.hpp"
#include "vchain/transform.hpp"

namespace vchain {

/// One node of a per-block VO tree, mirroring the intra-index traversal.
///
/// Mismatch entries carry the hash material needed to *recompute* the
/// pruned node's commitment (object id for leaves, the inner child hash
/// for subtrees) rather than the commitment itself, so the attribute
/// digest the proof speaks about is bound into the Merkle root.
struct VoEntry {
    enum Kind : uint8_t {
        internal = 0,             // att_digest + two children
        matched_leaf = 1,         // full object; digest recomputed by verifier
        mismatch_leaf = 2,        // object id + att_digest + proof + clause
        mismatch_subtree = 3,     // inner child hash + att_digest + proof + clause
        oow_leaf = 4,             // ts + payload digest + att_digest (straddle blocks)
        mismatch_leaf_ref = 5,    // object id + att_digest + batch reference
        mismatch_subtree_ref = 6, // inner child hash + att_digest + batch reference
    };

    Kind kind = internal;
    AccValue att_digest;           // all kinds except matched_leaf
    TemporalObject object;         // matched_leaf
    HashDigest hash;               // mismatch_*: id or inner hash; oow_leaf: payload digest
    uint64_t ts = 0;               // oow_leaf
    DisjointProof proof;           // mismatch_leaf / mismatch_subtree
    uint32_t clause_idx = 0;       // mismatch entries (clause table reference)
    uint32_t batch_idx = 0;        // *_ref entries
    std::vector<VoEntry> children; // internal: exactly two
};

/// Per-object entry for nil chains (flat commitment).
struct VoFlatEntry {
    enum Kind : uint8_t {
        matched = 0,      // full object
        mismatch = 1,     // id + digest + proof + clause
        oow = 2,          // ts + payload digest + digest
        mismatch_ref = 3, // id + digest + batch reference
    };

    Kind kind = matched;
    TemporalObject object;
    HashDigest hash; // mismatch/ref: object id; oow: payload digest
    uint64_t ts = 0;
    AccValue att_digest; // all but matched
    DisjointProof proof;
    uint32_t clause_idx = 0;
    uint32_t batch_idx = 0;
};

enum class SegmentMode : uint8_t {
    empty_block = 0,   // no objects; merkle root must equal the empty hash
    tree = 1,          // whole block fully inside the window
    tree_straddle = 2, // window-boundary block, per-leaf timestamps exposed
    flat = 3,
    flat_straddle = 4,
    skip = 5, // inter-block skip: covers [height-distance, height-1]
};

struct VoSegment {
    uint64_t height = 0; // block height; skip: the owning block's height
    SegmentMode mode = SegmentMode::empty_block;
    std::optional<VoEntry> tree;
    std::vector<VoFlatEntry> flat;
    // skip fields
    uint32_t distance = 0;
    HashDigest pre_skipped;
    AccValue att_digest;
    DisjointProof proof;
    uint32_t clause_idx = 0;
    std::vector<std::pair<uint32_t, HashDigest>> sibling_hashes; // (k, hash_Lk), ascending
};

/// Acc2 online batch: several mismatch entries sharing one clause,
/// verified with a single pairing equation.
struct VoBatch {
    uint32_t clause_idx = 0;
    AccValue agg_digest;
    DisjointProof agg_proof;
};

struct VerificationObject {
    Construction construction = Construction::acc1;
    bool batched = false;
    std::string query_text; // canonical echo
    std::vector<Clause> clause_table;
    std::vector<VoSegment> segments; // newest to oldest
    std::vector<VoBatch> batches;

    Bytes serialize(const PairingGroup& g) const;
    /// check_subgroup guards against adversarial group elements and is the
    /// default on the verifying side.
    static VerificationObject deserialize(BytesView data, const PairingGroup& g,
                                          bool check_subgroup = true);
    size_t byte_size(const PairingGroup& g) const { return serialize(g).size(); }
};

} // namespace vchain
