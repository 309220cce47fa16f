#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vchain/accumulator.hpp"
#include "vchain/object.hpp"
#include "vchain/query_text.hpp"
#include "vchain/transform.hpp"

namespace vchain {

enum class IndexKind : uint8_t {
    nil = 0,   // flat per-object commitments only
    intra = 1, // intra-block tree
    both = 2,  // intra-block tree + inter-block skip list
};

const char* index_kind_name(IndexKind k);
IndexKind index_kind_from_name(const std::string& s);

/// Per-chain configuration, persisted as human-readable key=value text in
/// chain.meta. The verifier needs it (widths, salt, construction) to
/// re-encode queries, so it is part of the public chain metadata.
struct ChainConfig {
    Construction construction = Construction::acc1;
    uint64_t capacity = 0;
    std::string curve = "ss1024";
    std::vector<uint8_t> widths;
    std::vector<double> quant_offset; // per dim, default 0
    std::vector<double> quant_scale;  // per dim, default 1
    Bytes salt;
    IndexKind index_kind = IndexKind::both;
    uint8_t skiplen = 5;    // entries at k = 2, 4, ..., 2^skiplen
    uint8_t difficulty = 0; // proof-of-work leading zero bits; 0 disables
    std::string block_policy = "count:4";
    std::vector<std::string> reserved_keywords; // extra salt-check vocabulary

    size_t dims() const { return widths.size(); }
    uint64_t quantize(double x, size_t dim) const;
    std::pair<uint64_t, uint64_t> quantize_range(double lo, double hi, size_t dim) const;
    ElementEncoder encoder(const GroupPtr& g) const;

    std::string to_text() const;
    static ChainConfig from_text(const std::string& text);
};

// --- headers and commitment rules --------------------------------------------

struct BlockHeader {
    HashDigest prev_bk_hash;
    uint64_t ts = 0;
    uint64_t cons_proof = 0; // nonce
    HashDigest merkle_root;
    HashDigest skip_list_root;

    Bytes bytes() const; // canonical fixed-width layout, little-endian ints
    HashDigest block_hash() const { return sha256(bytes()); }
    bool operator==(const BlockHeader&) const = default;
};

/// Leaf commitment binds the object id to its attribute digest so a
/// leaf-level mismatch proof cannot substitute a foreign digest.
HashDigest leaf_commitment(const HashDigest& object_id, const Bytes& att_digest_bytes);
/// Non-leaf commitment: hash(hash(hash_l | hash_r) | digest_bytes).
HashDigest node_commitment(const HashDigest& left, const HashDigest& right,
                           const Bytes& att_digest_bytes);
HashDigest inner_child_hash(const HashDigest& left, const HashDigest& right);
HashDigest node_commitment_from_inner(const HashDigest& inner, const Bytes& att_digest_bytes);
/// nil chains: flat hash over (id_i | digest_i) pairs.
HashDigest flat_root(const std::vector<std::pair<HashDigest, Bytes>>& leaves);
HashDigest skip_entry_hash(const HashDigest& pre_skipped, const Bytes& att_digest_bytes);
/// hash(hash_L2 | hash_L4 | ...), ascending k; empty list hashes to
/// sha256("").
HashDigest skip_list_root_hash(const std::vector<HashDigest>& entry_hashes);
/// hash of the k skipped block hashes, newest first.
HashDigest pre_skipped_hash(const std::vector<HashDigest>& newest_first);

bool meets_difficulty(const HashDigest& h, uint8_t bits);

// --- block bodies ---------------------------------------------------------------

struct IntraNode {
    HashDigest hash;
    AttrMultiset w;
    AccValue att_digest;
    int32_t left = -1;
    int32_t right = -1;
    int32_t object_index = -1; // >= 0 iff leaf

    bool is_leaf() const { return object_index >= 0; }
};

/// Entry L_k of block b summarizes the k blocks [b-k, b-1] (the run ending
/// at b's predecessor); the miner cannot commit to its own still-unfinished
/// header, and a query walker pending at height h consumes the entries of
/// block h+1.
struct SkipEntryData {
    uint32_t distance = 0; // k
    HashDigest pre_skipped;
    AttrMultiset w;
    AccValue att_digest;
    HashDigest entry_hash;
};

struct Block {
    uint64_t height = 0;
    BlockHeader header;
    std::vector<TemporalObject> objects;
    // tree chains
    std::vector<IntraNode> nodes;
    int32_t root = -1;
    // nil chains: per-object digests in object order
    std::vector<AccValue> leaf_digests;
    std::vector<SkipEntryData> skips;

    Bytes serialize(const PairingGroup& g) const;
    static Block deserialize(BytesView data, const PairingGroup& g);
    /// Serialized size of the authenticated index structures (tree nodes,
    /// per-object digests, skip entries) excluding raw objects.
    size_t ads_bytes(const PairingGroup& g) const;
};

/// Bottom-up greedy pairing by decreasing |W| and maximum Jaccard support
/// similarity. Appends nodes (leaves first, in object order) and returns
/// the root index.
int32_t build_intra_index(const std::vector<TemporalObject>& objects,
                          const std::vector<uint8_t>& widths, const ElementEncoder& enc,
                          const PublicParams& pk, std::vector<IntraNode>& out_nodes);

// --- persistence -----------------------------------------------------------------

/// Read-only access to a persisted chain (SP side). Loads config, params
/// and headers eagerly; block bodies on demand.
class ChainStore {
public:
    static ChainStore open(const std::string& dir);

    const std::string& dir() const { return dir_; }
    const ChainConfig& config() const { return cfg_; }
    const PublicParams& params() const { return pk_; }
    const GroupPtr& group() const { return pk_.group; }
    const std::vector<BlockHeader>& headers() const { return headers_; }
    uint64_t block_count() const { return headers_.size(); }
    uint64_t tip() const { return headers_.size() - 1; }
    Block load_block(uint64_t height) const;
    ElementEncoder encoder() const { return cfg_.encoder(pk_.group); }

private:
    std::string dir_;
    ChainConfig cfg_;
    PublicParams pk_;
    std::vector<BlockHeader> headers_;
};

/// Light-client view: config, params, headers. No block bodies are
/// reachable through this type, so verification cannot touch them.
struct LightView {
    ChainConfig cfg;
    PublicParams pk;
    std::vector<BlockHeader> headers;

    ElementEncoder encoder() const { return cfg.encoder(pk.group); }
};
LightView load_light_view(const std::string& dir);

/// Miner side: builds blocks incrementally and persists them with atomic
/// renames. Single writer.
class ChainWriter {
public:
    /// Creates the directory, selects a collision-free salt when the config
    /// leaves it empty, writes chain.meta + params.bin, and mines the
    /// genesis block.
    ChainWriter(std::string dir, ChainConfig cfg, PublicParams pk);

    /// Builds, mines and persists one block from objects with
    /// non-decreasing timestamps (all >= the previous header's).
    const BlockHeader& append_block(std::vector<TemporalObject> objects);
    uint64_t block_count() const { return headers_.size(); }
    const std::vector<BlockHeader>& headers() const { return headers_; }

private:
    struct TailEntry {
        AttrMultiset root_w;
        AccValue root_digest;
        HashDigest block_hash;
    };

    void persist_block(const Block& b);
    void mine(BlockHeader& h) const;

    std::string dir_;
    ChainConfig cfg_;
    PublicParams pk_;
    std::vector<BlockHeader> headers_;
    std::vector<TailEntry> tail_; // most recent 2^skiplen predecessors, oldest first
};

/// Cut a timestamp-sorted object stream into block batches according to
/// the policy string ("count:N" or "interval:S").
std::vector<std::vector<TemporalObject>> cut_blocks(std::vector<TemporalObject> objects,
                                                    const std::string& policy);

/// Parse JSON-lines ingestion input; errors carry 1-based line numbers.
std::vector<TemporalObject> parse_jsonl(const std::string& text, const ChainConfig& cfg);

/// Build an entire chain in one call (ingestion CLI path).
void build_chain(const std::string& dir, ChainConfig cfg, const PublicParams& pk,
                 std::vector<TemporalObject> objects);

// --- light-client checks -------------------------------------------------------------

struct HeaderValidation {
    bool ok = true;
    size_t first_bad = 0;
    std::string reason;
};

/// Prev-hash linkage, timestamp monotonicity, difficulty.
HeaderValidation validate_headers(const std::vector<BlockHeader>& headers, uint8_t difficulty);

/// Block heights a window query must account for, derived from headers
/// alone. Candidates form the contiguous span [lo, hi]; [full_lo, full_hi]
/// are the blocks whose objects all lie inside the window.
struct WindowBlocks {
    bool any = false;
    uint64_t lo = 0, hi = 0;
    uint64_t full_lo = 0, full_hi = 0; // full_lo > full_hi when none
    bool has_full() const { return any && full_lo <= full_hi; }
    bool is_full(uint64_t h) const { return has_full() && h >= full_lo && h <= full_hi; }
};
WindowBlocks window_candidates(const std::vector<BlockHeader>& headers, uint64_t ts, uint64_t te);

/// Recompute every commitment of a stored block from its raw contents and
/// compare against the stored values and header fields. Returns the first
/// discrepancy, or nullopt if the block is intact (mutation-fuzzing hook).
std::optional<std::string> audit_block(const ChainStore& store, uint64_t height);

} // namespace vchain
