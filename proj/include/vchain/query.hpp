#pragma once

#include <map>
#include <mutex>

#include "vchain/chain.hpp"
#include "vchain/vo.hpp"

namespace vchain {

/// Query after quantization and element encoding for a specific chain.
struct CompiledQuery {
    QuerySpec spec;
    uint64_t ts = 0;
    uint64_t te = UINT64_MAX; // subscriptions keep the open window
    CompiledCondition cond;
    std::string text; // canonical echo
};

CompiledQuery compile_query(const QuerySpec& q, const ChainConfig& cfg,
                            const ElementEncoder& enc);

struct QueryOptions {
    bool use_inter = true; // take eligible skips (chains built with them)
    bool batch = false;    // acc2 online batch compaction
    unsigned threads = 1;  // proving worker pool
};

struct QueryStats {
    uint64_t prove_calls = 0;
    uint64_t skips_taken = 0;
    uint64_t blocks_visited = 0;
};

struct QueryOutput {
    std::vector<TemporalObject> results;
    VerificationObject vo;
    QueryStats stats;
};

/// Proof store shared across subtrees, blocks, and (for subscriptions)
/// queries: at most one prove_disjoint per (node, clause) pair. Thread
/// safe; prove_pending fans work out to a pool.
class ProofCache {
public:
    struct Task {
        Multiset node_w;
        Multiset clause;
    };

    /// Queue a proof if missing; returns immediately.
    void request(uint64_t node_uid, const HashDigest& clause_key, Multiset node_w,
                 Multiset clause);
    void prove_pending(const PublicParams& pk, unsigned threads);
    /// Cached proof; proves on the spot if missing (counts as one call).
    const DisjointProof& get(uint64_t node_uid, const HashDigest& clause_key,
                             const Multiset& node_w, const Multiset& clause,
                             const PublicParams& pk);
    uint64_t prove_calls() const { return prove_calls_; }
    uint64_t distinct_pairs() const;

private:
    using Key = std::pair<uint64_t, HashDigest>;
    std::map<Key, DisjointProof> done_;
    std::map<Key, Task> pending_;
    mutable std::mutex mu_;
    uint64_t prove_calls_ = 0;
};

/// Content key for proof sharing across queries with equal clauses.
HashDigest clause_cache_key(const Clause& c);
/// Stable node identifiers across a chain (tree nodes, flat leaves, skips).
uint64_t node_uid(uint64_t height, uint32_t node_index);
uint64_t skip_uid(uint64_t height, uint32_t distance);

/// A loaded block plus the encoded multisets the matcher needs.
struct BlockView {
    Block block;
    std::vector<Multiset> node_enc;   // tree chains: per node
    std::vector<Multiset> object_enc; // nil chains: per object

    static BlockView load(const ChainStore& store, uint64_t height);
    const Multiset& root_enc() const;
};

/// Single-object check: a matched object comes back whole, a mismatching
/// one as a (digest, proof, clause) entry.
VoFlatEntry query_single(const TemporalObject& o, const Multiset& enc_w, const AccValue& digest,
                         const CompiledQuery& q, const PublicParams& pk, ProofCache& cache,
                         uint64_t uid);

/// Per-block VO segment for window queries and subscriptions. Appends
/// matched objects to results when given.
VoSegment make_block_segment(const BlockView& bv, const CompiledQuery& q, bool straddle,
                             const PublicParams& pk, const ChainConfig& cfg, ProofCache& cache,
                             std::vector<TemporalObject>* results, QueryStats* stats);

/// Acc2 only: merge mismatch entries sharing a clause into batch proofs.
/// No-op on acc1 chains or when nothing groups.
VerificationObject batch_compact(VerificationObject vo, const PublicParams& pk);

class QueryEngine {
public:
    explicit QueryEngine(const ChainStore& store);
    explicit QueryEngine(ChainStore&&) = delete; // the engine only borrows the store

    CompiledQuery compile(const QuerySpec& q) const;
    CompiledQuery compile(const std::string& query_text) const;
    QueryOutput query_window(const CompiledQuery& q, const QueryOptions& opt = {}) const;

private:
    const ChainStore& store_;
    ElementEncoder enc_;
};

} // namespace vchain
