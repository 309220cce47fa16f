#pragma once

#include <memory>
#include <optional>

#include "vchain/query.hpp"
#include "vchain/verify.hpp"

namespace vchain {

/// One node of the inverted prefix tree over registered subscriptions.
/// The grid cell is the product of per-dimension prefixes of length
/// min(depth, width_d); splitting appends one bit per dimension, giving
/// 2^d children. RCIF lists every intersecting query with its cover type;
/// BCIF maps the Boolean clauses of full-cover queries to the queries
/// sharing them.
struct IpTreeNode {
    uint32_t depth = 0;
    std::vector<uint64_t> cell_bits; // per dim, prefix of length min(depth, width)

    struct RcifEntry {
        uint32_t query = 0;
        bool full = false;
        auto operator<=>(const RcifEntry&) const = default;
    };
    std::vector<RcifEntry> rcif; // sorted by query id
    std::map<Clause, std::vector<uint32_t>> bcif;
    std::vector<std::unique_ptr<IpTreeNode>> children; // empty or 2^d

    bool is_leaf() const { return children.empty(); }
    bool has_partial() const;
    bool deep_equal(const IpTreeNode& o) const;
};

struct SubscriptionRanges {
    std::vector<std::pair<uint64_t, uint64_t>> dims; // quantized, full space default
};

class IpTree {
public:
    IpTree(std::vector<uint8_t> widths, uint32_t max_depth = 8);

    void insert(uint32_t id, const SubscriptionRanges& ranges, const CompiledCondition& cond);
    void erase(uint32_t id, const SubscriptionRanges& ranges);
    const IpTreeNode& root() const { return *root_; }
    uint32_t max_depth() const { return max_depth_; }
    bool deep_equal(const IpTree& o) const { return root_->deep_equal(*o.root_); }

    /// Queries that fully cover some cell reachable by a super-object whose
    /// multiset is `w` (their range condition is implied matched for every
    /// object under that node).
    std::vector<uint32_t> full_cover_reachable(const AttrMultiset& w) const;

private:
    enum class Cover { none, partial, full };
    Cover classify(const IpTreeNode& n, const SubscriptionRanges& r) const;
    void split(IpTreeNode& n);
    void insert_at(IpTreeNode& n, uint32_t id, const SubscriptionRanges& ranges,
                   const CompiledCondition& cond);
    bool erase_at(IpTreeNode& n, uint32_t id, const SubscriptionRanges& ranges);
    std::pair<uint64_t, uint64_t> cell_range(const IpTreeNode& n, size_t dim) const;

    std::vector<uint8_t> widths_;
    uint32_t max_depth_;
    std::unique_ptr<IpTreeNode> root_;
};

/// Streamed answer for one subscription: results plus a VO covering the
/// span [span_lo, span_hi] of block heights.
struct SubMessage {
    uint32_t query_id = 0;
    uint64_t span_lo = 0;
    uint64_t span_hi = 0;
    std::vector<TemporalObject> results;
    VerificationObject vo;
};

/// SP-side subscription processor. Registration is serialized behind the
/// engine; block processing shares mismatch proofs across queries through
/// a (node, clause)-keyed cache.
class SubscriptionEngine {
public:
    enum class Mode { realtime, lazy };

    SubscriptionEngine(const ChainStore& store, Mode mode, uint32_t flush_threshold = 16,
                       uint32_t max_ip_depth = 8);
    SubscriptionEngine(ChainStore&&, Mode, uint32_t = 16, uint32_t = 8) = delete;

    uint32_t register_query(const std::string& query_text);
    uint32_t register_query(const QuerySpec& spec);
    void deregister(uint32_t id);

    /// Process one newly appended block for every registered query.
    void feed_block(uint64_t height);
    /// Drain pending messages for a query (lazy mode may buffer several
    /// blocks before producing one).
    std::vector<SubMessage> poll(uint32_t id);
    /// Lazy mode: force out buffered evidence (end of stream).
    void flush_all();

    const IpTree& tree() const { return *tree_; }

    struct Stats {
        uint64_t prove_calls = 0;
        uint64_t distinct_pairs = 0;
        uint64_t blocks_processed = 0;
    };
    Stats stats() const;

private:
    struct Registered {
        uint32_t id;
        QuerySpec spec;
        CompiledQuery cq;
        SubscriptionRanges ranges;
    };

    struct StackEntry {
        uint64_t anchor = 0;   // newest covered height
        uint32_t distance = 1; // covered consecutive blocks
        DisjointProof proof;
        AccValue digest;
    };

    struct LazyState {
        std::vector<StackEntry> stack; // back() is the top
        std::optional<HashDigest> stack_clause;
        std::vector<VoSegment> fragments; // oldest to newest
        uint64_t span_start = 0;
        bool has_span = false;
    };

    void process_realtime(const BlockView& bv);
    void process_lazy(const BlockView& bv, Registered& reg, LazyState& state);
    void flush_lazy(Registered& reg, LazyState& state, uint64_t through_height,
                    std::vector<TemporalObject> results, std::optional<VoSegment> match_seg);
    VerificationObject vo_shell(const Registered& reg) const;

    const ChainStore& store_;
    Mode mode_;
    uint32_t flush_threshold_;
    ElementEncoder enc_;
    std::unique_ptr<IpTree> tree_;
    std::map<uint32_t, Registered> queries_;
    std::map<uint32_t, LazyState> lazy_;
    std::map<uint32_t, std::vector<SubMessage>> outbox_;
    ProofCache cache_;
    uint32_t next_id_ = 1;
    uint64_t blocks_processed_ = 0;
};

} // namespace vchain
