#include "vchain/subscribe.hpp"

#include <algorithm>

#include "vchain/errors.hpp"

namespace vchain {

// --- IpTreeNode -----------------------------------------------------------------

bool IpTreeNode::has_partial() const {
    for (const auto& e : rcif)
        if (!e.full) return true;
    return false;
}

bool IpTreeNode::deep_equal(const IpTreeNode& o) const {
    if (depth != o.depth || cell_bits != o.cell_bits || rcif != o.rcif || bcif != o.bcif)
        return false;
    if (children.size() != o.children.size()) return false;
    for (size_t i = 0; i < children.size(); ++i)
        if (!children[i]->deep_equal(*o.children[i])) return false;
    return true;
}

// --- IpTree --------------------------------------------------------------------

IpTree::IpTree(std::vector<uint8_t> widths, uint32_t max_depth)
    : widths_(std::move(widths)), max_depth_(max_depth), root_(std::make_unique<IpTreeNode>()) {
    root_->cell_bits.assign(widths_.size(), 0);
}

std::pair<uint64_t, uint64_t> IpTree::cell_range(const IpTreeNode& n, size_t dim) const {
    uint8_t w = widths_[dim];
    uint8_t len = static_cast<uint8_t>(std::min<uint32_t>(n.depth, w));
    uint64_t span = uint64_t(1) << (w - len);
    uint64_t lo = n.cell_bits[dim] << (w - len);
    return {lo, lo + span - 1};
}

IpTree::Cover IpTree::classify(const IpTreeNode& n, const SubscriptionRanges& r) const {
    bool full = true;
    for (size_t d = 0; d < widths_.size(); ++d) {
        auto [clo, chi] = cell_range(n, d);
        uint64_t a = 0, b = (uint64_t(1) << widths_[d]) - 1;
        if (d < r.dims.size()) {
            a = r.dims[d].first;
            b = r.dims[d].second;
        }
        if (chi < a || b < clo) return Cover::none;
        if (a > clo || chi > b) full = false;
    }
    return full ? Cover::full : Cover::partial;
}

void IpTree::split(IpTreeNode& n) {
    std::vector<size_t> active;
    for (size_t d = 0; d < widths_.size(); ++d)
        if (std::min<uint32_t>(n.depth, widths_[d]) < widths_[d]) active.push_back(d);
    if (active.empty()) return; // point cell, nothing to split
    size_t fan = size_t(1) << active.size();
    for (size_t c = 0; c < fan; ++c) {
        auto child = std::make_unique<IpTreeNode>();
        child->depth = n.depth + 1;
        child->cell_bits = n.cell_bits;
        for (size_t j = 0; j < active.size(); ++j) {
            uint64_t bit = (c >> j) & 1;
            // the second split dimension enumerates its upper half first, so
            // 2-D children enumerate top-left, top-right, bottom-left, bottom-right
            if (j == 1) bit = 1 - bit;
            child->cell_bits[active[j]] = child->cell_bits[active[j]] << 1 | bit;
        }
        n.children.push_back(std::move(child));
    }
}

static void rcif_insert(std::vector<IpTreeNode::RcifEntry>& rcif, uint32_t id, bool full) {
    IpTreeNode::RcifEntry e{id, full};
    auto it = std::lower_bound(rcif.begin(), rcif.end(), e,
                               [](const auto& a, const auto& b) { return a.query < b.query; });
    rcif.insert(it, e);
}

void IpTree::insert_at(IpTreeNode& n, uint32_t id, const SubscriptionRanges& ranges,
                       const CompiledCondition& cond) {
    Cover c = classify(n, ranges);
    if (c == Cover::none) return;
    if (c == Cover::full) {
        rcif_insert(n.rcif, id, true);
        for (size_t i = cond.range_clause_count; i < cond.clauses.size(); ++i) {
            auto& ids = n.bcif[cond.clauses[i].logical];
            ids.insert(std::lower_bound(ids.begin(), ids.end(), id), id);
        }
        return;
    }
    rcif_insert(n.rcif, id, false);
    if (n.depth >= max_depth_) return; // deep partials fall back to per-query checks
    if (n.is_leaf()) split(n);
    for (auto& child : n.children) insert_at(*child, id, ranges, cond);
}

void IpTree::insert(uint32_t id, const SubscriptionRanges& ranges,
                    const CompiledCondition& cond) {
    insert_at(*root_, id, ranges, cond);
}

bool IpTree::erase_at(IpTreeNode& n, uint32_t id, const SubscriptionRanges& ranges) {
    if (classify(n, ranges) == Cover::none) return false;
    std::erase_if(n.rcif, [&](const auto& e) { return e.query == id; });
    for (auto it = n.bcif.begin(); it != n.bcif.end();) {
        std::erase(it->second, id);
        it = it->second.empty() ? n.bcif.erase(it) : std::next(it);
    }
    if (!n.is_leaf()) {
        for (auto& child : n.children) erase_at(*child, id, ranges);
        bool all_empty = true;
        for (const auto& child : n.children)
            all_empty =
                all_empty && child->is_leaf() && child->rcif.empty() && child->bcif.empty();
        if (all_empty) n.children.clear();
    }
    return true;
}

void IpTree::erase(uint32_t id, const SubscriptionRanges& ranges) {
    erase_at(*root_, id, ranges);
}

std::vector<uint32_t> IpTree::full_cover_reachable(const AttrMultiset& w) const {
    std::vector<uint32_t> out;
    std::vector<const IpTreeNode*> stack{root_.get()};
    while (!stack.empty()) {
        const IpTreeNode* n = stack.back();
        stack.pop_back();
        // a super object reaches a cell only if every cell prefix occurs in
        // its multiset (necessary condition; exact at single-object leaves)
        bool reach = true;
        for (size_t d = 0; d < widths_.size() && reach; ++d) {
            uint8_t len = static_cast<uint8_t>(std::min<uint32_t>(n->depth, widths_[d]));
            if (len == 0) continue;
            reach = w.contains(
                AttrElement::make_prefix(static_cast<uint8_t>(d), len, n->cell_bits[d]));
        }
        if (!reach) continue;
        for (const auto& e : n->rcif)
            if (e.full) out.push_back(e.query);
        for (const auto& child : n->children) stack.push_back(child.get());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// --- SubscriptionEngine -----------------------------------------------------------

SubscriptionEngine::SubscriptionEngine(const ChainStore& store, Mode mode,
                                       uint32_t flush_threshold, uint32_t max_ip_depth)
    : store_(store), mode_(mode), flush_threshold_(flush_threshold), enc_(store.encoder()) {
    if (mode_ == Mode::lazy) {
        if (store_.config().construction != Construction::acc2)
            throw UnsupportedError("lazy authentication needs construction 2 (ProofSum)");
        if (store_.config().index_kind == IndexKind::nil)
            throw UnsupportedError("lazy authentication needs an intra-block index");
    }
    tree_ = std::make_unique<IpTree>(store_.config().widths, max_ip_depth);
}

uint32_t SubscriptionEngine::register_query(const std::string& query_text) {
    return register_query(parse_query_text(query_text));
}

uint32_t SubscriptionEngine::register_query(const QuerySpec& spec) {
    if (spec.window) throw DomainError("subscription queries have no time window");
    Registered reg;
    reg.id = next_id_++;
    reg.spec = spec;
    reg.cq = compile_query(spec, store_.config(), enc_);
    for (size_t d = 0; d < store_.config().dims(); ++d) {
        uint64_t max = (uint64_t(1) << store_.config().widths[d]) - 1;
        if (d < spec.range.size())
            reg.ranges.dims.push_back(
                store_.config().quantize_range(spec.range[d].first, spec.range[d].second, d));
        else
            reg.ranges.dims.push_back({0, max});
    }
    tree_->insert(reg.id, reg.ranges, reg.cq.cond);
    uint32_t id = reg.id;
    queries_.emplace(id, std::move(reg));
    lazy_.emplace(id, LazyState{});
    outbox_.emplace(id, std::vector<SubMessage>{});
    return id;
}

void SubscriptionEngine::deregister(uint32_t id) {
    auto it = queries_.find(id);
    if (it == queries_.end()) throw NotFoundError("unknown subscription id");
    tree_->erase(id, it->second.ranges);
    queries_.erase(it);
    lazy_.erase(id);
    outbox_.erase(id);
}

std::vector<SubMessage> SubscriptionEngine::poll(uint32_t id) {
    auto it = outbox_.find(id);
    if (it == outbox_.end()) throw NotFoundError("unknown subscription id");
    std::vector<SubMessage> out;
    out.swap(it->second);
    return out;
}

VerificationObject SubscriptionEngine::vo_shell(const Registered& reg) const {
    VerificationObject vo;
    vo.construction = store_.config().construction;
    vo.query_text = reg.cq.text;
    for (const auto& c : reg.cq.cond.clauses) vo.clause_table.push_back(c.logical);
    return vo;
}

void SubscriptionEngine::feed_block(uint64_t height) {
    BlockView bv = BlockView::load(store_, height);
    blocks_processed_ += 1;
    if (mode_ == Mode::realtime) {
        process_realtime(bv);
        return;
    }
    for (auto& [id, reg] : queries_) process_lazy(bv, reg, lazy_.at(id));
}

void SubscriptionEngine::process_realtime(const BlockView& bv) {
    // the block root acts as a super object against the IP-Tree; clause
    // evaluations and mismatch proofs are shared across queries via caches
    // keyed by (node, clause)
    std::vector<uint32_t> full_reach;
    std::map<HashDigest, bool> root_disjoint;
    bool tree_chain = store_.config().index_kind != IndexKind::nil && bv.block.root >= 0;
    if (tree_chain)
        full_reach = tree_->full_cover_reachable(bv.block.nodes[bv.block.root].w);
    for (auto& [id, reg] : queries_) {
        SubMessage msg;
        msg.query_id = id;
        msg.span_lo = msg.span_hi = bv.block.height;
        msg.vo = vo_shell(reg);
        if (bv.block.objects.empty()) {
            VoSegment seg;
            seg.height = bv.block.height;
            seg.mode = SegmentMode::empty_block;
            msg.vo.segments.push_back(std::move(seg));
            outbox_[id].push_back(std::move(msg));
            continue;
        }
        if (!tree_chain) {
            // no intra index: plain per-object processing per query
            msg.vo.segments.push_back(make_block_segment(bv, reg.cq, false, store_.params(),
                                                         store_.config(), cache_, &msg.results,
                                                         nullptr));
            outbox_[id].push_back(std::move(msg));
            continue;
        }
        // root-level decision through shared clause evaluations; full-cover
        // queries reached by the super object skip their range clauses
        bool is_full_reach = std::binary_search(full_reach.begin(), full_reach.end(), id);
        const Multiset& root_enc = bv.root_enc();
        std::optional<size_t> prune;
        for (size_t i = 0; i < reg.cq.cond.clauses.size(); ++i) {
            if (is_full_reach && i < reg.cq.cond.range_clause_count) continue;
            const auto& cl = reg.cq.cond.clauses[i];
            HashDigest key = clause_cache_key(cl.logical);
            auto it = root_disjoint.find(key);
            if (it == root_disjoint.end())
                it = root_disjoint.emplace(key, cl.encoded.support_disjoint(root_enc)).first;
            if (!it->second) continue;
            if (!prune ||
                cl.logical.elems.size() < reg.cq.cond.clauses[*prune].logical.elems.size())
                prune = i;
        }
        VoSegment seg;
        seg.height = bv.block.height;
        seg.mode = SegmentMode::tree;
        if (prune) {
            const IntraNode& root = bv.block.nodes[bv.block.root];
            const auto& cl = reg.cq.cond.clauses[*prune];
            VoEntry e;
            if (root.is_leaf()) {
                e.kind = VoEntry::mismatch_leaf;
                e.hash = bv.block.objects[root.object_index].id();
            } else {
                e.kind = VoEntry::mismatch_subtree;
                e.hash = inner_child_hash(bv.block.nodes[root.left].hash,
                                          bv.block.nodes[root.right].hash);
            }
            e.att_digest = root.att_digest;
            e.clause_idx = static_cast<uint32_t>(*prune);
            e.proof =
                cache_.get(node_uid(bv.block.height, static_cast<uint32_t>(bv.block.root)),
                           clause_cache_key(cl.logical), root_enc, cl.encoded, store_.params());
            seg.tree = std::move(e);
        } else {
            seg = make_block_segment(bv, reg.cq, false, store_.params(), store_.config(), cache_,
                                     &msg.results, nullptr);
        }
        msg.vo.segments.push_back(std::move(seg));
        outbox_[id].push_back(std::move(msg));
    }
}

namespace {

uint64_t fragments_cover(const std::vector<VoSegment>& frags) {
    uint64_t n = 0;
    for (const auto& f : frags) n += f.mode == SegmentMode::skip ? f.distance : 1;
    return n;
}

} // namespace

void SubscriptionEngine::flush_lazy(Registered& reg, LazyState& state, uint64_t through_height,
                                    std::vector<TemporalObject> results,
                                    std::optional<VoSegment> match_seg) {
    if (!state.has_span && !match_seg) return;
    SubMessage msg;
    msg.query_id = reg.id;
    msg.span_lo = state.has_span ? state.span_start : through_height;
    msg.span_hi = through_height;
    msg.results = std::move(results);
    msg.vo = vo_shell(reg);
    std::vector<VoSegment> segs = std::move(state.fragments);
    if (match_seg) segs.push_back(std::move(*match_seg));
    // fragments buffer oldest-first; the VO walks newest-first
    for (auto it = segs.rbegin(); it != segs.rend(); ++it)
        msg.vo.segments.push_back(std::move(*it));
    outbox_[reg.id].push_back(std::move(msg));
    state = LazyState{};
}

void SubscriptionEngine::process_lazy(const BlockView& bv, Registered& reg, LazyState& state) {
    uint64_t h = bv.block.height;
    if (!state.has_span) {
        state.span_start = h;
        state.has_span = true;
    }
    if (bv.block.objects.empty()) {
        VoSegment seg;
        seg.height = h;
        seg.mode = SegmentMode::empty_block;
        state.fragments.push_back(std::move(seg));
        // an empty block interrupts the same-clause run
        state.stack.clear();
        state.stack_clause.reset();
        return;
    }
    const Multiset& root_enc = bv.root_enc();
    const IntraNode& root = bv.block.nodes[bv.block.root];
    if (reg.cq.cond.matches(root_enc)) {
        std::vector<TemporalObject> results;
        VoSegment seg = make_block_segment(bv, reg.cq, false, store_.params(), store_.config(),
                                           cache_, &results, nullptr);
        flush_lazy(reg, state, h, std::move(results), std::move(seg));
        return;
    }
    size_t ci = reg.cq.cond.find_mismatch_clause(root_enc);
    const auto& clause = reg.cq.cond.clauses[ci];
    HashDigest ckey = clause_cache_key(clause.logical);
    DisjointProof proof = cache_.get(node_uid(h, static_cast<uint32_t>(bv.block.root)), ckey,
                                     root_enc, clause.encoded, store_.params());
    VoSegment seg;
    seg.height = h;
    seg.mode = SegmentMode::tree;
    VoEntry e;
    if (root.is_leaf()) {
        e.kind = VoEntry::mismatch_leaf;
        e.hash = bv.block.objects[root.object_index].id();
    } else {
        e.kind = VoEntry::mismatch_subtree;
        e.hash = inner_child_hash(bv.block.nodes[root.left].hash, bv.block.nodes[root.right].hash);
    }
    e.att_digest = root.att_digest;
    e.clause_idx = static_cast<uint32_t>(ci);
    e.proof = proof;
    seg.tree = std::move(e);
    state.fragments.push_back(std::move(seg));

    if (state.stack_clause && *state.stack_clause == ckey && !state.stack.empty()) {
        // the maximum stored skip covering an exact run at the top of the
        // stack replaces that run's fragments with one aggregate
        const SkipEntryData* chosen = nullptr;
        size_t pop_count = 0;
        for (auto it = bv.block.skips.rbegin(); it != bv.block.skips.rend(); ++it) {
            uint64_t sum = 0;
            size_t m = 0;
            for (auto s = state.stack.rbegin(); s != state.stack.rend() && sum < it->distance;
                 ++s) {
                sum += s->distance;
                ++m;
            }
            if (sum == it->distance) {
                chosen = &*it;
                pop_count = m;
                break;
            }
        }
        if (chosen) {
            std::vector<DisjointProof> proofs;
            std::vector<AccValue> digests;
            for (size_t i = 0; i < pop_count; ++i) {
                proofs.push_back(state.stack[state.stack.size() - 1 - i].proof);
                digests.push_back(state.stack[state.stack.size() - 1 - i].digest);
            }
            DisjointProof agg = proof_sum(proofs, *store_.group());
            AccValue agg_digest = sum(digests, *store_.group());
            if (!(agg_digest == chosen->att_digest))
                throw LogicError("skip digest does not match the aggregated run");
            state.stack.resize(state.stack.size() - pop_count);
            // rewind: replace the fragments the skip covers, keeping this
            // block's own fragment on top
            VoSegment own = std::move(state.fragments.back());
            state.fragments.pop_back();
            for (uint64_t covered = 0; covered < chosen->distance && !state.fragments.empty();) {
                covered += state.fragments.back().mode == SegmentMode::skip
                               ? state.fragments.back().distance
                               : 1;
                state.fragments.pop_back();
            }
            VoSegment skip_seg;
            skip_seg.height = h; // the owning block re-anchors the aggregate
            skip_seg.mode = SegmentMode::skip;
            skip_seg.distance = chosen->distance;
            skip_seg.pre_skipped = chosen->pre_skipped;
            skip_seg.att_digest = chosen->att_digest;
            skip_seg.proof = agg;
            skip_seg.clause_idx = static_cast<uint32_t>(ci);
            for (const auto& s : bv.block.skips)
                if (s.distance != chosen->distance)
                    skip_seg.sibling_hashes.emplace_back(s.distance, s.entry_hash);
            state.fragments.push_back(std::move(skip_seg));
            state.fragments.push_back(std::move(own));
            StackEntry merged;
            merged.anchor = h - 1;
            merged.distance = chosen->distance;
            merged.proof = std::move(agg);
            merged.digest = chosen->att_digest;
            state.stack.push_back(std::move(merged));
        }
    } else {
        state.stack.clear();
        state.stack_clause = ckey;
    }
    StackEntry own_entry;
    own_entry.anchor = h;
    own_entry.distance = 1;
    own_entry.proof = std::move(proof);
    own_entry.digest = root.att_digest;
    state.stack.push_back(std::move(own_entry));

    if (h - state.span_start + 1 >= flush_threshold_) flush_lazy(reg, state, h, {}, std::nullopt);
}

void SubscriptionEngine::flush_all() {
    for (auto& [id, reg] : queries_) {
        LazyState& st = lazy_.at(id);
        if (st.has_span && !st.fragments.empty())
            flush_lazy(reg, st, st.span_start + fragments_cover(st.fragments) - 1, {},
                       std::nullopt);
    }
}

SubscriptionEngine::Stats SubscriptionEngine::stats() const {
    Stats s;
    s.prove_calls = cache_.prove_calls();
    s.distinct_pairs = cache_.distinct_pairs();
    s.blocks_processed = blocks_processed_;
    return s;
}

} // namespace vchain
