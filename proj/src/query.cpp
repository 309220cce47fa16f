#include "vchain/query.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "vchain/errors.hpp"

namespace vchain {

CompiledQuery compile_query(const QuerySpec& q, const ChainConfig& cfg,
                            const ElementEncoder& enc) {
    CompiledQuery out;
    out.spec = q;
    if (q.window) {
        out.ts = q.window->first;
        out.te = q.window->second;
        if (out.ts > out.te) throw DomainError("inverted query window");
    }
    std::vector<std::pair<uint64_t, uint64_t>> ranges;
    if (!q.range.empty()) {
        if (q.range.size() != cfg.dims())
            throw DomainError("query range dimensionality does not match the chain");
        for (size_t d = 0; d < q.range.size(); ++d)
            ranges.push_back(cfg.quantize_range(q.range[d].first, q.range[d].second, d));
    }
    out.cond = compile_condition(ranges, q.bool_cond, cfg.widths, enc);
    out.text = q.canonical_text();
    return out;
}

// --- ProofCache ---------------------------------------------------------------

HashDigest clause_cache_key(const Clause& c) {
    ByteWriter w;
    c.serialize_into(w);
    return sha256(w.out);
}

uint64_t node_uid(uint64_t height, uint32_t node_index) {
    return height << 24 | node_index;
}

uint64_t skip_uid(uint64_t height, uint32_t distance) {
    return uint64_t(1) << 62 | height << 24 | distance;
}

void ProofCache::request(uint64_t uid, const HashDigest& clause_key, Multiset node_w,
                         Multiset clause) {
    std::lock_guard lock(mu_);
    Key k{uid, clause_key};
    if (done_.count(k) || pending_.count(k)) return;
    pending_.emplace(k, Task{std::move(node_w), std::move(clause)});
}

void ProofCache::prove_pending(const PublicParams& pk, unsigned threads) {
    std::vector<std::pair<Key, Task>> tasks;
    {
        std::lock_guard lock(mu_);
        tasks.assign(pending_.begin(), pending_.end());
        pending_.clear();
    }
    if (tasks.empty()) return;
    std::vector<DisjointProof> proofs(tasks.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            proofs[i] = prove_disjoint(tasks[i].second.node_w, tasks[i].second.clause, pk);
        }
    };
    unsigned n = std::max(1u, std::min<unsigned>(threads, tasks.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    std::lock_guard lock(mu_);
    for (size_t i = 0; i < tasks.size(); ++i) done_.emplace(tasks[i].first, std::move(proofs[i]));
    prove_calls_ += tasks.size();
}

const DisjointProof& ProofCache::get(uint64_t uid, const HashDigest& clause_key,
                                     const Multiset& node_w, const Multiset& clause,
                                     const PublicParams& pk) {
    {
        std::lock_guard lock(mu_);
        auto it = done_.find(Key{uid, clause_key});
        if (it != done_.end()) return it->second;
    }
    DisjointProof p = prove_disjoint(node_w, clause, pk);
    std::lock_guard lock(mu_);
    ++prove_calls_;
    return done_.emplace(Key{uid, clause_key}, std::move(p)).first->second;
}

uint64_t ProofCache::distinct_pairs() const {
    std::lock_guard lock(mu_);
    return done_.size();
}

// --- block views -----------------------------------------------------------------

BlockView BlockView::load(const ChainStore& store, uint64_t height) {
    BlockView bv;
    bv.block = store.load_block(height);
    ElementEncoder enc = store.encoder();
    bv.node_enc.reserve(bv.block.nodes.size());
    for (const auto& n : bv.block.nodes) bv.node_enc.push_back(enc.encode_multiset(n.w));
    if (store.config().index_kind == IndexKind::nil) {
        bv.object_enc.reserve(bv.block.objects.size());
        for (const auto& o : bv.block.objects)
            bv.object_enc.push_back(
                enc.encode_multiset(transform_object(o, store.config().widths)));
    }
    return bv;
}

const Multiset& BlockView::root_enc() const {
    if (block.root < 0) throw LogicError("block has no intra index");
    return node_enc[block.root];
}

// --- per-block processing ------------------------------------------------------------

VoFlatEntry query_single(const TemporalObject& o, const Multiset& enc_w, const AccValue& digest,
                         const CompiledQuery& q, const PublicParams& pk, ProofCache& cache,
                         uint64_t uid) {
    VoFlatEntry e;
    if (q.cond.matches(enc_w)) {
        e.kind = VoFlatEntry::matched;
        e.object = o;
        return e;
    }
    size_t ci = q.cond.find_mismatch_clause(enc_w);
    const auto& clause = q.cond.clauses[ci];
    e.kind = VoFlatEntry::mismatch;
    e.hash = o.id();
    e.att_digest = digest;
    e.proof = cache.get(uid, clause_cache_key(clause.logical), enc_w, clause.encoded, pk);
    e.clause_idx = static_cast<uint32_t>(ci);
    return e;
}

namespace {

struct TreeWalker {
    const BlockView& bv;
    const CompiledQuery& q;
    bool straddle;
    const PublicParams& pk;
    ProofCache& cache;
    std::vector<TemporalObject>* results;
    bool collect_only;

    VoEntry walk(int32_t idx) {
        const IntraNode& n = bv.block.nodes[idx];
        const Multiset& w = bv.node_enc[idx];
        VoEntry e;
        if (q.cond.matches(w)) {
            if (n.is_leaf()) {
                const TemporalObject& o = bv.block.objects[n.object_index];
                if (straddle && (o.t < q.ts || o.t > q.te)) {
                    e.kind = VoEntry::oow_leaf;
                    e.ts = o.t;
                    e.hash = o.payload_digest();
                    e.att_digest = n.att_digest;
                } else {
                    e.kind = VoEntry::matched_leaf;
                    e.object = o;
                    if (!collect_only && results) results->push_back(o);
                }
            } else {
                e.kind = VoEntry::internal;
                e.att_digest = n.att_digest;
                e.children.push_back(walk(n.left));
                e.children.push_back(walk(n.right));
            }
            return e;
        }
        size_t ci = q.cond.find_mismatch_clause(w);
        const auto& clause = q.cond.clauses[ci];
        HashDigest ck = clause_cache_key(clause.logical);
        uint64_t uid = node_uid(bv.block.height, static_cast<uint32_t>(idx));
        if (n.is_leaf()) {
            const TemporalObject& o = bv.block.objects[n.object_index];
            if (straddle && (o.t < q.ts || o.t > q.te)) {
                // timestamp exclusion is cheaper than a proof and needs no pairing
                e.kind = VoEntry::oow_leaf;
                e.ts = o.t;
                e.hash = o.payload_digest();
                e.att_digest = n.att_digest;
                return e;
            }
            e.kind = VoEntry::mismatch_leaf;
            e.hash = o.id();
        } else {
            e.kind = VoEntry::mismatch_subtree;
            e.hash = inner_child_hash(bv.block.nodes[n.left].hash, bv.block.nodes[n.right].hash);
        }
        e.att_digest = n.att_digest;
        e.clause_idx = static_cast<uint32_t>(ci);
        if (collect_only)
            cache.request(uid, ck, w, clause.encoded);
        else
            e.proof = cache.get(uid, ck, w, clause.encoded, pk);
        return e;
    }
};

} // namespace

VoSegment make_block_segment(const BlockView& bv, const CompiledQuery& q, bool straddle,
                             const PublicParams& pk, const ChainConfig& cfg, ProofCache& cache,
                             std::vector<TemporalObject>* results, QueryStats* stats) {
    VoSegment seg;
    seg.height = bv.block.height;
    if (stats) stats->blocks_visited += 1;
    if (bv.block.objects.empty()) {
        seg.mode = SegmentMode::empty_block;
        return seg;
    }
    if (cfg.index_kind == IndexKind::nil) {
        seg.mode = straddle ? SegmentMode::flat_straddle : SegmentMode::flat;
        for (size_t i = 0; i < bv.block.objects.size(); ++i) {
            const TemporalObject& o = bv.block.objects[i];
            if (straddle && (o.t < q.ts || o.t > q.te)) {
                VoFlatEntry e;
                e.kind = VoFlatEntry::oow;
                e.ts = o.t;
                e.hash = o.payload_digest();
                e.att_digest = bv.block.leaf_digests[i];
                seg.flat.push_back(std::move(e));
                continue;
            }
            VoFlatEntry e =
                query_single(bv.block.objects[i], bv.object_enc[i], bv.block.leaf_digests[i], q,
                             pk, cache, node_uid(bv.block.height, static_cast<uint32_t>(i)));
            if (e.kind == VoFlatEntry::matched && results) results->push_back(o);
            seg.flat.push_back(std::move(e));
        }
        return seg;
    }
    seg.mode = straddle ? SegmentMode::tree_straddle : SegmentMode::tree;
    TreeWalker walker{bv, q, straddle, pk, cache, results, false};
    seg.tree = walker.walk(bv.block.root);
    return seg;
}

// --- batch compaction ------------------------------------------------------------------

namespace {

struct BatchMember {
    AccValue digest;
    const DisjointProof* proof;
};

void collect_tree_refs(VoEntry& e, std::map<uint32_t, std::vector<VoEntry*>>& groups) {
    if (e.kind == VoEntry::internal) {
        for (auto& c : e.children) collect_tree_refs(c, groups);
    } else if (e.kind == VoEntry::mismatch_leaf || e.kind == VoEntry::mismatch_subtree) {
        groups[e.clause_idx].push_back(&e);
    }
}

} // namespace

VerificationObject batch_compact(VerificationObject vo, const PublicParams& pk) {
    if (pk.construction != Construction::acc2) return vo; // no-op on acc1
    std::map<uint32_t, std::vector<VoEntry*>> tree_groups;
    std::map<uint32_t, std::vector<VoFlatEntry*>> flat_groups;
    for (auto& seg : vo.segments) {
        if (seg.tree) collect_tree_refs(*seg.tree, tree_groups);
        for (auto& e : seg.flat)
            if (e.kind == VoFlatEntry::mismatch) flat_groups[e.clause_idx].push_back(&e);
    }
    // group across tree and flat entries by clause
    std::set<uint32_t> clauses;
    for (const auto& [ci, v] : tree_groups) clauses.insert(ci);
    for (const auto& [ci, v] : flat_groups) clauses.insert(ci);
    for (uint32_t ci : clauses) {
        auto& tg = tree_groups[ci];
        auto& fg = flat_groups[ci];
        if (tg.size() + fg.size() < 2) continue;
        std::vector<AccValue> digests;
        std::vector<DisjointProof> proofs;
        for (auto* e : tg) {
            digests.push_back(e->att_digest);
            proofs.push_back(e->proof);
        }
        for (auto* e : fg) {
            digests.push_back(e->att_digest);
            proofs.push_back(e->proof);
        }
        VoBatch batch;
        batch.clause_idx = ci;
        batch.agg_digest = sum(digests, *pk.group);
        batch.agg_proof = proof_sum(proofs, *pk.group);
        uint32_t bi = static_cast<uint32_t>(vo.batches.size());
        vo.batches.push_back(std::move(batch));
        for (auto* e : tg) {
            e->kind = e->kind == VoEntry::mismatch_leaf ? VoEntry::mismatch_leaf_ref
                                                        : VoEntry::mismatch_subtree_ref;
            e->proof = DisjointProof{};
            e->batch_idx = bi;
        }
        for (auto* e : fg) {
            e->kind = VoFlatEntry::mismatch_ref;
            e->proof = DisjointProof{};
            e->batch_idx = bi;
        }
    }
    vo.batched = !vo.batches.empty();
    return vo;
}

// --- window queries --------------------------------------------------------------------

QueryEngine::QueryEngine(const ChainStore& store) : store_(store), enc_(store.encoder()) {}

CompiledQuery QueryEngine::compile(const QuerySpec& q) const {
    return compile_query(q, store_.config(), enc_);
}

CompiledQuery QueryEngine::compile(const std::string& query_text) const {
    return compile(parse_query_text(query_text));
}

QueryOutput QueryEngine::query_window(const CompiledQuery& q, const QueryOptions& opt) const {
    if (!q.spec.window) throw DomainError("window queries need a time window");
    QueryOutput out;
    out.vo.construction = store_.config().construction;
    out.vo.query_text = q.text;
    for (const auto& c : q.cond.clauses) out.vo.clause_table.push_back(c.logical);
    const ChainConfig& cfg = store_.config();
    const PublicParams& pk = store_.params();
    WindowBlocks wb = window_candidates(store_.headers(), q.ts, q.te);
    if (!wb.any) {
        out.stats.prove_calls = 0;
        return out;
    }
    ProofCache cache;
    std::map<uint64_t, BlockView> views;
    auto view = [&](uint64_t h) -> const BlockView& {
        auto it = views.find(h);
        if (it == views.end()) it = views.emplace(h, BlockView::load(store_, h)).first;
        return it->second;
    };

    // pass 1: walk the window, record the plan, queue proof tasks
    struct Step {
        bool is_skip;
        uint64_t height; // block height, or skip owner
        uint32_t distance = 0;
        uint32_t clause_idx = 0;
    };
    std::vector<Step> plan;
    int64_t pending = static_cast<int64_t>(wb.hi);
    const int64_t lo = static_cast<int64_t>(wb.lo);
    while (pending >= lo) {
        uint64_t h = static_cast<uint64_t>(pending);
        bool skipped = false;
        if (cfg.index_kind == IndexKind::both && opt.use_inter && h + 1 <= store_.tip() &&
            wb.has_full() && h <= wb.full_hi) {
            const BlockView& owner = view(h + 1);
            // largest eligible skip wins; the walk takes the first found
            for (auto it = owner.block.skips.rbegin(); it != owner.block.skips.rend(); ++it) {
                uint64_t span_lo = h + 1 - it->distance;
                if (h + 1 < it->distance || span_lo < wb.full_lo || span_lo < uint64_t(lo))
                    continue;
                Multiset enc_w = enc_.encode_multiset(it->w);
                auto ci = q.cond.try_find_mismatch_clause(enc_w);
                if (!ci) continue;
                const auto& clause = q.cond.clauses[*ci];
                cache.request(skip_uid(h + 1, it->distance), clause_cache_key(clause.logical),
                              std::move(enc_w), clause.encoded);
                plan.push_back(Step{true, h + 1, it->distance, static_cast<uint32_t>(*ci)});
                pending = static_cast<int64_t>(h) - it->distance;
                skipped = true;
                out.stats.skips_taken += 1;
                break;
            }
        }
        if (skipped) continue;
        const BlockView& bv = view(h);
        // queue the block's proofs
        if (!bv.block.objects.empty()) {
            bool straddle = !wb.is_full(h);
            if (cfg.index_kind == IndexKind::nil) {
                for (size_t i = 0; i < bv.block.objects.size(); ++i) {
                    const TemporalObject& o = bv.block.objects[i];
                    if (straddle && (o.t < q.ts || o.t > q.te)) continue;
                    if (q.cond.matches(bv.object_enc[i])) continue;
                    size_t ci = q.cond.find_mismatch_clause(bv.object_enc[i]);
                    cache.request(node_uid(h, static_cast<uint32_t>(i)),
                                  clause_cache_key(q.cond.clauses[ci].logical), bv.object_enc[i],
                                  q.cond.clauses[ci].encoded);
                }
            } else {
                TreeWalker collector{bv, q, straddle, pk, cache, nullptr, true};
                collector.walk(bv.block.root);
            }
        }
        plan.push_back(Step{false, h});
        pending -= 1;
    }
    cache.prove_pending(pk, opt.threads);

    // pass 2: assemble segments in walk order
    for (const auto& step : plan) {
        if (step.is_skip) {
            const BlockView& owner = view(step.height);
            VoSegment seg;
            seg.height = step.height;
            seg.mode = SegmentMode::skip;
            seg.distance = step.distance;
            const SkipEntryData* entry = nullptr;
            for (const auto& s : owner.block.skips)
                if (s.distance == step.distance) entry = &s;
            seg.pre_skipped = entry->pre_skipped;
            seg.att_digest = entry->att_digest;
            seg.clause_idx = step.clause_idx;
            const auto& clause = q.cond.clauses[step.clause_idx];
            Multiset enc_w = enc_.encode_multiset(entry->w);
            seg.proof = cache.get(skip_uid(step.height, step.distance),
                                  clause_cache_key(clause.logical), enc_w, clause.encoded, pk);
            for (const auto& s : owner.block.skips)
                if (s.distance != step.distance)
                    seg.sibling_hashes.emplace_back(s.distance, s.entry_hash);
            out.vo.segments.push_back(std::move(seg));
        } else {
            const BlockView& bv = view(step.height);
            bool straddle = !wb.is_full(step.height);
            out.vo.segments.push_back(make_block_segment(bv, q, straddle, pk, cfg, cache,
                                                         &out.results, &out.stats));
        }
    }
    out.stats.prove_calls = cache.prove_calls();
    if (opt.batch) out.vo = batch_compact(std::move(out.vo), pk);
    return out;
}

} // namespace vchain
