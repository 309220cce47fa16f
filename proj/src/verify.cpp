#include "vchain/verify.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <sstream>

#include "vchain/errors.hpp"

namespace vchain {

namespace {

struct Rejection {
    std::string reason;
    std::string detail;
};

/// Shared state for one verification run.
struct Checker {
    const LightView& view;
    const CompiledQuery& q;
    const VerificationObject& vo;
    ElementEncoder enc;
    PairingCounter counter;
    uint64_t digest_recomputes = 0;
    std::vector<TemporalObject> collected; // matched objects in traversal order
    // memoized per clause index: certification + clause accumulator value
    std::map<uint32_t, AccValue> clause_acc;
    std::map<uint32_t, size_t> clause_cert;
    // batch members gathered while walking trees
    std::map<uint32_t, std::vector<AccValue>> batch_members;
    std::optional<Rejection> fail;

    Checker(const LightView& v, const CompiledQuery& cq, const VerificationObject& o)
        : view(v), q(cq), vo(o), enc(v.encoder()) {}

    bool reject(const std::string& reason, const std::string& detail) {
        if (!fail) fail = Rejection{reason, detail};
        return false;
    }

    /// A proof's clause must be one of the transformed query's clauses,
    /// recomputed locally; a proof against an arbitrary set proves nothing.
    bool certify_clause(uint32_t clause_idx, uint64_t height) {
        if (clause_idx >= vo.clause_table.size())
            return reject(reject::malformed, "clause index out of range");
        if (clause_cert.count(clause_idx)) return true;
        Clause c = vo.clause_table[clause_idx];
        c.normalize();
        for (size_t i = 0; i < q.cond.clauses.size(); ++i) {
            if (q.cond.clauses[i].logical == c) {
                clause_cert[clause_idx] = i;
                return true;
            }
        }
        return reject(reject::clause_forgery,
                      "clause " + std::to_string(clause_idx) + " is not part of the query (block " +
                          std::to_string(height) + ")");
    }

    const AccValue& clause_accumulator(uint32_t clause_idx) {
        auto it = clause_acc.find(clause_idx);
        if (it != clause_acc.end()) return it->second;
        size_t qi = clause_cert.at(clause_idx);
        AccValue v = setup(q.cond.clauses[qi].encoded, view.pk);
        ++digest_recomputes;
        return clause_acc.emplace(clause_idx, std::move(v)).first->second;
    }

    bool check_disjoint(const AccValue& digest, uint32_t clause_idx, const DisjointProof& proof,
                        uint64_t height) {
        if (!certify_clause(clause_idx, height)) return false;
        bool ok;
        try {
            ok = verify_disjoint(digest, clause_accumulator(clause_idx), proof, view.pk, &counter);
        } catch (const Error& e) {
            return reject(reject::bad_proof, std::string("proof malformed: ") + e.what());
        }
        if (!ok)
            return reject(reject::bad_proof,
                          "disjointness proof rejected at block " + std::to_string(height));
        return true;
    }

    /// Recompute an object's attribute digest from its revealed contents.
    AccValue object_digest(const TemporalObject& o) {
        ++digest_recomputes;
        return setup(enc.encode_multiset(transform_object(o, view.cfg.widths)), view.pk);
    }

    bool in_window(uint64_t t) const { return t >= q.ts && t <= q.te; }

    /// Tree walk; returns the recomputed commitment hash of the entry.
    std::optional<HashDigest> walk(const VoEntry& e, uint64_t height, bool straddle) {
        switch (e.kind) {
            case VoEntry::internal: {
                if (e.children.size() != 2) {
                    reject(reject::malformed, "internal entry without two children");
                    return std::nullopt;
                }
                auto l = walk(e.children[0], height, straddle);
                if (!l) return std::nullopt;
                auto r = walk(e.children[1], height, straddle);
                if (!r) return std::nullopt;
                return node_commitment(*l, *r, e.att_digest.serialize(*view.pk.group));
            }
            case VoEntry::matched_leaf: {
                const TemporalObject& o = e.object;
                if (!in_window(o.t)) {
                    reject(reject::nonmatching_result,
                           "returned object outside the window (block " + std::to_string(height) +
                               ")");
                    return std::nullopt;
                }
                Multiset w = enc.encode_multiset(transform_object(o, view.cfg.widths));
                if (!q.cond.matches(w)) {
                    reject(reject::nonmatching_result,
                           "returned object does not satisfy the query (block " +
                               std::to_string(height) + ")");
                    return std::nullopt;
                }
                collected.push_back(o);
                AccValue d = object_digest(o);
                return leaf_commitment(o.id(), d.serialize(*view.pk.group));
            }
            case VoEntry::mismatch_leaf: {
                if (!check_disjoint(e.att_digest, e.clause_idx, e.proof, height))
                    return std::nullopt;
                return leaf_commitment(e.hash, e.att_digest.serialize(*view.pk.group));
            }
            case VoEntry::mismatch_subtree: {
                if (!check_disjoint(e.att_digest, e.clause_idx, e.proof, height))
                    return std::nullopt;
                return node_commitment_from_inner(e.hash,
                                                  e.att_digest.serialize(*view.pk.group));
            }
            case VoEntry::oow_leaf: {
                if (!straddle) {
                    reject(reject::malformed, "out-of-window entry in a fully covered block");
                    return std::nullopt;
                }
                if (in_window(e.ts)) {
                    reject(reject::gap, "object claimed out-of-window lies inside it (block " +
                                            std::to_string(height) + ")");
                    return std::nullopt;
                }
                HashDigest id = object_id_from_parts(e.ts, e.hash);
                return leaf_commitment(id, e.att_digest.serialize(*view.pk.group));
            }
            case VoEntry::mismatch_leaf_ref:
            case VoEntry::mismatch_subtree_ref: {
                if (!vo.batched || e.batch_idx >= vo.batches.size()) {
                    reject(reject::malformed, "dangling batch reference");
                    return std::nullopt;
                }
                if (vo.batches[e.batch_idx].clause_idx >= vo.clause_table.size()) {
                    reject(reject::malformed, "batch clause out of range");
                    return std::nullopt;
                }
                batch_members[e.batch_idx].push_back(e.att_digest);
                Bytes db = e.att_digest.serialize(*view.pk.group);
                return e.kind == VoEntry::mismatch_leaf_ref
                           ? leaf_commitment(e.hash, db)
                           : node_commitment_from_inner(e.hash, db);
            }
        }
        reject(reject::malformed, "unknown entry kind");
        return std::nullopt;
    }

    bool check_flat(const VoSegment& seg, const BlockHeader& hdr, bool straddle) {
        std::vector<std::pair<HashDigest, Bytes>> leaves;
        for (const auto& e : seg.flat) {
            switch (e.kind) {
                case VoFlatEntry::matched: {
                    if (!in_window(e.object.t))
                        return reject(reject::nonmatching_result,
                                      "returned object outside the window");
                    Multiset w =
                        enc.encode_multiset(transform_object(e.object, view.cfg.widths));
                    if (!q.cond.matches(w))
                        return reject(reject::nonmatching_result,
                                      "returned object does not satisfy the query");
                    collected.push_back(e.object);
                    AccValue d = object_digest(e.object);
                    leaves.emplace_back(e.object.id(), d.serialize(*view.pk.group));
                    break;
                }
                case VoFlatEntry::mismatch: {
                    if (!check_disjoint(e.att_digest, e.clause_idx, e.proof, seg.height))
                        return false;
                    leaves.emplace_back(e.hash, e.att_digest.serialize(*view.pk.group));
                    break;
                }
                case VoFlatEntry::oow: {
                    if (!straddle)
                        return reject(reject::malformed,
                                      "out-of-window entry in a fully covered block");
                    if (in_window(e.ts))
                        return reject(reject::gap,
                                      "object claimed out-of-window lies inside it (block " +
                                          std::to_string(seg.height) + ")");
                    leaves.emplace_back(object_id_from_parts(e.ts, e.hash),
                                        e.att_digest.serialize(*view.pk.group));
                    break;
                }
                case VoFlatEntry::mismatch_ref: {
                    if (!vo.batched || e.batch_idx >= vo.batches.size())
                        return reject(reject::malformed, "dangling batch reference");
                    batch_members[e.batch_idx].push_back(e.att_digest);
                    leaves.emplace_back(e.hash, e.att_digest.serialize(*view.pk.group));
                    break;
                }
            }
        }
        if (flat_root(leaves) != hdr.merkle_root)
            return reject(reject::root_mismatch,
                          "flat commitment mismatch at block " + std::to_string(seg.height));
        return true;
    }

    bool check_skip(const VoSegment& seg, uint64_t expected_pending, const WindowBlocks& wb,
                    bool span_mode, uint64_t span_lo) {
        uint64_t owner = seg.height;
        uint64_t k = seg.distance;
        if (owner != expected_pending + 1)
            return reject(reject::gap, "skip segment does not anchor at the pending block");
        if (view.cfg.index_kind != IndexKind::both)
            return reject(reject::malformed, "skip segment on a chain without an inter-block index");
        if (owner > view.headers.size() - 1)
            return reject(reject::malformed, "skip owner beyond the chain tip");
        // k = 2^j within the configured list, span inside the chain
        bool valid_k = false;
        for (uint8_t j = 1; j <= view.cfg.skiplen; ++j)
            if (k == (uint64_t(1) << j)) valid_k = true;
        if (!valid_k || owner < k) return reject(reject::malformed, "invalid skip distance");
        uint64_t cover_lo = owner - k;
        uint64_t cover_hi = owner - 1;
        if (span_mode) {
            if (cover_lo < span_lo) return reject(reject::gap, "skip span leaves the query span");
        } else {
            if (!wb.has_full() || cover_lo < wb.full_lo || cover_hi > wb.full_hi)
                return reject(reject::gap, "skip span not fully inside the window");
        }
        // bind the entry to the owner's header
        HashDigest eh = skip_entry_hash(seg.pre_skipped,
                                        seg.att_digest.serialize(*view.pk.group));
        std::vector<HashDigest> entry_hashes;
        size_t sib = 0;
        for (uint8_t j = 1; j <= view.cfg.skiplen; ++j) {
            uint64_t kj = uint64_t(1) << j;
            if (owner < kj) break;
            if (kj == k) {
                entry_hashes.push_back(eh);
            } else {
                if (sib >= seg.sibling_hashes.size() || seg.sibling_hashes[sib].first != kj)
                    return reject(reject::malformed, "skip sibling hashes incomplete");
                entry_hashes.push_back(seg.sibling_hashes[sib].second);
                ++sib;
            }
        }
        if (sib != seg.sibling_hashes.size())
            return reject(reject::malformed, "unexpected extra skip siblings");
        if (skip_list_root_hash(entry_hashes) != view.headers[owner].skip_list_root)
            return reject(reject::root_mismatch,
                          "skip list root mismatch at block " + std::to_string(owner));
        // bind the covered span to the actual headers
        std::vector<HashDigest> newest_first;
        for (uint64_t i = 0; i < k; ++i)
            newest_first.push_back(view.headers[owner - 1 - i].block_hash());
        if (pre_skipped_hash(newest_first) != seg.pre_skipped)
            return reject(reject::root_mismatch,
                          "skipped-blocks hash mismatch at block " + std::to_string(owner));
        return check_disjoint(seg.att_digest, seg.clause_idx, seg.proof, owner);
    }

    bool check_batches() {
        for (size_t i = 0; i < vo.batches.size(); ++i) {
            const VoBatch& b = vo.batches[i];
            auto it = batch_members.find(static_cast<uint32_t>(i));
            if (it == batch_members.end() || it->second.empty())
                return reject(reject::malformed, "batch without members");
            AccValue total;
            try {
                total = sum(it->second, *view.pk.group);
            } catch (const Error& e) {
                return reject(reject::malformed, std::string("batch aggregation: ") + e.what());
            }
            if (!(total == b.agg_digest))
                return reject(reject::bad_proof,
                              "batch digest does not equal the sum of member digests");
            if (!check_disjoint(b.agg_digest, b.clause_idx, b.agg_proof, 0)) return false;
        }
        return true;
    }
};

VerifyReport run_verify(const LightView& view, const QuerySpec& q,
                        const std::vector<TemporalObject>& results, const VerificationObject& vo,
                        bool span_mode, uint64_t span_lo, uint64_t span_hi) {
    auto t0 = std::chrono::steady_clock::now();
    VerifyReport rep;
    rep.vo_bytes = vo.byte_size(*view.pk.group);
    ElementEncoder enc = view.encoder();
    CompiledQuery cq = compile_query(q, view.cfg, enc);
    Checker ck(view, cq, vo);

    auto finish = [&](bool ok) {
        rep.accepted = ok && !ck.fail;
        if (ck.fail) {
            rep.reason = ck.fail->reason;
            rep.detail = ck.fail->detail;
        } else if (!ok) {
            if (rep.reason.empty()) rep.reason = reject::malformed;
        }
        rep.pairings = ck.counter.miller_loops;
        rep.disjoint_checks = ck.counter.disjoint_checks;
        rep.digest_recomputes = ck.digest_recomputes;
        rep.elapsed_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        return rep;
    };

    if (vo.construction != view.cfg.construction) {
        ck.reject(reject::malformed, "VO construction does not match the chain");
        return finish(false);
    }
    if (vo.query_text != cq.text) {
        ck.reject(reject::malformed, "VO echoes a different query");
        return finish(false);
    }
    if (!vo.batched && !vo.batches.empty()) {
        ck.reject(reject::malformed, "unflagged batch table");
        return finish(false);
    }

    // coverage bounds from headers (window mode) or the given span
    WindowBlocks wb;
    if (span_mode) {
        wb.any = span_lo <= span_hi && span_hi < view.headers.size();
        wb.lo = wb.full_lo = span_lo;
        wb.hi = wb.full_hi = span_hi;
        if (!wb.any) {
            ck.reject(reject::malformed, "bad verification span");
            return finish(false);
        }
    } else {
        if (!q.window) {
            ck.reject(reject::malformed, "window verification without a window");
            return finish(false);
        }
        wb = window_candidates(view.headers, cq.ts, cq.te);
    }

    // walk the segments newest-to-oldest; they must tile [lo, hi] exactly
    int64_t pending = wb.any ? static_cast<int64_t>(wb.hi) : -1;
    const int64_t lo = wb.any ? static_cast<int64_t>(wb.lo) : 0;
    for (const auto& seg : vo.segments) {
        if (!wb.any || pending < lo) {
            ck.reject(reject::gap, "VO covers blocks outside the query window");
            return finish(false);
        }
        uint64_t h = static_cast<uint64_t>(pending);
        if (seg.mode == SegmentMode::skip) {
            if (!ck.check_skip(seg, h, wb, span_mode, span_lo)) return finish(false);
            rep.blocks_covered += seg.distance;
            pending -= seg.distance;
            continue;
        }
        if (seg.height != h) {
            ck.reject(reject::gap, "segment height " + std::to_string(seg.height) +
                                       " does not match pending block " + std::to_string(h));
            return finish(false);
        }
        const BlockHeader& hdr = view.headers[h];
        bool full = span_mode ? true : wb.is_full(h);
        switch (seg.mode) {
            case SegmentMode::empty_block:
                if (hdr.merkle_root != empty_hash()) {
                    ck.reject(reject::root_mismatch,
                              "block " + std::to_string(h) + " declared empty is not");
                    return finish(false);
                }
                break;
            case SegmentMode::tree:
            case SegmentMode::tree_straddle: {
                if (view.cfg.index_kind == IndexKind::nil) {
                    ck.reject(reject::malformed, "tree segment on a nil chain");
                    return finish(false);
                }
                bool straddle = seg.mode == SegmentMode::tree_straddle;
                if (straddle && full) {
                    ck.reject(reject::malformed, "straddle mode on a fully covered block");
                    return finish(false);
                }
                if (!straddle && !full) {
                    ck.reject(reject::gap, "window-boundary block " + std::to_string(h) +
                                               " needs per-object timestamps");
                    return finish(false);
                }
                if (!seg.tree) {
                    ck.reject(reject::malformed, "tree segment without entries");
                    return finish(false);
                }
                auto root = ck.walk(*seg.tree, h, straddle);
                if (!root) return finish(false);
                if (*root != hdr.merkle_root) {
                    ck.reject(reject::root_mismatch,
                              "merkle root mismatch at block " + std::to_string(h));
                    return finish(false);
                }
                break;
            }
            case SegmentMode::flat:
            case SegmentMode::flat_straddle: {
                if (view.cfg.index_kind != IndexKind::nil) {
                    ck.reject(reject::malformed, "flat segment on an indexed chain");
                    return finish(false);
                }
                bool straddle = seg.mode == SegmentMode::flat_straddle;
                if (straddle && full) {
                    ck.reject(reject::malformed, "straddle mode on a fully covered block");
                    return finish(false);
                }
                if (!straddle && !full) {
                    ck.reject(reject::gap, "window-boundary block " + std::to_string(h) +
                                               " needs per-object timestamps");
                    return finish(false);
                }
                if (!ck.check_flat(seg, hdr, straddle)) return finish(false);
                break;
            }
            case SegmentMode::skip:
                break; // handled above
        }
        rep.blocks_covered += 1;
        pending -= 1;
    }
    if (wb.any && pending != lo - 1) {
        ck.reject(reject::gap, "VO does not cover blocks " + std::to_string(lo) + ".." +
                                   std::to_string(pending));
        return finish(false);
    }
    if (!ck.check_batches()) return finish(false);

    // the result list must equal the verified matches exactly
    if (results.size() != ck.collected.size() ||
        !std::equal(results.begin(), results.end(), ck.collected.begin())) {
        // extra objects in R are foreign; missing ones are a gap
        for (const auto& r : results) {
            bool found = false;
            for (const auto& c : ck.collected)
                if (c == r) found = true;
            if (!found) {
                ck.reject(reject::foreign_object, "result object is not covered by the VO");
                return finish(false);
            }
        }
        ck.reject(reject::gap, "VO-verified matches differ from the result list");
        return finish(false);
    }
    return finish(true);
}

} // namespace

VerifyReport verify_window(const LightView& view, const QuerySpec& q,
                           const std::vector<TemporalObject>& results,
                           const VerificationObject& vo) {
    return run_verify(view, q, results, vo, false, 0, 0);
}

VerifyReport verify_span(const LightView& view, const QuerySpec& q, uint64_t lo, uint64_t hi,
                         const std::vector<TemporalObject>& results,
                         const VerificationObject& vo) {
    return run_verify(view, q, results, vo, true, lo, hi);
}

std::string VerifyReport::to_text() const {
    std::ostringstream o;
    o << (accepted ? "ACCEPT" : "REJECT: " + reason);
    if (!detail.empty()) o << " (" << detail << ")";
    o << "\n  blocks covered: " << blocks_covered << "\n  disjointness checks: " << disjoint_checks
      << "\n  pairing evaluations: " << pairings << "\n  digest recomputations: "
      << digest_recomputes << "\n  vo bytes: " << vo_bytes << "\n  elapsed ms: " << elapsed_ms
      << "\n";
    return o.str();
}

std::string VerifyReport::to_json() const {
    std::ostringstream o;
    auto esc = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '"' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        return out;
    };
    o << "{\"accepted\":" << (accepted ? "true" : "false") << ",\"reason\":\"" << esc(reason)
      << "\",\"detail\":\"" << esc(detail) << "\",\"blocks_covered\":" << blocks_covered
      << ",\"disjoint_checks\":" << disjoint_checks << ",\"pairings\":" << pairings
      << ",\"digest_recomputes\":" << digest_recomputes << ",\"vo_bytes\":" << vo_bytes
      << ",\"elapsed_ms\":" << elapsed_ms << "}";
    return o.str();
}

} // namespace vchain
