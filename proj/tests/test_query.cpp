#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "vchain/errors.hpp"
#include "vchain/query.hpp"
#include "vchain/verify.hpp"

using namespace vchain;
using namespace vchain::testutil;

namespace {

TemporalObject obj(uint64_t t, std::vector<std::string> kws, std::vector<uint64_t> v = {}) {
    TemporalObject o;
    o.t = t;
    o.v = std::move(v);
    o.w = std::move(kws);
    o.canonicalize();
    return o;
}

ChainConfig base_config(Construction c, IndexKind kind, std::vector<uint8_t> widths = {},
                        uint8_t skiplen = 3) {
    ChainConfig cfg;
    cfg.construction = c;
    cfg.index_kind = kind;
    cfg.skiplen = skiplen;
    cfg.widths = std::move(widths);
    cfg.block_policy = "count:4";
    cfg.curve = "ss256";
    return cfg;
}

uint64_t q_for(Construction c) {
    return c == Construction::acc1 ? 4096 : 4096;
}

ChainFixture rental_chain(Construction c, IndexKind kind) {
    ChainConfig cfg = base_config(c, kind);
    cfg.reserved_keywords = {"Sedan", "Benz", "BMW", "Audi", "Van"};
    std::vector<TemporalObject> objs = {obj(1, {"Sedan", "Benz"}), obj(2, {"Sedan", "Audi"}),
                                        obj(3, {"Van", "Benz"}), obj(4, {"Van", "BMW"})};
    return ChainFixture("/tmp/vchain-q-rental-" + std::string(construction_name(c)) +
                            index_kind_name(kind),
                        cfg, cached_params(c, q_for(c)), objs);
}

QuerySpec rental_query() {
    return parse_query_text(R"(window=[0,10] bool="Sedan" AND ("Benz" OR "BMW"))");
}

struct EntryCensus {
    int internal = 0, matched = 0, mismatch_leaf = 0, mismatch_subtree = 0, oow = 0, refs = 0;

    void count(const VoEntry& e) {
        switch (e.kind) {
            case VoEntry::internal:
                ++internal;
                for (const auto& c : e.children) count(c);
                break;
            case VoEntry::matched_leaf: ++matched; break;
            case VoEntry::mismatch_leaf: ++mismatch_leaf; break;
            case VoEntry::mismatch_subtree: ++mismatch_subtree; break;
            case VoEntry::oow_leaf: ++oow; break;
            default: ++refs; break;
        }
    }
};

} // namespace

TEST_CASE("worked example block: result and VO structure") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        CAPTURE(construction_name(c));
        ChainFixture fx = rental_chain(c, IndexKind::intra);
        ChainStore store = fx.open();
        QueryEngine engine(store);
        QueryOutput out = engine.query_window(engine.compile(rental_query()));
        // R = { o_1 }
        REQUIRE(out.results.size() == 1);
        CHECK(out.results[0].w == std::vector<std::string>{"Benz", "Sedan"});
        // VO: two internal digests (root, N5), one leaf mismatch (N2) with the
        // {Benz, BMW} clause, one subtree mismatch (N6) with {Sedan}
        REQUIRE(out.vo.segments.size() == 2); // genesis (empty) is also in-window
        const VoSegment& seg = out.vo.segments[0];
        REQUIRE(seg.mode == SegmentMode::tree);
        EntryCensus census;
        census.count(*seg.tree);
        CHECK(census.internal == 2);
        CHECK(census.matched == 1);
        CHECK(census.mismatch_leaf == 1);
        CHECK(census.mismatch_subtree == 1);
        CHECK(census.oow == 0);
        // clause values follow the per-object walkthrough
        const VoEntry& root = *seg.tree;
        const VoEntry& n5 = root.children[0];
        const VoEntry& n2 = n5.children[1];
        REQUIRE(n2.kind == VoEntry::mismatch_leaf);
        CHECK(out.vo.clause_table[n2.clause_idx].elems.size() == 2); // {Benz, BMW}
        const VoEntry& n6 = root.children[1];
        REQUIRE(n6.kind == VoEntry::mismatch_subtree);
        REQUIRE(out.vo.clause_table[n6.clause_idx].elems.size() == 1); // {Sedan}
        CHECK(out.vo.clause_table[n6.clause_idx].elems[0].kw == "Sedan");
        // and the whole thing verifies from headers alone
        VerifyReport rep = verify_window(fx.light(), rental_query(), out.results, out.vo);
        CHECK(rep.accepted);
        CHECK(out.vo.segments[1].mode == SegmentMode::empty_block);
    }
}

TEST_CASE("query matching nothing prunes at the root") {
    ChainFixture fx = rental_chain(Construction::acc1, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text(R"(window=[0,10] bool="Tractor")");
    QueryOutput out = engine.query_window(engine.compile(q));
    CHECK(out.results.empty());
    REQUIRE(out.vo.segments[0].mode == SegmentMode::tree);
    CHECK(out.vo.segments[0].tree->kind == VoEntry::mismatch_subtree);
    CHECK(verify_window(fx.light(), q, out.results, out.vo).accepted);
}

TEST_CASE("single-object queries on a nil chain") {
    ChainFixture fx = rental_chain(Construction::acc1, IndexKind::nil);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QueryOutput out = engine.query_window(engine.compile(rental_query()));
    REQUIRE(out.results.size() == 1);
    const VoSegment& seg = out.vo.segments[0];
    REQUIRE(seg.mode == SegmentMode::flat);
    REQUIRE(seg.flat.size() == 4);
    CHECK(seg.flat[0].kind == VoFlatEntry::matched);
    // o2 mismatches via {Benz, BMW}; o3 and o4 via {Sedan}
    CHECK(out.vo.clause_table[seg.flat[1].clause_idx].elems.size() == 2);
    CHECK(out.vo.clause_table[seg.flat[2].clause_idx].elems.size() == 1);
    CHECK(out.vo.clause_table[seg.flat[3].clause_idx].elems.size() == 1);
    CHECK(verify_window(fx.light(), rental_query(), out.results, out.vo).accepted);
}

TEST_CASE("empty condition returns everything") {
    ChainFixture fx = rental_chain(Construction::acc1, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text("window=[0,10]");
    QueryOutput out = engine.query_window(engine.compile(q));
    CHECK(out.results.size() == 4);
    CHECK(verify_window(fx.light(), q, out.results, out.vo).accepted);
}

TEST_CASE("window outside the chain yields an empty accepted answer") {
    ChainFixture fx = rental_chain(Construction::acc1, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text(R"(window=[100,200] bool="Sedan")");
    QueryOutput out = engine.query_window(engine.compile(q));
    CHECK(out.results.empty());
    CHECK(out.vo.segments.empty());
    CHECK(verify_window(fx.light(), q, out.results, out.vo).accepted);
}

TEST_CASE("boundary blocks are processed per object") {
    // one block holding ts 1..4; the window cuts through the middle
    for (auto kind : {IndexKind::intra, IndexKind::nil}) {
        CAPTURE(index_kind_name(kind));
        ChainFixture fx = rental_chain(Construction::acc1, kind);
        ChainStore store = fx.open();
        QueryEngine engine(store);
        QuerySpec q = parse_query_text(R"(window=[2,3] bool="Benz")");
        QueryOutput out = engine.query_window(engine.compile(q));
        // only o3 (ts 3, {Van, Benz}) matches inside the window
        REQUIRE(out.results.size() == 1);
        CHECK(out.results[0].t == 3);
        const VoSegment& seg = out.vo.segments[0];
        CHECK((seg.mode == SegmentMode::tree_straddle || seg.mode == SegmentMode::flat_straddle));
        VerifyReport rep = verify_window(fx.light(), q, out.results, out.vo);
        CHECK(rep.accepted);
    }
}

TEST_CASE("skip-friendly chain: inter-block jumps fire and shrink the VO") {
    // 12 single-object blocks; only the first carries the needle keyword
    ChainConfig cfg = base_config(Construction::acc2, IndexKind::both, {}, 3);
    cfg.block_policy = "count:1";
    cfg.reserved_keywords = {"needle", "hay"};
    std::vector<TemporalObject> objs;
    objs.push_back(obj(1, {"needle"}));
    for (int i = 2; i <= 12; ++i) objs.push_back(obj(i, {"hay"}));
    ChainFixture fx("/tmp/vchain-q-skip", cfg, cached_params(Construction::acc2, 4096), objs);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text(R"(window=[0,50] bool="needle")");

    QueryOutput with_skips = engine.query_window(engine.compile(q));
    QueryOptions no_inter;
    no_inter.use_inter = false;
    QueryOutput without = engine.query_window(engine.compile(q), no_inter);

    CHECK(with_skips.stats.skips_taken >= 2);
    CHECK(without.stats.skips_taken == 0);
    CHECK(sorted_results(with_skips.results) == sorted_results(without.results));
    REQUIRE(with_skips.results.size() == 1);
    // a k=4 skip replaces four per-block proofs: the VO must shrink
    CHECK(with_skips.vo.byte_size(*store.group()) < without.vo.byte_size(*store.group()));
    CHECK(verify_window(fx.light(), q, with_skips.results, with_skips.vo).accepted);
    CHECK(verify_window(fx.light(), q, without.results, without.vo).accepted);
}

TEST_CASE("acc2 batching compacts shared-clause mismatches") {
    ChainFixture fx = rental_chain(Construction::acc2, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    // "Benz" mismatches o2 ({Sedan,Audi}) and o4 ({Van,BMW}) for one clause
    QuerySpec q = parse_query_text(R"(window=[0,10] bool="Benz")");
    QueryOptions opt;
    opt.batch = true;
    QueryOutput batched = engine.query_window(engine.compile(q), opt);
    QueryOutput plain = engine.query_window(engine.compile(q));
    CHECK(sorted_results(batched.results) == sorted_results(plain.results));
    REQUIRE(batched.vo.batched);
    REQUIRE(batched.vo.batches.size() == 1);
    VerifyReport vb = verify_window(fx.light(), q, batched.results, batched.vo);
    VerifyReport vp = verify_window(fx.light(), q, plain.results, plain.vo);
    CHECK(vb.accepted);
    CHECK(vp.accepted);
    // one aggregated pairing equation instead of one per mismatch
    CHECK(vb.disjoint_checks < vp.disjoint_checks);
    // all-distinct clauses leave the VO unchanged
    QueryOutput nothing_shared =
        engine.query_window(engine.compile(rental_query()), opt);
    CHECK(nothing_shared.vo.batches.empty());
}

TEST_CASE("VO serialization round trips through verification") {
    ChainFixture fx = rental_chain(Construction::acc2, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QueryOptions opt;
    opt.batch = true;
    QuerySpec q = parse_query_text(R"(window=[0,10] bool="Benz")");
    QueryOutput out = engine.query_window(engine.compile(q), opt);
    Bytes blob = out.vo.serialize(*store.group());
    VerificationObject parsed = VerificationObject::deserialize(blob, *store.group());
    CHECK(parsed.serialize(*store.group()) == blob);
    CHECK(verify_window(fx.light(), q, out.results, parsed).accepted);
    Bytes junk = blob;
    junk[1] ^= 0xff;
    CHECK_THROWS_AS(VerificationObject::deserialize(junk, *store.group()), ParseError);
}

TEST_CASE("the VO is deterministic regardless of the proving pool size") {
    ChainFixture fx = rental_chain(Construction::acc1, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = rental_query();
    QueryOptions one, four;
    one.threads = 1;
    four.threads = 4;
    QueryOutput a = engine.query_window(engine.compile(q), one);
    QueryOutput b = engine.query_window(engine.compile(q), four);
    CHECK(a.results == b.results);
    CHECK(a.vo.serialize(*store.group()) == b.vo.serialize(*store.group()));
}

TEST_CASE("random chains agree with the scan oracle under every option combination") {
    Drbg rng(4242);
    std::vector<std::string> vocab{"ale", "bun", "cot", "dim", "elf", "fog"};
    int chain_no = 0;
    for (auto c : {Construction::acc1, Construction::acc2}) {
        for (auto kind : {IndexKind::nil, IndexKind::intra, IndexKind::both}) {
            CAPTURE(construction_name(c));
            CAPTURE(index_kind_name(kind));
            ChainConfig cfg = base_config(c, kind, {4}, 2);
            cfg.block_policy = "count:3";
            cfg.reserved_keywords = vocab;
            std::vector<TemporalObject> objs;
            uint64_t t = 100;
            size_t nobj = 10 + rng.below(14);
            for (size_t i = 0; i < nobj; ++i) {
                t += rng.below(3);
                std::vector<std::string> kws;
                for (size_t j = rng.below(3); j-- > 0;) kws.push_back(vocab[rng.below(6)]);
                objs.push_back(obj(t, kws, {rng.below(16)}));
            }
            ChainFixture fx("/tmp/vchain-q-rand" + std::to_string(chain_no++), cfg,
                            cached_params(c, q_for(c)), objs);
            ChainStore store = fx.open();
            QueryEngine engine(store);
            LightView light = fx.light();
            for (int trial = 0; trial < 6; ++trial) {
                uint64_t ws = 100 + rng.below(30);
                uint64_t we = ws + rng.below(20);
                std::string text = "window=[" + std::to_string(ws) + "," + std::to_string(we) +
                                   "] range=[" + std::to_string(rng.below(8)) + "," +
                                   std::to_string(8 + rng.below(8)) + "] bool=\"" +
                                   vocab[rng.below(6)] + "\"";
                if (rng.below(2))
                    text += " AND (\"" + vocab[rng.below(6)] + "\" OR \"" + vocab[rng.below(6)] +
                            "\")";
                QuerySpec q = parse_query_text(text);
                CAPTURE(text);
                for (bool batch : {false, true}) {
                    if (batch && c == Construction::acc1) continue;
                    QueryOptions opt;
                    opt.batch = batch;
                    QueryOutput out = engine.query_window(engine.compile(q), opt);
                    auto expect = scan_oracle(fx.objects, q, store.config());
                    CHECK(sorted_results(out.results) == sorted_results(expect));
                    VerifyReport rep = verify_window(light, q, out.results, out.vo);
                    if (!rep.accepted) {
                        CAPTURE(rep.reason);
                        CAPTURE(rep.detail);
                        REQUIRE(rep.accepted);
                    }
                }
            }
        }
    }
}

// --- adversarial tampering ------------------------------------------------------

namespace {

struct HonestRun {
    ChainFixture fx;
    QuerySpec q;
    std::vector<TemporalObject> results;
    VerificationObject vo;
    LightView light;
};

HonestRun honest_run(Construction c, IndexKind kind) {
    ChainFixture fx = rental_chain(c, kind);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = rental_query();
    QueryOutput out = engine.query_window(engine.compile(q));
    LightView light = fx.light();
    return HonestRun{std::move(fx), q, std::move(out.results), std::move(out.vo),
                     std::move(light)};
}

VoEntry* find_entry(VoEntry& e, VoEntry::Kind kind) {
    if (e.kind == kind) return &e;
    for (auto& c : e.children)
        if (VoEntry* f = find_entry(c, kind)) return f;
    return nullptr;
}

} // namespace

TEST_CASE("tampering is rejected") {
    HonestRun run = honest_run(Construction::acc1, IndexKind::intra);
    REQUIRE(verify_window(run.light, run.q, run.results, run.vo).accepted);
    auto group = run.light.pk.group;

    SUBCASE("dropping a match is a gap") {
        auto r = run.results;
        r.clear();
        VerifyReport rep = verify_window(run.light, run.q, r, run.vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::gap);
    }
    SUBCASE("dropping the match and its subtree evidence") {
        auto vo = run.vo;
        VoEntry* m = find_entry(*vo.segments[0].tree, VoEntry::matched_leaf);
        REQUIRE(m);
        // pretend the matching leaf was a mismatch, with a junk proof
        m->kind = VoEntry::mismatch_leaf;
        m->hash = m->object.id();
        m->att_digest = vo.segments[0].tree->att_digest;
        m->proof = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf)->proof;
        m->clause_idx = 0;
        VerifyReport rep = verify_window(run.light, run.q, {}, vo);
        CHECK_FALSE(rep.accepted);
    }
    SUBCASE("foreign object in R") {
        auto r = run.results;
        TemporalObject fake = obj(2, {"Sedan", "Benz"});
        r.push_back(fake);
        VerifyReport rep = verify_window(run.light, run.q, r, run.vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::foreign_object);
    }
    SUBCASE("returning a non-matching stored object") {
        auto vo = run.vo;
        VoEntry* mm = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf);
        REQUIRE(mm);
        TemporalObject o2 = run.fx.objects[1]; // {Sedan, Audi}: fails the query
        mm->kind = VoEntry::matched_leaf;
        mm->object = o2;
        auto r = run.results;
        r.push_back(o2);
        VerifyReport rep = verify_window(run.light, run.q, r, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::nonmatching_result);
    }
    SUBCASE("tampered proof") {
        auto vo = run.vo;
        VoEntry* mm = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf);
        REQUIRE(mm);
        mm->proof.f1 = group->add(mm->proof.f1, group->generator());
        VerifyReport rep = verify_window(run.light, run.q, run.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::bad_proof);
    }
    SUBCASE("substituted digest with a matching fresh proof breaks the root") {
        // the classic completeness attack: swap in a digest of some unrelated
        // multiset and prove THAT disjoint from the clause
        auto vo = run.vo;
        VoEntry* mm = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf);
        REQUIRE(mm);
        ChainStore store = run.fx.open();
        ElementEncoder enc = store.encoder();
        AttrMultiset unrelated;
        unrelated.add(AttrElement::make_keyword("zzz"));
        Multiset enc_u = enc.encode_multiset(unrelated);
        CompiledQuery cq = compile_query(run.q, store.config(), enc);
        const auto& clause = cq.cond.clauses[mm->clause_idx];
        mm->att_digest = setup(enc_u, store.params());
        mm->proof = prove_disjoint(enc_u, clause.encoded, store.params());
        VerifyReport rep = verify_window(run.light, run.q, run.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::root_mismatch);
    }
    SUBCASE("clause forgery") {
        // prove against a set that is not a clause of the query
        auto vo = run.vo;
        VoEntry* mm = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf);
        REQUIRE(mm);
        ChainStore store = run.fx.open();
        ElementEncoder enc = store.encoder();
        Clause forged;
        forged.elems = {AttrElement::make_keyword("zzz")};
        forged.normalize();
        mm->clause_idx = static_cast<uint32_t>(vo.clause_table.size());
        vo.clause_table.push_back(forged);
        Multiset node_w = enc.encode_multiset(
            transform_object(run.fx.objects[1], store.config().widths));
        mm->proof = prove_disjoint(node_w, enc.encode_clause(forged), store.params());
        VerifyReport rep = verify_window(run.light, run.q, run.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::clause_forgery);
    }
    SUBCASE("truncated VO is a gap") {
        auto vo = run.vo;
        vo.segments.pop_back(); // drop the genesis coverage
        VerifyReport rep = verify_window(run.light, run.q, run.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::gap);
    }
}

TEST_CASE("skip tampering is rejected") {
    ChainConfig cfg = base_config(Construction::acc2, IndexKind::both, {}, 3);
    cfg.block_policy = "count:1";
    cfg.reserved_keywords = {"needle", "hay"};
    std::vector<TemporalObject> objs;
    objs.push_back(obj(1, {"needle"}));
    for (int i = 2; i <= 12; ++i) objs.push_back(obj(i, {"hay"}));
    ChainFixture fx("/tmp/vchain-q-skiptamper", cfg, cached_params(Construction::acc2, 4096),
                    objs);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text(R"(window=[0,50] bool="needle")");
    QueryOutput out = engine.query_window(engine.compile(q));
    REQUIRE(out.stats.skips_taken >= 1);
    LightView light = fx.light();
    REQUIRE(verify_window(light, q, out.results, out.vo).accepted);

    size_t skip_at = SIZE_MAX;
    for (size_t i = 0; i < out.vo.segments.size(); ++i)
        if (out.vo.segments[i].mode == SegmentMode::skip) skip_at = i;
    REQUIRE(skip_at != SIZE_MAX);

    SUBCASE("shrunk skip span") {
        auto vo = out.vo;
        vo.segments[skip_at].distance /= 2;
        VerifyReport rep = verify_window(light, q, out.results, vo);
        CHECK_FALSE(rep.accepted);
    }
    SUBCASE("tampered aggregate digest") {
        auto vo = out.vo;
        auto& seg = vo.segments[skip_at];
        seg.att_digest.a = store.group()->add(seg.att_digest.a, store.group()->generator());
        VerifyReport rep = verify_window(light, q, out.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::root_mismatch);
    }
    SUBCASE("tampered sibling hash") {
        auto vo = out.vo;
        auto& seg = vo.segments[skip_at];
        if (!seg.sibling_hashes.empty()) {
            seg.sibling_hashes[0].second.d[0] ^= 1;
            VerifyReport rep = verify_window(light, q, out.results, vo);
            CHECK_FALSE(rep.accepted);
            CHECK(rep.reason == reject::root_mismatch);
        }
    }
}

TEST_CASE("batched VO tampering is rejected") {
    ChainFixture fx = rental_chain(Construction::acc2, IndexKind::intra);
    ChainStore store = fx.open();
    QueryEngine engine(store);
    QuerySpec q = parse_query_text(R"(window=[0,10] bool="Benz")");
    QueryOptions opt;
    opt.batch = true;
    QueryOutput out = engine.query_window(engine.compile(q), opt);
    REQUIRE(out.vo.batches.size() == 1);
    LightView light = fx.light();
    REQUIRE(verify_window(light, q, out.results, out.vo).accepted);

    SUBCASE("swapped member digest") {
        auto vo = out.vo;
        VoEntry* ref = find_entry(*vo.segments[0].tree, VoEntry::mismatch_leaf_ref);
        if (!ref) ref = find_entry(*vo.segments[0].tree, VoEntry::mismatch_subtree_ref);
        REQUIRE(ref);
        ref->att_digest.a = store.group()->add(ref->att_digest.a, store.group()->generator());
        VerifyReport rep = verify_window(light, q, out.results, vo);
        CHECK_FALSE(rep.accepted);
    }
    SUBCASE("tampered aggregate proof") {
        auto vo = out.vo;
        vo.batches[0].agg_proof.pi =
            store.group()->add(vo.batches[0].agg_proof.pi, store.group()->generator());
        VerifyReport rep = verify_window(light, q, out.results, vo);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reason == reject::bad_proof);
    }
}
