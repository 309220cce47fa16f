#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "testutil.hpp"
#include "vchain/chain.hpp"
#include "vchain/errors.hpp"

using namespace vchain;
namespace fs = std::filesystem;

namespace {

TemporalObject obj(uint64_t t, std::vector<std::string> kws, std::vector<uint64_t> v = {}) {
    TemporalObject o;
    o.t = t;
    o.v = std::move(v);
    o.w = std::move(kws);
    o.canonicalize();
    return o;
}

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) : path("/tmp/vchain-test-" + name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ChainConfig keyword_config(Construction c, IndexKind kind, uint8_t skiplen = 5) {
    ChainConfig cfg;
    cfg.construction = c;
    cfg.index_kind = kind;
    cfg.skiplen = skiplen;
    cfg.widths = {};
    cfg.block_policy = "count:4";
    return cfg;
}

PublicParams test_params(Construction c, uint64_t q = 4096, uint64_t seed = 77) {
    Drbg rng(seed);
    return keygen(c, q, PairingGroup::preset("ss256"), rng);
}

// the four-object rental block used across the walkthrough tests
std::vector<TemporalObject> rental_objects() {
    return {obj(1, {"Sedan", "Benz"}), obj(2, {"Sedan", "Audi"}), obj(3, {"Van", "Benz"}),
            obj(4, {"Van", "BMW"})};
}

} // namespace

TEST_CASE("intra index reproduces the worked four-object block") {
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::intra);
    cfg.capacity = pk.capacity;
    cfg.salt = {1};
    ElementEncoder enc = cfg.encoder(pk.group);
    std::vector<IntraNode> nodes;
    int32_t root = build_intra_index(rental_objects(), cfg.widths, enc, pk, nodes);
    // 4 leaves + 2 internal + root
    REQUIRE(nodes.size() == 7);
    // o1 pairs with o2 (Jaccard 1/3 via "Sedan"), o3 with o4 (via "Van")
    const IntraNode& n5 = nodes[4];
    CHECK(n5.left == 0);
    CHECK(n5.right == 1);
    const IntraNode& n6 = nodes[5];
    CHECK(n6.left == 2);
    CHECK(n6.right == 3);
    const IntraNode& nr = nodes[root];
    CHECK(nr.left == 4);
    CHECK(nr.right == 5);
    // non-leaf fields by independent recomputation
    CHECK(n5.w == AttrMultiset::sum(nodes[0].w, nodes[1].w));
    AccValue d5 = setup(enc.encode_multiset(n5.w), pk);
    CHECK(d5 == n5.att_digest);
    CHECK(node_commitment(nodes[0].hash, nodes[1].hash, d5.serialize(*pk.group)) == n5.hash);
}

TEST_CASE("single object block: root is the leaf") {
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::intra);
    cfg.capacity = pk.capacity;
    cfg.salt = {1};
    ElementEncoder enc = cfg.encoder(pk.group);
    std::vector<IntraNode> nodes;
    std::vector<TemporalObject> objs{obj(5, {"solo"})};
    int32_t root = build_intra_index(objs, cfg.widths, enc, pk, nodes);
    REQUIRE(nodes.size() == 1);
    CHECK(root == 0);
    CHECK(nodes[0].is_leaf());
    CHECK_THROWS_AS(build_intra_index({}, cfg.widths, enc, pk, nodes), BuildError);
}

TEST_CASE("random blocks satisfy the recomputation oracle") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        CAPTURE(construction_name(c));
        PublicParams pk = test_params(c);
        ChainConfig cfg = keyword_config(c, IndexKind::intra);
        cfg.capacity = pk.capacity;
        cfg.widths = {4};
        cfg.salt = {2};
        ElementEncoder enc = cfg.encoder(pk.group);
        Drbg rng(31);
        std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
        std::vector<TemporalObject> objs;
        for (int i = 0; i < 8; ++i) {
            std::vector<std::string> kws;
            for (size_t j = rng.below(3) + 1; j-- > 0;) kws.push_back(vocab[rng.below(6)]);
            objs.push_back(obj(i, kws, {rng.below(16)}));
        }
        std::vector<IntraNode> nodes;
        int32_t root = build_intra_index(objs, cfg.widths, enc, pk, nodes);
        for (const auto& n : nodes) {
            if (n.is_leaf()) {
                const auto& o = objs[n.object_index];
                CHECK(n.w == transform_object(o, cfg.widths));
                CHECK(n.att_digest == setup(enc.encode_multiset(n.w), pk));
                CHECK(n.hash == leaf_commitment(o.id(), n.att_digest.serialize(*pk.group)));
            } else {
                CHECK(n.w == AttrMultiset::sum(nodes[n.left].w, nodes[n.right].w));
                CHECK(n.att_digest == setup(enc.encode_multiset(n.w), pk));
                CHECK(n.hash == node_commitment(nodes[n.left].hash, nodes[n.right].hash,
                                                n.att_digest.serialize(*pk.group)));
            }
        }
        // multiset sum vs support union never changes match/mismatch outcomes
        ElementEncoder e2 = cfg.encoder(pk.group);
        for (const auto& n : nodes) {
            if (n.is_leaf()) continue;
            AttrMultiset uni = AttrMultiset::support_union(nodes[n.left].w, nodes[n.right].w);
            Multiset enc_sum = e2.encode_multiset(n.w);
            Multiset enc_uni = e2.encode_multiset(uni);
            Multiset probe = e2.encode_multiset(transform_object(objs[0], cfg.widths));
            CHECK(enc_sum.support_intersects(probe) == enc_uni.support_intersects(probe));
        }
        (void)root;
    }
}

TEST_CASE("chain writer produces a consistent, auditable chain") {
    TempDir dir("writer");
    PublicParams pk = test_params(Construction::acc2);
    ChainConfig cfg = keyword_config(Construction::acc2, IndexKind::both, 2);
    cfg.capacity = pk.capacity;
    std::vector<TemporalObject> objs;
    std::vector<std::string> vocab{"p", "q", "r"};
    Drbg rng(32);
    for (int i = 0; i < 6; ++i) objs.push_back(obj(10 + i, {vocab[rng.below(3)]}));
    cfg.block_policy = "count:1";
    build_chain(dir.path, cfg, pk, objs);

    ChainStore store = ChainStore::open(dir.path);
    REQUIRE(store.block_count() == 7); // genesis + 6
    CHECK(validate_headers(store.headers(), store.config().difficulty).ok);
    for (uint64_t h = 0; h < store.block_count(); ++h) {
        auto bad = audit_block(store, h);
        if (bad) {
            CAPTURE(h);
            CAPTURE(*bad);
            CHECK_FALSE(bad);
        }
    }
    // skip entry of block 6: L_2 covers blocks 4 and 5; W equals their sum
    Block b6 = store.load_block(6);
    REQUIRE(b6.skips.size() == 2); // k=2 and k=4
    CHECK(b6.skips[0].distance == 2);
    Block b4 = store.load_block(4);
    Block b5 = store.load_block(5);
    CHECK(b6.skips[0].w ==
          AttrMultiset::sum(b4.nodes[b4.root].w, b5.nodes[b5.root].w));
    CHECK(b6.skips[1].distance == 4);
    // genesis has an empty skip list
    Block b0 = store.load_block(0);
    CHECK(b0.skips.empty());
    CHECK(b0.header.skip_list_root == empty_hash());
    // block 1 has no entries either (would cross genesis), block 2 gets k=2
    CHECK(store.load_block(1).skips.empty());
    CHECK(store.load_block(2).skips.size() == 1);
}

TEST_CASE("rebuilding from the same input is byte-identical") {
    TempDir d1("det1");
    TempDir d2("det2");
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::both, 2);
    cfg.capacity = pk.capacity;
    cfg.widths = {4};
    cfg.block_policy = "count:2";
    std::vector<TemporalObject> objs;
    for (int i = 0; i < 6; ++i) objs.push_back(obj(i, {i % 2 ? "x" : "y"}, {uint64_t(i % 16)}));
    build_chain(d1.path, cfg, pk, objs);
    build_chain(d2.path, cfg, pk, objs);
    for (const auto& name : {"chain.meta", "headers.bin", "params.bin", "blocks/00000001.blk",
                             "blocks/00000003.blk"}) {
        CAPTURE(name);
        CHECK(read_file(d1.path + "/" + name) == read_file(d2.path + "/" + name));
    }
}

TEST_CASE("header validation flags mutations") {
    TempDir dir("hv");
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::intra);
    cfg.capacity = pk.capacity;
    cfg.block_policy = "count:1";
    std::vector<TemporalObject> objs;
    for (int i = 0; i < 4; ++i) objs.push_back(obj(i, {"k"}));
    build_chain(dir.path, cfg, pk, objs);
    auto headers = ChainStore::open(dir.path).headers();
    CHECK(validate_headers(headers, 0).ok);
    CHECK(validate_headers({}, 0).ok); // vacuous
    auto mutated = headers;
    mutated[2].merkle_root.d[5] ^= 1;
    auto v = validate_headers(mutated, 0);
    CHECK_FALSE(v.ok);
    CHECK(v.first_bad == 3); // linkage break detected at the next header
    auto ts_bad = headers;
    ts_bad[3].ts = 0;
    CHECK_FALSE(validate_headers(ts_bad, 0).ok);
}

TEST_CASE("toy proof of work") {
    TempDir dir("pow");
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::intra);
    cfg.capacity = pk.capacity;
    cfg.difficulty = 6;
    cfg.block_policy = "count:2";
    std::vector<TemporalObject> objs{obj(1, {"a"}), obj(2, {"b"})};
    build_chain(dir.path, cfg, pk, objs);
    ChainStore store = ChainStore::open(dir.path);
    for (const auto& h : store.headers()) CHECK(meets_difficulty(h.block_hash(), 6));
    CHECK(validate_headers(store.headers(), 6).ok);
    // difficulty 0 accepts nonce 0
    CHECK(meets_difficulty(sha256("anything"), 0));
}

TEST_CASE("stored block mutations are detected by the audit") {
    TempDir dir("fuzz");
    PublicParams pk = test_params(Construction::acc2);
    ChainConfig cfg = keyword_config(Construction::acc2, IndexKind::both, 2);
    cfg.capacity = pk.capacity;
    cfg.widths = {4};
    cfg.block_policy = "count:2";
    std::vector<TemporalObject> objs;
    Drbg rng(33);
    for (int i = 0; i < 10; ++i)
        objs.push_back(obj(i, {i % 3 ? "m" : "n"}, {rng.below(16)}));
    build_chain(dir.path, cfg, pk, objs);
    ChainStore store = ChainStore::open(dir.path);

    Drbg fuzz(34);
    int detected = 0, trials = 0;
    for (int t = 0; t < 40; ++t) {
        uint64_t h = fuzz.below(store.block_count() - 1) + 1;
        std::string path = dir.path + "/blocks/0000000" + std::to_string(h) + ".blk";
        Bytes orig = read_file(path);
        Bytes mut = orig;
        size_t pos = 13 + fuzz.below(mut.size() - 13); // keep magic/version/height intact
        mut[pos] ^= static_cast<uint8_t>(1 << fuzz.below(8));
        write_file_atomic(path, mut);
        ++trials;
        bool caught = false;
        try {
            caught = audit_block(store, h).has_value();
        } catch (const Error&) {
            caught = true; // parse failures count as detection
        }
        if (caught) ++detected;
        write_file_atomic(path, orig);
    }
    CHECK(detected == trials);
}

TEST_CASE("window candidate computation from headers") {
    TempDir dir("wc");
    PublicParams pk = test_params(Construction::acc1);
    ChainConfig cfg = keyword_config(Construction::acc1, IndexKind::intra);
    cfg.capacity = pk.capacity;
    cfg.block_policy = "count:2";
    // blocks: [10,11] [12,13] [14,15] -> headers ts 0,11,13,15
    std::vector<TemporalObject> objs;
    for (int i = 0; i < 6; ++i) objs.push_back(obj(10 + i, {"z"}));
    build_chain(dir.path, cfg, pk, objs);
    auto headers = ChainStore::open(dir.path).headers();
    REQUIRE(headers.size() == 4);

    // headers alone bound block b's objects to [ts(b-1), ts(b)], so both
    // window-edge neighbors count as straddling candidates
    auto w = window_candidates(headers, 12, 13);
    REQUIRE(w.any);
    CHECK(w.lo == 2);
    CHECK(w.hi == 3);
    CHECK_FALSE(w.is_full(2)); // objects could be as old as ts(1)=11 < 12
    CHECK_FALSE(w.is_full(3));

    w = window_candidates(headers, 11, 14);
    REQUIRE(w.any);
    CHECK(w.lo == 1);
    CHECK(w.hi == 3);
    CHECK(w.is_full(2));
    CHECK_FALSE(w.is_full(3)); // straddles the upper edge

    w = window_candidates(headers, 100, 200);
    CHECK_FALSE(w.any);

    w = window_candidates(headers, 0, 9);
    REQUIRE(w.any); // genesis (ts 0) plus block 1, whose lower bound is ts(0)=0
    CHECK(w.lo == 0);
    CHECK(w.hi == 1);
    CHECK(w.is_full(0));
    CHECK_FALSE(w.is_full(1));
}

TEST_CASE("jsonl ingestion") {
    ChainConfig cfg;
    cfg.widths = {4, 4};
    auto objs = parse_jsonl(
        "{\"t\": 100, \"v\": [3, 7], \"w\": [\"coffee\", \"shop\"]}\n"
        "\n"
        "{\"t\": 101, \"v\": [1.2, 6.9], \"w\": []}\n",
        cfg);
    REQUIRE(objs.size() == 2);
    CHECK(objs[0].t == 100);
    CHECK(objs[0].v == std::vector<uint64_t>{3, 7});
    CHECK(objs[1].v == std::vector<uint64_t>{1, 7}); // rounded
    CHECK_THROWS_WITH_AS(parse_jsonl("{\"t\": 1, \"v\": [1, 2]}\nnot json\n", cfg),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_jsonl("{\"t\": 5, \"v\": [1]}\n", cfg),
                         doctest::Contains("line 1"), ParseError);
}

TEST_CASE("block cut policies") {
    std::vector<TemporalObject> objs;
    for (int i = 0; i < 7; ++i) objs.push_back(obj(100 + i * 10, {"k"}));
    auto by_count = cut_blocks(objs, "count:3");
    REQUIRE(by_count.size() == 3);
    CHECK(by_count[0].size() == 3);
    CHECK(by_count[2].size() == 1);
    auto by_time = cut_blocks(objs, "interval:30"); // buckets of 30s
    REQUIRE(by_time.size() == 3);
    CHECK(by_time[0].size() == 2); // t=100,110 share floor(t/30)=3
    CHECK(by_time[1].size() == 3); // t=120,130,140
    CHECK_THROWS_AS(cut_blocks(objs, "weird:1"), ParseError);
    CHECK_THROWS_AS(cut_blocks(objs, "count:0"), ParseError);
}

TEST_CASE("quantization clamps and maps") {
    ChainConfig cfg;
    cfg.widths = {4};
    cfg.quant_offset = {100.0};
    cfg.quant_scale = {0.5};
    CHECK(cfg.quantize(100.0, 0) == 0);
    CHECK(cfg.quantize(104.0, 0) == 2);
    CHECK(cfg.quantize(1e9, 0) == 15);  // clamped to 2^4-1
    CHECK(cfg.quantize(-1e9, 0) == 0);  // clamped to 0
    CHECK(cfg.quantize(std::numeric_limits<double>::infinity(), 0) == 15);
    auto [a, b] = cfg.quantize_range(100, 110, 0);
    CHECK(a == 0);
    CHECK(b == 5);
}

TEST_CASE("chain config text round trip") {
    ChainConfig cfg;
    cfg.construction = Construction::acc2;
    cfg.capacity = 65536;
    cfg.curve = "ss256";
    cfg.widths = {8, 6};
    cfg.quant_offset = {1.5, 0};
    cfg.quant_scale = {2, 1};
    cfg.salt = {0xde, 0xad};
    cfg.index_kind = IndexKind::both;
    cfg.skiplen = 3;
    cfg.difficulty = 2;
    cfg.block_policy = "interval:30";
    cfg.reserved_keywords = {"alpha", "beta"};
    ChainConfig back = ChainConfig::from_text(cfg.to_text());
    CHECK(back.to_text() == cfg.to_text());
    CHECK(back.capacity == 65536);
    CHECK(back.widths == std::vector<uint8_t>{8, 6});
    CHECK(back.reserved_keywords == std::vector<std::string>{"alpha", "beta"});
}
