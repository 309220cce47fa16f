#include "vchain/chain.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "vchain/errors.hpp"
#include "vchain/modpoly.hpp"

namespace fs = std::filesystem;

namespace vchain {

const char* index_kind_name(IndexKind k) {
    switch (k) {
        case IndexKind::nil: return "nil";
        case IndexKind::intra: return "intra";
        case IndexKind::both: return "both";
    }
    throw LogicError("bad index kind");
}

IndexKind index_kind_from_name(const std::string& s) {
    if (s == "nil") return IndexKind::nil;
    if (s == "intra") return IndexKind::intra;
    if (s == "both") return IndexKind::both;
    throw ParseError("unknown index kind: " + s);
}

// --- ChainConfig -------------------------------------------------------------

uint64_t ChainConfig::quantize(double x, size_t dim) const {
    if (dim >= widths.size()) throw DomainError("dimension out of range");
    double off = dim < quant_offset.size() ? quant_offset[dim] : 0.0;
    double sc = dim < quant_scale.size() ? quant_scale[dim] : 1.0;
    uint64_t max = (uint64_t(1) << widths[dim]) - 1;
    if (std::isinf(x)) return x > 0 ? max : 0;
    double q = std::llround((x - off) * sc);
    if (q < 0) return 0;
    if (q > static_cast<double>(max)) return max;
    return static_cast<uint64_t>(q);
}

std::pair<uint64_t, uint64_t> ChainConfig::quantize_range(double lo, double hi, size_t dim) const {
    uint64_t a = quantize(lo, dim);
    uint64_t b = quantize(hi, dim);
    if (a > b) throw DomainError("inverted range after quantization");
    return {a, b};
}

ElementEncoder ChainConfig::encoder(const GroupPtr& g) const {
    return ElementEncoder(construction, capacity, g, salt);
}

std::string ChainConfig::to_text() const {
    std::ostringstream o;
    o << "version=1\n";
    o << "construction=" << construction_name(construction) << "\n";
    o << "capacity=" << capacity << "\n";
    o << "curve=" << curve << "\n";
    o << "widths=";
    for (size_t i = 0; i < widths.size(); ++i) o << (i ? "," : "") << int(widths[i]);
    o << "\n";
    auto dlist = [&](const char* key, const std::vector<double>& v) {
        if (v.empty()) return;
        o << key << "=";
        for (size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
        o << "\n";
    };
    dlist("quant_offset", quant_offset);
    dlist("quant_scale", quant_scale);
    o << "salt=" << to_hex(salt) << "\n";
    o << "index=" << index_kind_name(index_kind) << "\n";
    o << "skiplen=" << int(skiplen) << "\n";
    o << "difficulty=" << int(difficulty) << "\n";
    o << "block_policy=" << block_policy << "\n";
    if (!reserved_keywords.empty()) {
        o << "reserved_keywords=";
        for (size_t i = 0; i < reserved_keywords.size(); ++i)
            o << (i ? "," : "") << reserved_keywords[i];
        o << "\n";
    }
    return o.str();
}

ChainConfig ChainConfig::from_text(const std::string& text) {
    ChainConfig c;
    c.skiplen = 0;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, sep)) out.push_back(cur);
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("chain.meta: bad line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "version") {
            if (val != "1") throw ParseError("chain.meta: unsupported version " + val);
        } else if (key == "construction") {
            c.construction = construction_from_name(val);
        } else if (key == "capacity") {
            c.capacity = std::stoull(val);
        } else if (key == "curve") {
            c.curve = val;
        } else if (key == "widths") {
            for (const auto& t : split(val, ','))
                c.widths.push_back(static_cast<uint8_t>(std::stoul(t)));
        } else if (key == "quant_offset") {
            for (const auto& t : split(val, ',')) c.quant_offset.push_back(std::stod(t));
        } else if (key == "quant_scale") {
            for (const auto& t : split(val, ',')) c.quant_scale.push_back(std::stod(t));
        } else if (key == "salt") {
            c.salt = from_hex(val);
        } else if (key == "index") {
            c.index_kind = index_kind_from_name(val);
        } else if (key == "skiplen") {
            c.skiplen = static_cast<uint8_t>(std::stoul(val));
        } else if (key == "difficulty") {
            c.difficulty = static_cast<uint8_t>(std::stoul(val));
        } else if (key == "block_policy") {
            c.block_policy = val;
        } else if (key == "reserved_keywords") {
            c.reserved_keywords = split(val, ',');
        } else {
            throw ParseError("chain.meta: unknown key " + key);
        }
    }
    return c;
}

// --- commitment rules -----------------------------------------------------------

Bytes BlockHeader::bytes() const {
    ByteWriter w;
    w.digest(prev_bk_hash);
    w.u64(ts);
    w.u64(cons_proof);
    w.digest(merkle_root);
    w.digest(skip_list_root);
    return std::move(w.out);
}

HashDigest leaf_commitment(const HashDigest& object_id, const Bytes& att_digest_bytes) {
    ByteWriter w;
    w.digest(object_id);
    w.raw(att_digest_bytes);
    return sha256(w.out);
}

HashDigest inner_child_hash(const HashDigest& left, const HashDigest& right) {
    ByteWriter w;
    w.digest(left);
    w.digest(right);
    return sha256(w.out);
}

HashDigest node_commitment_from_inner(const HashDigest& inner, const Bytes& att_digest_bytes) {
    ByteWriter w;
    w.digest(inner);
    w.raw(att_digest_bytes);
    return sha256(w.out);
}

HashDigest node_commitment(const HashDigest& left, const HashDigest& right,
                           const Bytes& att_digest_bytes) {
    return node_commitment_from_inner(inner_child_hash(left, right), att_digest_bytes);
}

HashDigest flat_root(const std::vector<std::pair<HashDigest, Bytes>>& leaves) {
    ByteWriter w;
    for (const auto& [id, digest] : leaves) {
        w.digest(id);
        w.raw(digest);
    }
    return sha256(w.out);
}

HashDigest skip_entry_hash(const HashDigest& pre_skipped, const Bytes& att_digest_bytes) {
    ByteWriter w;
    w.digest(pre_skipped);
    w.raw(att_digest_bytes);
    return sha256(w.out);
}

HashDigest skip_list_root_hash(const std::vector<HashDigest>& entry_hashes) {
    ByteWriter w;
    for (const auto& h : entry_hashes) w.digest(h);
    return sha256(w.out);
}

HashDigest pre_skipped_hash(const std::vector<HashDigest>& newest_first) {
    ByteWriter w;
    for (const auto& h : newest_first) w.digest(h);
    return sha256(w.out);
}

bool meets_difficulty(const HashDigest& h, uint8_t bits) {
    for (uint8_t i = 0; i < bits; ++i)
        if (h.d[i / 8] >> (7 - i % 8) & 1) return false;
    return true;
}

// --- block serialization --------------------------------------------------------------

static constexpr char kBlockMagic[4] = {'V', 'C', 'B', 'K'};

Bytes Block::serialize(const PairingGroup& g) const {
    ByteWriter w;
    w.raw(BytesView(reinterpret_cast<const uint8_t*>(kBlockMagic), 4));
    w.u8(1);
    w.u64(height);
    w.raw(header.bytes());
    w.u32(static_cast<uint32_t>(objects.size()));
    for (const auto& o : objects) o.serialize_into(w);
    w.u32(static_cast<uint32_t>(nodes.size()));
    for (const auto& n : nodes) {
        w.digest(n.hash);
        n.w.serialize_into(w);
        n.att_digest.serialize_into(w, g);
        w.u32(static_cast<uint32_t>(n.left));
        w.u32(static_cast<uint32_t>(n.right));
        w.u32(static_cast<uint32_t>(n.object_index));
    }
    w.u32(static_cast<uint32_t>(root));
    w.u32(static_cast<uint32_t>(leaf_digests.size()));
    for (const auto& d : leaf_digests) d.serialize_into(w, g);
    w.u32(static_cast<uint32_t>(skips.size()));
    for (const auto& s : skips) {
        w.u32(s.distance);
        w.digest(s.pre_skipped);
        s.w.serialize_into(w);
        s.att_digest.serialize_into(w, g);
        w.digest(s.entry_hash);
    }
    return std::move(w.out);
}

Block Block::deserialize(BytesView data, const PairingGroup& g) {
    ByteReader r(data);
    Bytes magic = r.raw(4);
    if (std::memcmp(magic.data(), kBlockMagic, 4) != 0) throw ParseError("bad block magic");
    if (r.u8() != 1) throw ParseError("unsupported block version");
    Block b;
    b.height = r.u64();
    b.header.prev_bk_hash = r.digest();
    b.header.ts = r.u64();
    b.header.cons_proof = r.u64();
    b.header.merkle_root = r.digest();
    b.header.skip_list_root = r.digest();
    uint32_t nobj = r.u32();
    b.objects.reserve(nobj);
    for (uint32_t i = 0; i < nobj; ++i) b.objects.push_back(TemporalObject::deserialize(r));
    uint32_t nnodes = r.u32();
    b.nodes.reserve(nnodes);
    for (uint32_t i = 0; i < nnodes; ++i) {
        IntraNode n;
        n.hash = r.digest();
        n.w = AttrMultiset::deserialize(r);
        n.att_digest = AccValue::deserialize(r, g, false);
        n.left = static_cast<int32_t>(r.u32());
        n.right = static_cast<int32_t>(r.u32());
        n.object_index = static_cast<int32_t>(r.u32());
        b.nodes.push_back(std::move(n));
    }
    b.root = static_cast<int32_t>(r.u32());
    uint32_t nld = r.u32();
    for (uint32_t i = 0; i < nld; ++i) b.leaf_digests.push_back(AccValue::deserialize(r, g, false));
    uint32_t nskips = r.u32();
    for (uint32_t i = 0; i < nskips; ++i) {
        SkipEntryData s;
        s.distance = r.u32();
        s.pre_skipped = r.digest();
        s.w = AttrMultiset::deserialize(r);
        s.att_digest = AccValue::deserialize(r, g, false);
        s.entry_hash = r.digest();
        b.skips.push_back(std::move(s));
    }
    if (!r.done()) throw ParseError("trailing bytes in block file");
    return b;
}

size_t Block::ads_bytes(const PairingGroup& g) const {
    ByteWriter w;
    for (const auto& n : nodes) {
        w.digest(n.hash);
        n.w.serialize_into(w);
        n.att_digest.serialize_into(w, g);
        w.u32(0);
        w.u32(0);
        w.u32(0);
    }
    for (const auto& d : leaf_digests) d.serialize_into(w, g);
    for (const auto& s : skips) {
        w.u32(s.distance);
        w.digest(s.pre_skipped);
        s.w.serialize_into(w);
        s.att_digest.serialize_into(w, g);
        w.digest(s.entry_hash);
    }
    return w.out.size();
}

// --- intra index construction -----------------------------------------------------------

namespace {

/// Digest helper that multiplies child characteristic polynomials instead
/// of re-expanding from scratch (acc1), and sums child digests (acc2).
struct DigestBuilder {
    const PublicParams& pk;
    Modring zr;
    std::vector<Poly> polys; // per node, acc1 only

    explicit DigestBuilder(const PublicParams& p) : pk(p), zr(p.group->order()) {}

    AccValue leaf(const Multiset& enc_w, size_t node_idx) {
        if (pk.construction == Construction::acc1) grow(node_idx);
        if (pk.construction == Construction::acc1) {
            if (enc_w.total_count() > pk.capacity)
                throw CapacityError("object multiset larger than acc1 capacity");
            std::vector<Big> roots;
            for (const auto& [v, e] : enc_w.entries())
                for (uint32_t i = 0; i < e.count; ++i) roots.push_back(v);
            polys[node_idx] = poly_from_shifted_roots(zr, roots);
            return value_from_poly(polys[node_idx]);
        }
        return setup(enc_w, pk);
    }

    AccValue parent(const AccValue& left, const AccValue& right, size_t li, size_t ri,
                    size_t node_idx) {
        if (pk.construction == Construction::acc2) {
            AccValue pair[] = {left, right};
            return sum(pair, *pk.group);
        }
        grow(node_idx);
        polys[node_idx] = poly_mul(zr, polys[li], polys[ri]);
        if (polys[node_idx].size() > pk.capacity + 1)
            throw CapacityError("tree multiset larger than acc1 capacity");
        return value_from_poly(polys[node_idx]);
    }

    AccValue value_from_poly(const Poly& p) {
        std::vector<G1Point> pts;
        std::vector<Big> cs;
        for (size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0) continue;
            pts.push_back(pk.power(i));
            cs.push_back(p[i]);
        }
        AccValue v;
        v.construction = Construction::acc1;
        v.a = pk.group->multiexp(pts, cs);
        return v;
    }

    void grow(size_t idx) {
        if (polys.size() <= idx) polys.resize(idx + 1);
    }
};

} // namespace

int32_t build_intra_index(const std::vector<TemporalObject>& objects,
                          const std::vector<uint8_t>& widths, const ElementEncoder& enc,
                          const PublicParams& pk, std::vector<IntraNode>& out_nodes) {
    if (objects.empty()) throw BuildError("cannot build an intra index over zero objects");
    DigestBuilder dig(pk);
    std::vector<int32_t> level;
    out_nodes.clear();
    out_nodes.reserve(objects.size() * 2);
    for (size_t i = 0; i < objects.size(); ++i) {
        IntraNode leaf;
        leaf.object_index = static_cast<int32_t>(i);
        leaf.w = transform_object(objects[i], widths);
        Multiset ew = enc.encode_multiset(leaf.w);
        leaf.att_digest = dig.leaf(ew, out_nodes.size());
        leaf.hash = leaf_commitment(objects[i].id(), leaf.att_digest.serialize(*pk.group));
        out_nodes.push_back(std::move(leaf));
        level.push_back(static_cast<int32_t>(out_nodes.size() - 1));
    }
    while (level.size() > 1) {
        std::vector<int32_t> next;
        std::vector<int32_t> pool = level;
        while (pool.size() > 1) {
            // the unpaired node with the largest |W| (first wins ties) ...
            size_t best = 0;
            for (size_t i = 1; i < pool.size(); ++i)
                if (out_nodes[pool[i]].w.total_count() > out_nodes[pool[best]].w.total_count())
                    best = i;
            int32_t li = pool[best];
            pool.erase(pool.begin() + best);
            // ... pairs with the maximum-Jaccard node (support similarity)
            size_t mate = 0;
            uint64_t best_num = 0, best_den = 1;
            bool have = false;
            for (size_t i = 0; i < pool.size(); ++i) {
                uint64_t inter = AttrMultiset::support_intersection_size(out_nodes[li].w,
                                                                         out_nodes[pool[i]].w);
                uint64_t uni =
                    AttrMultiset::support_union_size(out_nodes[li].w, out_nodes[pool[i]].w);
                if (uni == 0) uni = 1; // both supports empty: similarity 0
                if (!have || inter * best_den > best_num * uni) {
                    best_num = inter;
                    best_den = uni;
                    mate = i;
                    have = true;
                }
            }
            int32_t ri = pool[mate];
            pool.erase(pool.begin() + mate);
            IntraNode parent;
            parent.left = li;
            parent.right = ri;
            parent.w = AttrMultiset::sum(out_nodes[li].w, out_nodes[ri].w);
            size_t idx = out_nodes.size();
            parent.att_digest =
                dig.parent(out_nodes[li].att_digest, out_nodes[ri].att_digest, li, ri, idx);
            parent.hash = node_commitment(out_nodes[li].hash, out_nodes[ri].hash,
                                          parent.att_digest.serialize(*pk.group));
            out_nodes.push_back(std::move(parent));
            next.push_back(static_cast<int32_t>(idx));
        }
        // leftover odd node carries to the next level, after the new nodes
        for (int32_t rest : pool) next.push_back(rest);
        level = std::move(next);
    }
    return level[0];
}

// --- persistence ------------------------------------------------------------------

static constexpr char kHeadersMagic[4] = {'V', 'C', 'H', 'D'};

static std::string block_path(const std::string& dir, uint64_t height) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08llu.blk", static_cast<unsigned long long>(height));
    return dir + "/blocks/" + buf;
}

static void write_headers_file(const std::string& dir, const std::vector<BlockHeader>& headers) {
    ByteWriter w;
    w.raw(BytesView(reinterpret_cast<const uint8_t*>(kHeadersMagic), 4));
    w.u8(1);
    w.u64(headers.size());
    for (const auto& h : headers) w.raw(h.bytes());
    write_file_atomic(dir + "/headers.bin", w.out);
}

static std::vector<BlockHeader> read_headers_file(const std::string& dir) {
    Bytes data = read_file(dir + "/headers.bin");
    ByteReader r(data);
    Bytes magic = r.raw(4);
    if (std::memcmp(magic.data(), kHeadersMagic, 4) != 0) throw ParseError("bad headers magic");
    if (r.u8() != 1) throw ParseError("unsupported headers version");
    uint64_t n = r.u64();
    std::vector<BlockHeader> out;
    out.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        BlockHeader h;
        h.prev_bk_hash = r.digest();
        h.ts = r.u64();
        h.cons_proof = r.u64();
        h.merkle_root = r.digest();
        h.skip_list_root = r.digest();
        out.push_back(h);
    }
    return out;
}

ChainStore ChainStore::open(const std::string& dir) {
    ChainStore s;
    s.dir_ = dir;
    Bytes meta = read_file(dir + "/chain.meta");
    s.cfg_ = ChainConfig::from_text(std::string(meta.begin(), meta.end()));
    s.pk_ = PublicParams::deserialize(read_file(dir + "/params.bin"));
    if (s.pk_.construction != s.cfg_.construction || s.pk_.capacity != s.cfg_.capacity)
        throw ParseError("chain.meta and params.bin disagree");
    s.headers_ = read_headers_file(dir);
    if (s.headers_.empty()) throw ParseError("chain has no headers");
    return s;
}

Block ChainStore::load_block(uint64_t height) const {
    if (height >= headers_.size()) throw NotFoundError("block height out of range");
    Bytes data = read_file(block_path(dir_, height));
    Block b = Block::deserialize(data, *pk_.group);
    if (!(b.header == headers_[height])) throw ParseError("block header mismatch with index");
    return b;
}

LightView load_light_view(const std::string& dir) {
    LightView v;
    Bytes meta = read_file(dir + "/chain.meta");
    v.cfg = ChainConfig::from_text(std::string(meta.begin(), meta.end()));
    v.pk = PublicParams::deserialize(read_file(dir + "/params.bin"));
    v.headers = read_headers_file(dir);
    return v;
}

// --- salt selection ----------------------------------------------------------------

/// All elements the chain can ever need to encode injectively: the full
/// prefix universe per dimension (enumerable up to width 12) plus stored
/// and reserved keywords. Larger widths fall back to checking only the
/// elements realized by the data; see README for the completeness caveat.
static std::vector<AttrElement> salt_check_universe(const ChainConfig& cfg,
                                                    const std::vector<TemporalObject>& objects) {
    std::set<AttrElement> universe;
    for (size_t d = 0; d < cfg.widths.size(); ++d) {
        uint8_t w = cfg.widths[d];
        if (w <= 12) {
            for (uint8_t len = 1; len <= w; ++len)
                for (uint64_t bits = 0; bits < (uint64_t(1) << len); ++bits)
                    universe.insert(AttrElement::make_prefix(static_cast<uint8_t>(d), len, bits));
        }
    }
    for (const auto& kw : cfg.reserved_keywords) universe.insert(AttrElement::make_keyword(kw));
    for (const auto& o : objects) {
        for (const auto& kw : o.w) universe.insert(AttrElement::make_keyword(kw));
        for (size_t d = 0; d < o.v.size() && d < cfg.widths.size(); ++d)
            if (cfg.widths[d] > 12)
                for (const auto& e : trans_value(o.v[d], cfg.widths[d], static_cast<uint8_t>(d)))
                    universe.insert(e);
    }
    return {universe.begin(), universe.end()};
}

static bool salt_is_injective(const ChainConfig& cfg, const GroupPtr& g,
                              const std::vector<AttrElement>& universe) {
    ElementEncoder enc = cfg.encoder(g);
    std::set<Big> seen;
    for (const auto& e : universe)
        if (!seen.insert(enc.encode(e)).second) return false;
    return true;
}

/// Picks the first deterministic salt under which the chain's element
/// universe encodes injectively (acc2 can collide at small q; a collision
/// would cost completeness, never soundness).
static Bytes select_salt(const ChainConfig& cfg, const GroupPtr& g,
                         const std::vector<TemporalObject>& objects) {
    auto universe = salt_check_universe(cfg, objects);
    for (uint32_t attempt = 0; attempt < 256; ++attempt) {
        ChainConfig probe = cfg;
        ByteWriter w;
        w.str("vchain-salt");
        w.u32(attempt);
        HashDigest h = sha256(w.out);
        probe.salt.assign(h.d.begin(), h.d.begin() + 16);
        if (salt_is_injective(probe, g, universe)) return probe.salt;
    }
    throw BuildError(
        "no collision-free salt found; raise the accumulator capacity or reduce widths");
}

// --- ChainWriter -------------------------------------------------------------------

ChainWriter::ChainWriter(std::string dir, ChainConfig cfg, PublicParams pk)
    : dir_(std::move(dir)), cfg_(std::move(cfg)), pk_(std::move(pk)) {
    if (cfg_.construction != pk_.construction || (cfg_.capacity && cfg_.capacity != pk_.capacity))
        throw BuildError("chain config does not match accumulator params");
    cfg_.capacity = pk_.capacity;
    cfg_.curve = pk_.group->name();
    if (cfg_.index_kind != IndexKind::both) cfg_.skiplen = 0;
    if (fs::exists(dir_ + "/chain.meta")) throw BuildError("chain directory already initialized");
    fs::create_directories(dir_ + "/blocks");
    write_file_atomic(dir_ + "/params.bin", pk_.serialize());
    // genesis: no objects, empty commitments
    Block genesis;
    genesis.height = 0;
    genesis.header.ts = 0;
    genesis.header.merkle_root = empty_hash();
    genesis.header.skip_list_root = empty_hash();
    mine(genesis.header);
    persist_block(genesis);
    if (cfg_.index_kind == IndexKind::both) {
        AccValue empty_digest = setup(Multiset{}, pk_);
        tail_.push_back(TailEntry{AttrMultiset{}, empty_digest, genesis.header.block_hash()});
    }
}

void ChainWriter::mine(BlockHeader& h) const {
    h.cons_proof = 0;
    while (!meets_difficulty(h.block_hash(), cfg_.difficulty)) ++h.cons_proof;
}

void ChainWriter::persist_block(const Block& b) {
    write_file_atomic(block_path(dir_, b.height), b.serialize(*pk_.group));
    headers_.push_back(b.header);
    write_headers_file(dir_, headers_);
    std::string meta = cfg_.to_text();
    write_file_atomic(dir_ + "/chain.meta",
                      BytesView(reinterpret_cast<const uint8_t*>(meta.data()), meta.size()));
}

const BlockHeader& ChainWriter::append_block(std::vector<TemporalObject> objects) {
    if (objects.empty()) throw BuildError("blocks must contain at least one object");
    for (auto& o : objects) o.canonicalize();
    std::stable_sort(objects.begin(), objects.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
    uint64_t prev_ts = headers_.back().ts;
    if (objects.front().t < prev_ts)
        throw BuildError("object timestamps must not precede the previous block");
    ElementEncoder enc = cfg_.encoder(pk_.group);

    Block b;
    b.height = headers_.size();
    b.objects = std::move(objects);
    AttrMultiset root_w;
    AccValue root_digest;
    if (cfg_.index_kind == IndexKind::nil) {
        std::vector<std::pair<HashDigest, Bytes>> leaves;
        for (const auto& o : b.objects) {
            AttrMultiset w = transform_object(o, cfg_.widths);
            AccValue d = setup(enc.encode_multiset(w), pk_);
            b.leaf_digests.push_back(d);
            leaves.emplace_back(o.id(), d.serialize(*pk_.group));
            root_w.add_all(w);
        }
        b.header.merkle_root = flat_root(leaves);
    } else {
        b.root = build_intra_index(b.objects, cfg_.widths, enc, pk_, b.nodes);
        b.header.merkle_root = b.nodes[b.root].hash;
        root_w = b.nodes[b.root].w;
        root_digest = b.nodes[b.root].att_digest;
    }
    // inter-block skip entries: L_k covers the k blocks ending at the
    // predecessor; entries whose span would cross genesis are omitted
    if (cfg_.index_kind == IndexKind::both) {
        std::vector<HashDigest> entry_hashes;
        for (uint8_t j = 1; j <= cfg_.skiplen; ++j) {
            uint64_t k = uint64_t(1) << j;
            if (tail_.size() < k) break;
            SkipEntryData s;
            s.distance = static_cast<uint32_t>(k);
            std::vector<HashDigest> newest_first;
            for (uint64_t i = 0; i < k; ++i) {
                const TailEntry& te = tail_[tail_.size() - 1 - i];
                newest_first.push_back(te.block_hash);
                s.w.add_all(te.root_w);
            }
            s.pre_skipped = pre_skipped_hash(newest_first);
            if (pk_.construction == Construction::acc2) {
                std::vector<AccValue> digests;
                for (uint64_t i = 0; i < k; ++i)
                    digests.push_back(tail_[tail_.size() - 1 - i].root_digest);
                s.att_digest = sum(digests, *pk_.group);
            } else {
                s.att_digest = setup(enc.encode_multiset(s.w), pk_);
            }
            s.entry_hash = skip_entry_hash(s.pre_skipped, s.att_digest.serialize(*pk_.group));
            entry_hashes.push_back(s.entry_hash);
            b.skips.push_back(std::move(s));
        }
        b.header.skip_list_root = skip_list_root_hash(entry_hashes);
    } else {
        b.header.skip_list_root = empty_hash();
    }
    b.header.prev_bk_hash = headers_.back().block_hash();
    b.header.ts = std::max(prev_ts, b.objects.back().t);
    mine(b.header);
    persist_block(b);

    if (cfg_.index_kind == IndexKind::both) {
        tail_.push_back(TailEntry{std::move(root_w), root_digest, b.header.block_hash()});
        size_t keep = size_t(1) << cfg_.skiplen;
        if (tail_.size() > keep) tail_.erase(tail_.begin(), tail_.end() - keep);
    }
    return headers_.back();
}

std::vector<std::vector<TemporalObject>> cut_blocks(std::vector<TemporalObject> objects,
                                                    const std::string& policy) {
    std::stable_sort(objects.begin(), objects.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
    std::vector<std::vector<TemporalObject>> out;
    auto colon = policy.find(':');
    if (colon == std::string::npos) throw ParseError("bad block policy: " + policy);
    std::string kind = policy.substr(0, colon);
    uint64_t arg = std::stoull(policy.substr(colon + 1));
    if (arg == 0) throw ParseError("block policy argument must be positive");
    if (kind == "count") {
        for (size_t i = 0; i < objects.size(); i += arg)
            out.emplace_back(objects.begin() + i,
                             objects.begin() + std::min(objects.size(), i + arg));
    } else if (kind == "interval") {
        for (const auto& o : objects) {
            if (out.empty() || o.t / arg != out.back().front().t / arg) out.emplace_back();
            out.back().push_back(o);
        }
    } else {
        throw ParseError("unknown block policy: " + kind);
    }
    return out;
}

std::vector<TemporalObject> parse_jsonl(const std::string& text, const ChainConfig& cfg) {
    std::vector<TemporalObject> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            TemporalObject o;
            o.t = j.at("t").get<uint64_t>();
            if (j.contains("v")) {
                if (j["v"].size() != cfg.dims())
                    throw DomainError("expected " + std::to_string(cfg.dims()) +
                                      " numeric values");
                for (size_t d = 0; d < j["v"].size(); ++d)
                    o.v.push_back(cfg.quantize(j["v"][d].get<double>(), d));
            } else if (cfg.dims() != 0) {
                throw DomainError("expected " + std::to_string(cfg.dims()) + " numeric values");
            }
            if (j.contains("w"))
                for (const auto& kw : j["w"]) o.w.push_back(kw.get<std::string>());
            o.canonicalize();
            out.push_back(std::move(o));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DomainError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void build_chain(const std::string& dir, ChainConfig cfg, const PublicParams& pk,
                 std::vector<TemporalObject> objects) {
    if (cfg.salt.empty()) cfg.salt = select_salt(cfg, pk.group, objects);
    auto batches = cut_blocks(std::move(objects), cfg.block_policy);
    ChainWriter writer(dir, std::move(cfg), pk);
    for (auto& batch : batches) writer.append_block(std::move(batch));
}

// --- light-client checks ----------------------------------------------------------------

HeaderValidation validate_headers(const std::vector<BlockHeader>& headers, uint8_t difficulty) {
    HeaderValidation v;
    for (size_t i = 0; i < headers.size(); ++i) {
        std::string reason;
        if (i > 0 && headers[i].prev_bk_hash != headers[i - 1].block_hash())
            reason = "previous-hash linkage broken";
        else if (i > 0 && headers[i].ts < headers[i - 1].ts)
            reason = "timestamps not monotone";
        else if (!meets_difficulty(headers[i].block_hash(), difficulty))
            reason = "consensus proof below difficulty";
        if (!reason.empty()) {
            v.ok = false;
            v.first_bad = i;
            v.reason = reason;
            return v;
        }
    }
    return v;
}

WindowBlocks window_candidates(const std::vector<BlockHeader>& headers, uint64_t ts, uint64_t te) {
    WindowBlocks w;
    if (headers.empty() || ts > te) return w;
    uint64_t n = headers.size();
    // candidates: header[b].ts >= ts and (b == 0 or header[b-1].ts <= te)
    uint64_t lo = n;
    for (uint64_t b = 0; b < n; ++b) {
        if (headers[b].ts >= ts) {
            lo = b;
            break;
        }
    }
    if (lo == n) return w;
    uint64_t hi = 0;
    for (uint64_t b = n; b-- > 0;) {
        if (b == 0 || headers[b - 1].ts <= te) {
            hi = b;
            break;
        }
    }
    if (hi < lo) return w;
    w.any = true;
    w.lo = lo;
    w.hi = hi;
    // fully inside: header[b].ts <= te and (b == 0 or header[b-1].ts >= ts)
    w.full_lo = lo;
    while (w.full_lo <= hi && !(w.full_lo == 0 || headers[w.full_lo - 1].ts >= ts)) ++w.full_lo;
    w.full_hi = hi + 1;
    while (w.full_hi > w.full_lo && !(w.full_hi - 1 <= hi && headers[w.full_hi - 1].ts <= te))
        --w.full_hi;
    if (w.full_hi == w.full_lo) {
        w.full_lo = 1;
        w.full_hi = 0; // none
    } else {
        --w.full_hi;
    }
    return w;
}

std::optional<std::string> audit_block(const ChainStore& store, uint64_t height) {
    const auto& cfg = store.config();
    const auto& pk = store.params();
    ElementEncoder enc = store.encoder();
    Block b;
    try {
        b = store.load_block(height);
    } catch (const Error& e) {
        return std::string("load: ") + e.what();
    }
    const BlockHeader& hdr = store.headers()[height];
    if (height > 0 && hdr.prev_bk_hash != store.headers()[height - 1].block_hash())
        return "prev hash mismatch";
    if (height == 0) {
        if (hdr.merkle_root != empty_hash()) return "genesis merkle root not empty";
        return std::nullopt;
    }
    if (cfg.index_kind == IndexKind::nil) {
        std::vector<std::pair<HashDigest, Bytes>> leaves;
        if (b.leaf_digests.size() != b.objects.size()) return "leaf digest count mismatch";
        for (size_t i = 0; i < b.objects.size(); ++i) {
            AccValue d = setup(enc.encode_multiset(transform_object(b.objects[i], cfg.widths)), pk);
            if (!(d == b.leaf_digests[i])) return "leaf digest " + std::to_string(i) + " wrong";
            leaves.emplace_back(b.objects[i].id(), d.serialize(*pk.group));
        }
        if (flat_root(leaves) != hdr.merkle_root) return "flat merkle root mismatch";
    } else {
        // independently rebuild every node field bottom-up
        if (b.root < 0 || b.nodes.empty()) return "missing intra index";
        for (size_t i = 0; i < b.nodes.size(); ++i) {
            const IntraNode& n = b.nodes[i];
            if (n.is_leaf()) {
                const TemporalObject& o = b.objects[n.object_index];
                AttrMultiset w = transform_object(o, cfg.widths);
                if (!(w == n.w)) return "leaf multiset mismatch at node " + std::to_string(i);
                AccValue d = setup(enc.encode_multiset(w), pk);
                if (!(d == n.att_digest)) return "leaf digest mismatch at node " + std::to_string(i);
                if (leaf_commitment(o.id(), d.serialize(*pk.group)) != n.hash)
                    return "leaf hash mismatch at node " + std::to_string(i);
            } else {
                if (n.left < 0 || n.right < 0 || n.left >= static_cast<int32_t>(i) ||
                    n.right >= static_cast<int32_t>(i))
                    return "bad child links at node " + std::to_string(i);
                AttrMultiset w = AttrMultiset::sum(b.nodes[n.left].w, b.nodes[n.right].w);
                if (!(w == n.w)) return "node multiset mismatch at node " + std::to_string(i);
                AccValue d = setup(enc.encode_multiset(w), pk);
                if (!(d == n.att_digest)) return "node digest mismatch at node " + std::to_string(i);
                if (node_commitment(b.nodes[n.left].hash, b.nodes[n.right].hash,
                                    d.serialize(*pk.group)) != n.hash)
                    return "node hash mismatch at node " + std::to_string(i);
            }
        }
        if (b.nodes[b.root].hash != hdr.merkle_root) return "merkle root mismatch";
    }
    // skip entries: recompute from predecessor blocks and headers
    std::vector<HashDigest> entry_hashes;
    for (const auto& s : b.skips) {
        if (s.distance > height) return "skip span crosses genesis";
        AttrMultiset w;
        std::vector<HashDigest> newest_first;
        for (uint64_t i = 0; i < s.distance; ++i) {
            uint64_t h = height - 1 - i;
            newest_first.push_back(store.headers()[h].block_hash());
            Block pb = store.load_block(h);
            if (cfg.index_kind == IndexKind::nil) {
                for (const auto& o : pb.objects) w.add_all(transform_object(o, cfg.widths));
            } else if (pb.root >= 0) {
                w.add_all(pb.nodes[pb.root].w);
            }
        }
        if (pre_skipped_hash(newest_first) != s.pre_skipped)
            return "skip pre-hash mismatch at k=" + std::to_string(s.distance);
        if (!(w == s.w)) return "skip multiset mismatch at k=" + std::to_string(s.distance);
        AccValue d = setup(enc.encode_multiset(w), pk);
        if (!(d == s.att_digest)) return "skip digest mismatch at k=" + std::to_string(s.distance);
        if (skip_entry_hash(s.pre_skipped, d.serialize(*pk.group)) != s.entry_hash)
            return "skip entry hash mismatch at k=" + std::to_string(s.distance);
        entry_hashes.push_back(s.entry_hash);
    }
    HashDigest root = cfg.index_kind == IndexKind::both ? skip_list_root_hash(entry_hashes)
                                                        : empty_hash();
    if (root != hdr.skip_list_root) return "skip list root mismatch";
    return std::nullopt;
}

} // namespace vchain
