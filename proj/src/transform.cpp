#include "vchain/transform.hpp"

#include <algorithm>

#include "vchain/errors.hpp"

namespace vchain {

AttrElement AttrElement::make_keyword(std::string text) {
    AttrElement e;
    e.kind = keyword;
    e.kw = std::move(text);
    return e;
}

AttrElement AttrElement::make_prefix(uint8_t dim, uint8_t len, uint64_t bits) {
    AttrElement e;
    e.kind = prefix;
    e.dim = dim;
    e.len = len;
    e.bits = bits;
    return e;
}

Bytes AttrElement::tagged_bytes() const {
    ByteWriter w;
    w.u8(kind);
    if (kind == keyword) {
        w.raw(BytesView(reinterpret_cast<const uint8_t*>(kw.data()), kw.size()));
    } else {
        w.u8(dim);
        w.u8(len);
        for (int i = 7; i >= 0; --i) w.u8((bits >> (8 * i)) & 0xff);
    }
    return std::move(w.out);
}

std::string AttrElement::display(uint8_t width) const {
    if (kind == keyword) return "\"" + kw + "\"";
    std::string s;
    for (int i = len - 1; i >= 0; --i) s.push_back((bits >> i) & 1 ? '1' : '0');
    if (len == 0 || (width != 0 && len < width)) s.push_back('*');
    s += "_" + std::to_string(dim + 1);
    return s;
}

void AttrElement::serialize_into(ByteWriter& w) const {
    w.u8(kind);
    if (kind == keyword) {
        w.str(kw);
    } else {
        w.u8(dim);
        w.u8(len);
        w.u64(bits);
    }
}

AttrElement AttrElement::deserialize(ByteReader& r) {
    AttrElement e;
    uint8_t k = r.u8();
    if (k != keyword && k != prefix) throw ParseError("bad attribute element kind");
    e.kind = static_cast<Kind>(k);
    if (e.kind == keyword) {
        e.kw = r.str();
    } else {
        e.dim = r.u8();
        e.len = r.u8();
        e.bits = r.u64();
    }
    return e;
}

bool is_wildcard(const AttrElement& e, uint8_t width) {
    return e.kind == AttrElement::prefix && e.len < width;
}

// --- AttrMultiset ------------------------------------------------------------

void AttrMultiset::add(const AttrElement& e, uint32_t count) {
    if (count) m_[e] += count;
}

void AttrMultiset::add_all(const AttrMultiset& other) {
    for (const auto& [e, c] : other.m_) m_[e] += c;
}

uint64_t AttrMultiset::total_count() const {
    uint64_t n = 0;
    for (const auto& [e, c] : m_) n += c;
    return n;
}

AttrMultiset AttrMultiset::sum(const AttrMultiset& a, const AttrMultiset& b) {
    AttrMultiset out = a;
    out.add_all(b);
    return out;
}

AttrMultiset AttrMultiset::support_union(const AttrMultiset& a, const AttrMultiset& b) {
    AttrMultiset out;
    for (const auto& [e, c] : a.m_) out.m_[e] = 1;
    for (const auto& [e, c] : b.m_) out.m_[e] = 1;
    return out;
}

size_t AttrMultiset::support_intersection_size(const AttrMultiset& a, const AttrMultiset& b) {
    const AttrMultiset* small = &a;
    const AttrMultiset* large = &b;
    if (small->m_.size() > large->m_.size()) std::swap(small, large);
    size_t n = 0;
    for (const auto& [e, c] : small->m_)
        if (large->contains(e)) ++n;
    return n;
}

size_t AttrMultiset::support_union_size(const AttrMultiset& a, const AttrMultiset& b) {
    return a.m_.size() + b.m_.size() - support_intersection_size(a, b);
}

void AttrMultiset::serialize_into(ByteWriter& w) const {
    w.u32(static_cast<uint32_t>(m_.size()));
    for (const auto& [e, c] : m_) {
        e.serialize_into(w);
        w.u32(c);
    }
}

AttrMultiset AttrMultiset::deserialize(ByteReader& r) {
    AttrMultiset m;
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        AttrElement e = AttrElement::deserialize(r);
        uint32_t c = r.u32();
        m.add(e, c);
    }
    return m;
}

// --- Clause ---------------------------------------------------------------------

void Clause::normalize() {
    std::sort(elems.begin(), elems.end());
    elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
}

std::string Clause::display(const std::vector<uint8_t>& widths) const {
    std::string s = "{";
    for (size_t i = 0; i < elems.size(); ++i) {
        if (i) s += " v ";
        uint8_t w = elems[i].kind == AttrElement::prefix && elems[i].dim < widths.size()
                        ? widths[elems[i].dim]
                        : 0;
        s += elems[i].display(w);
    }
    return s + "}";
}

void Clause::serialize_into(ByteWriter& w) const {
    w.u16(static_cast<uint16_t>(elems.size()));
    for (const auto& e : elems) e.serialize_into(w);
}

Clause Clause::deserialize(ByteReader& r) {
    Clause c;
    uint16_t n = r.u16();
    c.elems.reserve(n);
    for (uint16_t i = 0; i < n; ++i) c.elems.push_back(AttrElement::deserialize(r));
    return c;
}

// --- ElementEncoder ------------------------------------------------------------------

ElementEncoder::ElementEncoder(Construction c, uint64_t capacity, GroupPtr group, Bytes salt)
    : construction_(c), capacity_(capacity), group_(std::move(group)), salt_(std::move(salt)) {}

Big ElementEncoder::encode(const AttrElement& e) const {
    ByteWriter w;
    w.raw(salt_);
    w.raw(e.tagged_bytes());
    HashDigest h = sha256(w.out);
    if (construction_ == Construction::acc1)
        return group_->scalar_from_bytes(BytesView(h.d.data(), h.d.size()));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | h.d[i];
    return Big(static_cast<unsigned long>(v % (capacity_ - 1) + 1));
}

Multiset ElementEncoder::encode_multiset(const AttrMultiset& m) const {
    Multiset out;
    for (const auto& [e, c] : m.entries()) out.add(encode(e), c, e.display());
    return out;
}

Multiset ElementEncoder::encode_clause(const Clause& c) const {
    Multiset out;
    for (const auto& e : c.elems) out.add(encode(e), 1, e.display());
    return out;
}

// --- CompiledCondition -----------------------------------------------------------------

bool CompiledCondition::matches(const Multiset& w) const {
    for (const auto& c : clauses)
        if (c.encoded.support_disjoint(w)) return false;
    return true;
}

std::optional<size_t> CompiledCondition::try_find_mismatch_clause(const Multiset& w) const {
    std::optional<size_t> best;
    for (size_t i = 0; i < clauses.size(); ++i) {
        if (!clauses[i].encoded.support_disjoint(w)) continue;
        if (!best || clauses[i].logical.elems.size() < clauses[*best].logical.elems.size())
            best = i;
    }
    return best;
}

size_t CompiledCondition::find_mismatch_clause(const Multiset& w) const {
    auto best = try_find_mismatch_clause(w);
    if (!best) throw LogicError("no mismatch clause: the multiset matches the condition");
    return *best;
}

// --- numeric transformation ----------------------------------------------------------------

std::vector<AttrElement> trans_value(uint64_t v, uint8_t width, uint8_t dim) {
    if (width == 0 || width > 63) throw DomainError("width must be in [1, 63]");
    if (v >> width) throw DomainError("value out of range for width");
    std::vector<AttrElement> out;
    out.reserve(width);
    for (uint8_t len = 1; len <= width; ++len)
        out.push_back(AttrElement::make_prefix(dim, len, v >> (width - len)));
    return out;
}

static void cover_rec(uint64_t lo, uint64_t hi, uint64_t node_lo, uint64_t node_hi, uint8_t len,
                      uint64_t bits, uint8_t dim, std::vector<AttrElement>& out) {
    if (lo <= node_lo && node_hi <= hi) {
        out.push_back(AttrElement::make_prefix(dim, len, bits));
        return;
    }
    uint64_t mid = node_lo + (node_hi - node_lo) / 2;
    if (lo <= mid) cover_rec(lo, std::min(hi, mid), node_lo, mid, len + 1, bits << 1, dim, out);
    if (hi > mid)
        cover_rec(std::max(lo, mid + 1), hi, mid + 1, node_hi, len + 1, bits << 1 | 1, dim, out);
}

std::vector<AttrElement> range_cover(uint64_t alpha, uint64_t beta, uint8_t width, uint8_t dim) {
    if (width == 0 || width > 63) throw DomainError("width must be in [1, 63]");
    if (alpha > beta) throw DomainError("inverted range");
    uint64_t max = (uint64_t(1) << width) - 1;
    if (beta > max) throw DomainError("range end out of width");
    std::vector<AttrElement> out;
    cover_rec(alpha, beta, 0, max, 0, 0, dim, out);
    return out;
}

bool cover_contains(const std::vector<AttrElement>& cover, uint64_t v, uint8_t width) {
    for (const auto& e : cover) {
        if (e.kind != AttrElement::prefix) continue;
        if (e.len > width) continue;
        if (v >> (width - e.len) == e.bits) return true;
    }
    return false;
}

CompiledCondition compile_condition(const std::vector<std::pair<uint64_t, uint64_t>>& ranges,
                                    const CnfCondition& bool_cond,
                                    const std::vector<uint8_t>& widths,
                                    const ElementEncoder& enc) {
    if (ranges.size() > widths.size()) throw DomainError("more range dimensions than configured");
    CompiledCondition out;
    for (size_t d = 0; d < ranges.size(); ++d) {
        auto [alpha, beta] = ranges[d];
        uint64_t max = (uint64_t(1) << widths[d]) - 1;
        if (alpha == 0 && beta >= max) continue; // vacuous: covers the whole dimension
        Clause c;
        c.elems = range_cover(alpha, beta, widths[d], static_cast<uint8_t>(d));
        c.normalize();
        out.clauses.push_back(CompiledClause{c, enc.encode_clause(c)});
    }
    out.range_clause_count = out.clauses.size();
    for (const auto& cl : bool_cond.clauses) {
        if (cl.elems.empty()) throw DomainError("empty clause in CNF condition");
        Clause c = cl;
        c.normalize();
        out.clauses.push_back(CompiledClause{c, enc.encode_clause(c)});
    }
    return out;
}

} // namespace vchain
