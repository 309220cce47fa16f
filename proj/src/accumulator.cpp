#include "vchain/accumulator.hpp"

#include <thread>

#include "vchain/errors.hpp"
#include "vchain/modpoly.hpp"

namespace vchain {

const char* construction_name(Construction c) {
    return c == Construction::acc1 ? "acc1" : "acc2";
}

Construction construction_from_name(const std::string& name) {
    if (name == "acc1") return Construction::acc1;
    if (name == "acc2") return Construction::acc2;
    throw ParseError("unknown construction: " + name);
}

// --- Multiset ----------------------------------------------------------------

void Multiset::add(const Big& value, uint32_t count, const std::string& origin) {
    if (count == 0) return;
    auto& e = m_[value];
    e.count += count;
    if (e.origin.empty()) e.origin = origin;
}

void Multiset::add_multiset(const Multiset& other) {
    for (const auto& [v, e] : other.m_) add(v, e.count, e.origin);
}

uint64_t Multiset::total_count() const {
    uint64_t n = 0;
    for (const auto& [v, e] : m_) n += e.count;
    return n;
}

bool Multiset::support_intersects(const Multiset& other) const {
    const Multiset* small = this;
    const Multiset* large = &other;
    if (small->m_.size() > large->m_.size()) std::swap(small, large);
    for (const auto& [v, e] : small->m_)
        if (large->contains(v)) return true;
    return false;
}

bool Multiset::operator==(const Multiset& other) const {
    if (m_.size() != other.m_.size()) return false;
    auto it = other.m_.begin();
    for (const auto& [v, e] : m_) {
        if (it->first != v || it->second.count != e.count) return false;
        ++it;
    }
    return true;
}

Multiset Multiset::sum(const Multiset& a, const Multiset& b) {
    Multiset out = a;
    out.add_multiset(b);
    return out;
}

// --- PublicParams ---------------------------------------------------------------

const G1Point& PublicParams::power(uint64_t index) const {
    if (construction == Construction::acc1) {
        if (index >= powers_lo.size()) throw CapacityError("power index exceeds capacity");
        return powers_lo[index];
    }
    if (index < capacity) return powers_lo[index];
    if (index == capacity) throw LogicError("the q-th power is absent by construction");
    if (index > 2 * capacity - 2) throw CapacityError("power index exceeds capacity");
    return powers_hi[index - capacity - 1];
}

uint64_t PublicParams::max_power_index() const {
    return construction == Construction::acc1 ? capacity : 2 * capacity - 2;
}

static constexpr char kParamsMagic[4] = {'V', 'C', 'P', 'K'};

Bytes PublicParams::serialize() const {
    ByteWriter w;
    w.raw(BytesView(reinterpret_cast<const uint8_t*>(kParamsMagic), 4));
    w.u8(1); // version
    w.u8(static_cast<uint8_t>(construction));
    w.u64(capacity);
    w.str(group->name());
    w.u32(static_cast<uint32_t>(powers_lo.size()));
    for (const auto& p : powers_lo) group->compress_into(w, p);
    if (construction == Construction::acc2) {
        w.u8(0xFF); // explicit gap marker for the absent q-th power
        w.u32(static_cast<uint32_t>(powers_hi.size()));
        for (const auto& p : powers_hi) group->compress_into(w, p);
    }
    return std::move(w.out);
}

PublicParams PublicParams::deserialize(BytesView data) {
    ByteReader r(data);
    Bytes magic = r.raw(4);
    if (std::memcmp(magic.data(), kParamsMagic, 4) != 0) throw ParseError("bad params magic");
    if (r.u8() != 1) throw ParseError("unsupported params version");
    PublicParams pk;
    uint8_t c = r.u8();
    if (c != 1 && c != 2) throw ParseError("bad construction tag");
    pk.construction = static_cast<Construction>(c);
    pk.capacity = r.u64();
    pk.group = PairingGroup::preset(r.str());
    uint32_t nlo = r.u32();
    pk.powers_lo.reserve(nlo);
    for (uint32_t i = 0; i < nlo; ++i) pk.powers_lo.push_back(pk.group->decompress(r, false));
    if (pk.construction == Construction::acc2) {
        if (r.u8() != 0xFF) throw ParseError("missing acc2 gap marker");
        uint32_t nhi = r.u32();
        pk.powers_hi.reserve(nhi);
        for (uint32_t i = 0; i < nhi; ++i) pk.powers_hi.push_back(pk.group->decompress(r, false));
    }
    if (!r.done()) throw ParseError("trailing bytes in params file");
    uint64_t q = pk.capacity;
    bool size_ok = pk.construction == Construction::acc1
                       ? pk.powers_lo.size() == q + 1
                       : (pk.powers_lo.size() == q && pk.powers_hi.size() == q - 2);
    if (!size_ok) throw ParseError("params power count does not match capacity");
    if (pk.powers_lo.empty() || !(pk.powers_lo[0] == pk.group->generator()))
        throw ParseError("params do not start at the group generator");
    return pk;
}

bool PublicParams::spot_check(Drbg& rng, int rounds) const {
    uint64_t top = max_power_index();
    for (int i = 0; i < rounds; ++i) {
        uint64_t a, b, c, d;
        for (;;) {
            a = rng.below(top + 1);
            b = rng.below(top + 1);
            c = rng.below(std::min(a + b, top) + 1);
            d = a + b - c;
            if (d > top) continue;
            if (construction == Construction::acc2) {
                uint64_t q = capacity;
                if (a == q || b == q || c == q || d == q) continue;
            }
            break;
        }
        if (!(group->pairing(power(a), power(b)) == group->pairing(power(c), power(d))))
            return false;
        uint64_t probe = rng.below(top + 1);
        if (construction == Construction::acc2 && probe == capacity) probe = 0;
        if (!group->in_subgroup(power(probe))) return false;
    }
    return true;
}

// --- keygen -----------------------------------------------------------------------

static PublicParams keygen_impl(Construction c, uint64_t q, const GroupPtr& group, Drbg& rng,
                                size_t memory_budget, Big* secret_out) {
    if (!group) throw SetupError("keygen: no group");
    if (q < 2) throw SetupError("keygen: capacity must be at least 2");
    uint64_t npoints = c == Construction::acc1 ? q + 1 : 2 * q - 2;
    size_t approx = static_cast<size_t>(npoints) * (2 * group->fp_bytes() + 64);
    if (approx > memory_budget)
        throw SetupError("keygen: capacity exceeds configured memory budget");

    Big s = group->random_scalar(rng);

    // scalar powers s^i mod r, then independent fixed-base multiplications
    uint64_t top = c == Construction::acc1 ? q : 2 * q - 2;
    Modring zr(group->order());
    std::vector<Big> exps(top + 1);
    exps[0] = 1;
    for (uint64_t i = 1; i <= top; ++i) exps[i] = zr.mul(exps[i - 1], s);

    std::vector<G1Point> pts(top + 1);
    unsigned nthreads = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    if (top + 1 < 64) nthreads = 1;
    std::vector<std::thread> workers;
    std::atomic<uint64_t> next{0};
    auto work = [&]() {
        for (;;) {
            uint64_t i = next.fetch_add(64);
            if (i > top) return;
            uint64_t end = std::min(i + 64, top + 1);
            for (; i < end; ++i) pts[i] = group->mul_gen(exps[i]);
        }
    };
    for (unsigned t = 1; t < nthreads; ++t) workers.emplace_back(work);
    work();
    for (auto& t : workers) t.join();

    PublicParams pk;
    pk.construction = c;
    pk.capacity = q;
    pk.group = group;
    if (c == Construction::acc1) {
        pk.powers_lo = std::move(pts);
    } else {
        pk.powers_lo.assign(pts.begin(), pts.begin() + q);
        pk.powers_hi.assign(pts.begin() + q + 1, pts.end());
    }
    if (secret_out)
        *secret_out = s;
    // discard s: the scalar destructs with this frame (trusted-setup contract)
    return pk;
}

PublicParams keygen(Construction c, uint64_t capacity, const GroupPtr& group, Drbg& rng,
                    size_t memory_budget) {
    return keygen_impl(c, capacity, group, rng, memory_budget, nullptr);
}

TransparentParams keygen_transparent(Construction c, uint64_t capacity, const GroupPtr& group,
                                     Drbg& rng, size_t memory_budget) {
    TransparentParams tp;
    tp.params = keygen_impl(c, capacity, group, rng, memory_budget, &tp.secret);
    return tp;
}

// --- AccValue / DisjointProof ---------------------------------------------------------

bool AccValue::operator==(const AccValue& o) const {
    return construction == o.construction && a == o.a && b == o.b;
}

void AccValue::serialize_into(ByteWriter& w, const PairingGroup& g) const {
    w.u8(static_cast<uint8_t>(construction));
    g.compress_into(w, a);
    if (construction == Construction::acc2) g.compress_into(w, b);
}

AccValue AccValue::deserialize(ByteReader& r, const PairingGroup& g, bool check_subgroup) {
    AccValue v;
    uint8_t c = r.u8();
    if (c != 1 && c != 2) throw ParseError("bad accumulator value tag");
    v.construction = static_cast<Construction>(c);
    v.a = g.decompress(r, check_subgroup);
    if (v.construction == Construction::acc2) v.b = g.decompress(r, check_subgroup);
    return v;
}

Bytes AccValue::serialize(const PairingGroup& g) const {
    ByteWriter w;
    serialize_into(w, g);
    return std::move(w.out);
}

void DisjointProof::serialize_into(ByteWriter& w, const PairingGroup& g) const {
    w.u8(static_cast<uint8_t>(construction));
    if (construction == Construction::acc1) {
        g.compress_into(w, f1);
        g.compress_into(w, f2);
    } else {
        g.compress_into(w, pi);
    }
}

DisjointProof DisjointProof::deserialize(ByteReader& r, const PairingGroup& g,
                                         bool check_subgroup) {
    DisjointProof p;
    uint8_t c = r.u8();
    if (c != 1 && c != 2) throw ParseError("bad proof tag");
    p.construction = static_cast<Construction>(c);
    if (p.construction == Construction::acc1) {
        p.f1 = g.decompress(r, check_subgroup);
        p.f2 = g.decompress(r, check_subgroup);
    } else {
        p.pi = g.decompress(r, check_subgroup);
    }
    return p;
}

// --- operations --------------------------------------------------------------------

static void check_acc1_element(const Big& v, const PairingGroup& g) {
    if (v <= 0 || v >= g.order()) throw CapacityError("acc1 element out of field range");
}

static void check_acc2_element(const Big& v, uint64_t q) {
    if (v <= 0 || v >= Big(static_cast<unsigned long>(q)))
        throw CapacityError("acc2 element outside [1, q-1]");
}

/// Characteristic polynomial prod (X + v_i)^count over Z_r.
static Poly acc1_poly(const Multiset& x, const Modring& zr) {
    std::vector<Big> roots;
    roots.reserve(x.total_count());
    for (const auto& [v, e] : x.entries())
        for (uint32_t i = 0; i < e.count; ++i) roots.push_back(v);
    return poly_from_shifted_roots(zr, roots);
}

static G1Point exponent_poly_in_g(const Poly& p, const PublicParams& pk) {
    std::vector<G1Point> pts;
    std::vector<Big> coefs;
    pts.reserve(p.size());
    coefs.reserve(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0) continue;
        pts.push_back(pk.power(i));
        coefs.push_back(p[i]);
    }
    return pk.group->multiexp(pts, coefs);
}

AccValue setup(const Multiset& x, const PublicParams& pk) {
    AccValue out;
    out.construction = pk.construction;
    const auto& g = *pk.group;
    if (pk.construction == Construction::acc1) {
        if (x.total_count() > pk.capacity)
            throw CapacityError("multiset larger than acc1 capacity");
        for (const auto& [v, e] : x.entries()) check_acc1_element(v, g);
        Modring zr(g.order());
        Poly p = acc1_poly(x, zr);
        out.a = exponent_poly_in_g(p, pk);
        return out;
    }
    // acc2: d_A = prod g^{s^{x_i}}, d_B = prod g^{s^{q-x_i}} (with multiplicity)
    std::vector<G1Point> pa, pb;
    std::vector<Big> ca, cb;
    for (const auto& [v, e] : x.entries()) {
        check_acc2_element(v, pk.capacity);
        uint64_t xi = v.get_ui();
        pa.push_back(pk.power(xi));
        ca.push_back(Big(e.count));
        pb.push_back(pk.power(pk.capacity - xi));
        cb.push_back(Big(e.count));
    }
    out.a = g.multiexp(pa, ca);
    out.b = g.multiexp(pb, cb);
    return out;
}

DisjointProof prove_disjoint(const Multiset& x1, const Multiset& x2, const PublicParams& pk) {
    // fail fast before any algebra
    if (x1.support_intersects(x2)) throw NotDisjointError("multisets share an element");
    DisjointProof proof;
    proof.construction = pk.construction;
    proof.rhs = x2;
    const auto& g = *pk.group;
    if (pk.construction == Construction::acc1) {
        if (x1.total_count() > pk.capacity || x2.total_count() > pk.capacity)
            throw CapacityError("multiset larger than acc1 capacity");
        Modring zr(g.order());
        Poly p1 = acc1_poly(x1, zr);
        Poly p2 = acc1_poly(x2, zr);
        ExtGcd e = poly_ext_gcd(zr, p1, p2);
        if (!poly_is_one(e.g))
            throw NotDisjointError("polynomials are not coprime");
        // p1*u + p2*v = 1; proof = (g^{u(s)}, g^{v(s)})
        proof.f1 = exponent_poly_in_g(e.u, pk);
        proof.f2 = exponent_poly_in_g(e.v, pk);
        return proof;
    }
    // acc2: pi = g^{A(X1) B(X2)}; exponent indices x_i + q - x_j never hit q
    // exactly because the supports are disjoint.
    std::map<uint64_t, Big> coef;
    for (const auto& [v1, e1] : x1.entries()) {
        check_acc2_element(v1, pk.capacity);
        uint64_t xi = v1.get_ui();
        for (const auto& [v2, e2] : x2.entries()) {
            check_acc2_element(v2, pk.capacity);
            uint64_t xj = v2.get_ui();
            uint64_t idx = xi + pk.capacity - xj;
            if (idx == pk.capacity)
                throw NotDisjointError("acc2 proof requires the absent q-th power");
            coef[idx] += Big(static_cast<unsigned long>(e1.count)) * e2.count;
        }
    }
    std::vector<G1Point> pts;
    std::vector<Big> cs;
    pts.reserve(coef.size());
    cs.reserve(coef.size());
    for (const auto& [idx, c] : coef) {
        pts.push_back(pk.power(idx));
        cs.push_back(c);
    }
    proof.pi = g.multiexp(pts, cs);
    return proof;
}

bool verify_disjoint(const AccValue& a1, const AccValue& a2, const DisjointProof& proof,
                     const PublicParams& pk, PairingCounter* counter) {
    if (a1.construction != pk.construction || a2.construction != pk.construction ||
        proof.construction != pk.construction)
        throw LogicError("construction mismatch between values, proof, and params");
    if (counter) counter->disjoint_checks += 1;
    const auto& g = *pk.group;
    if (pk.construction == Construction::acc1) {
        // e(acc(X1), F1) * e(acc(X2), F2) == e(g, g)
        std::pair<G1Point, G1Point> pairs[] = {{a1.a, proof.f1}, {a2.a, proof.f2}};
        return g.pairing_product(pairs, counter) == g.pairing_of_generators();
    }
    // e(d_A(X1), d_B(X2)) == e(pi, g)
    std::pair<G1Point, G1Point> pairs[] = {{a1.a, a2.b}, {g.neg(proof.pi), g.generator()}};
    return g.pairing_product(pairs, counter).is_one();
}

AccValue sum(std::span<const AccValue> values, const PairingGroup& g) {
    if (values.empty()) throw AggregationError("sum of zero accumulator values");
    for (const auto& v : values)
        if (v.construction != Construction::acc2)
            throw UnsupportedError("sum is only defined for construction 2");
    AccValue out = values[0];
    for (size_t i = 1; i < values.size(); ++i) {
        out.a = g.add(out.a, values[i].a);
        out.b = g.add(out.b, values[i].b);
    }
    return out;
}

DisjointProof proof_sum(std::span<const DisjointProof> proofs, const PairingGroup& g) {
    if (proofs.empty()) throw AggregationError("proof_sum of zero proofs");
    for (const auto& p : proofs)
        if (p.construction != Construction::acc2)
            throw UnsupportedError("proof_sum is only defined for construction 2");
    for (size_t i = 1; i < proofs.size(); ++i)
        if (!(proofs[i].rhs == proofs[0].rhs))
            throw AggregationError("proof_sum requires identical query-side multisets");
    DisjointProof out = proofs[0];
    for (size_t i = 1; i < proofs.size(); ++i) out.pi = g.add(out.pi, proofs[i].pi);
    return out;
}

} // namespace vchain
