#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vchain/accumulator.hpp"
#include "vchain/bytes.hpp"

namespace vchain {

/// One attribute element before accumulator encoding: either a keyword or
/// a tagged binary prefix of a numeric dimension. A prefix with len == 0
/// is the root wildcard covering the whole dimension (it only ever appears
/// inside range covers, never in object multisets or CNF clauses).
struct AttrElement {
    enum Kind : uint8_t { keyword = 0, prefix = 1 };

    uint8_t kind = keyword;
    uint8_t dim = 0;   // prefix only
    uint8_t len = 0;   // prefix only: number of leading bits
    uint64_t bits = 0; // prefix only: value of those bits
    std::string kw;    // keyword only

    static AttrElement make_keyword(std::string text);
    static AttrElement make_prefix(uint8_t dim, uint8_t len, uint64_t bits);

    /// Canonical byte tag; the accumulator encoding hashes these bytes.
    /// The dimension tag is a one-byte prefix so encodings never collide
    /// across dimensions.
    Bytes tagged_bytes() const;
    std::string display(uint8_t width = 0) const;

    auto operator<=>(const AttrElement& o) const {
        if (auto c = kind <=> o.kind; c != 0) return c;
        if (kind == keyword) return kw <=> o.kw;
        if (auto c = dim <=> o.dim; c != 0) return c;
        if (auto c = len <=> o.len; c != 0) return c;
        return bits <=> o.bits;
    }
    bool operator==(const AttrElement& o) const { return (*this <=> o) == 0; }

    void serialize_into(ByteWriter& w) const;
    static AttrElement deserialize(ByteReader& r);
};

bool is_wildcard(const AttrElement& e, uint8_t width);

/// Multiset of logical attribute elements (an object's W', a tree node's
/// W_n, a skip entry's W_Lk). Ordered map for canonical serialization.
class AttrMultiset {
public:
    void add(const AttrElement& e, uint32_t count = 1);
    void add_all(const AttrMultiset& other);

    bool empty() const { return m_.empty(); }
    size_t support_size() const { return m_.size(); }
    uint64_t total_count() const;
    bool contains(const AttrElement& e) const { return m_.count(e) != 0; }
    const std::map<AttrElement, uint32_t>& entries() const { return m_; }
    bool operator==(const AttrMultiset&) const = default;

    static AttrMultiset sum(const AttrMultiset& a, const AttrMultiset& b);
    /// Support-only union (for the union-vs-sum safety check).
    static AttrMultiset support_union(const AttrMultiset& a, const AttrMultiset& b);
    static size_t support_intersection_size(const AttrMultiset& a, const AttrMultiset& b);
    static size_t support_union_size(const AttrMultiset& a, const AttrMultiset& b);

    void serialize_into(ByteWriter& w) const;
    static AttrMultiset deserialize(ByteReader& r);

private:
    std::map<AttrElement, uint32_t> m_;
};

/// One OR-clause (equivalence set) of a CNF condition.
struct Clause {
    std::vector<AttrElement> elems; // sorted, unique

    void normalize();
    auto operator<=>(const Clause&) const = default;
    std::string display(const std::vector<uint8_t>& widths) const;
    void serialize_into(ByteWriter& w) const;
    static Clause deserialize(ByteReader& r);
};

/// AND over clauses, OR within a clause. The empty condition matches
/// everything (empty conjunction).
struct CnfCondition {
    std::vector<Clause> clauses;

    bool operator==(const CnfCondition&) const = default;
};

/// Maps logical elements into the accumulator universe. Acc1 hashes into
/// the scalar field; Acc2 hashes into [1, q-1], where collisions between
/// distinct attributes are possible (chain salt re-rolls mitigate; see
/// chain builder).
class ElementEncoder {
public:
    ElementEncoder(Construction c, uint64_t capacity, GroupPtr group, Bytes salt);

    Big encode(const AttrElement& e) const;
    Multiset encode_multiset(const AttrMultiset& m) const;
    Multiset encode_clause(const Clause& c) const;
    Construction construction() const { return construction_; }
    const Bytes& salt() const { return salt_; }

private:
    Construction construction_;
    uint64_t capacity_;
    GroupPtr group_;
    Bytes salt_;
};

/// Clause with its encoded element set, ready for matching and proving.
struct CompiledClause {
    Clause logical;
    Multiset encoded;
};

struct CompiledCondition {
    std::vector<CompiledClause> clauses;
    /// clauses[0 .. range_clause_count) derive from range covers; the rest
    /// are the Boolean condition's clauses.
    size_t range_clause_count = 0;

    bool matches(const Multiset& w) const;
    /// Index of the mismatch clause to prove against: smallest cardinality
    /// among encoded-disjoint clauses, ties broken by clause order.
    /// Throws LogicError if every clause intersects w.
    size_t find_mismatch_clause(const Multiset& w) const;
    /// Like find_mismatch_clause but empty when none qualifies.
    std::optional<size_t> try_find_mismatch_clause(const Multiset& w) const;
};

// --- numeric transformation -------------------------------------------------------

/// All binary prefixes of v's width-bit form, tagged with the dimension.
std::vector<AttrElement> trans_value(uint64_t v, uint8_t width, uint8_t dim);

/// The unique minimal set of binary-tree nodes exactly covering
/// [alpha, beta] within a width-bit dimension. The full range yields the
/// root wildcard (len 0).
std::vector<AttrElement> range_cover(uint64_t alpha, uint64_t beta, uint8_t width, uint8_t dim);

/// Does any cover node prefix v? (Semantic membership check; handles the
/// root wildcard.)
bool cover_contains(const std::vector<AttrElement>& cover, uint64_t v, uint8_t width);

CompiledCondition compile_condition(const std::vector<std::pair<uint64_t, uint64_t>>& ranges,
                                    const CnfCondition& bool_cond,
                                    const std::vector<uint8_t>& widths,
                                    const ElementEncoder& enc);

} // namespace vchain
