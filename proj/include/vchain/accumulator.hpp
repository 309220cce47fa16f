#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "vchain/bytes.hpp"
#include "vchain/group.hpp"

namespace vchain {

enum class Construction : uint8_t {
    acc1 = 1, // q-SDH style: acc(X) = g^{prod (x_i + s)}, Bezout disjoint proofs
    acc2 = 2, // q-DHE style: acc(X) = (g^{sum s^x_i}, g^{sum s^{q-x_i}}), aggregatable
};

const char* construction_name(Construction c);
Construction construction_from_name(const std::string& name);

/// Multiset over encoded accumulator elements. Values live in [1, r-1]
/// for Acc1 and in [1, q-1] for Acc2; the origin string records the
/// attribute the value encodes (diagnostics only, not part of equality).
class Multiset {
public:
    struct Entry {
        uint32_t count = 0;
        std::string origin;
    };

    void add(const Big& value, uint32_t count = 1, const std::string& origin = {});
    void add_multiset(const Multiset& other);

    bool empty() const { return m_.empty(); }
    size_t support_size() const { return m_.size(); }
    uint64_t total_count() const;
    bool contains(const Big& value) const { return m_.count(value) != 0; }
    bool support_intersects(const Multiset& other) const;
    bool support_disjoint(const Multiset& other) const { return !support_intersects(other); }
    /// Equal values and multiplicities.
    bool operator==(const Multiset& other) const;

    const std::map<Big, Entry>& entries() const { return m_; }

    static Multiset sum(const Multiset& a, const Multiset& b);

private:
    std::map<Big, Entry> m_;
};

/// Public accumulator parameters. Immutable and shareable across threads.
/// The secret exponent never leaves keygen (see keygen_transparent for the
/// test-only exception).
struct PublicParams {
    Construction construction = Construction::acc1;
    uint64_t capacity = 0; // q
    GroupPtr group;
    // acc1: powers[i] = g^{s^i} for i in 0..q  (powers_hi unused)
    // acc2: powers_lo[i] = g^{s^i} for i in 0..q-1,
    //       powers_hi[i] = g^{s^{q+1+i}} for i in 0..q-3 (the q-th power is absent)
    std::vector<G1Point> powers_lo;
    std::vector<G1Point> powers_hi;

    const G1Point& power(uint64_t index) const;
    uint64_t max_power_index() const;

    Bytes serialize() const;
    static PublicParams deserialize(BytesView data);
    /// Randomized self-check: pairing consistency e(P_a,P_b)=e(P_c,P_d)
    /// for a+b=c+d on sampled index pairs, plus subgroup spot checks.
    bool spot_check(Drbg& rng, int rounds = 4) const;
};

struct AccValue {
    Construction construction = Construction::acc1;
    G1Point a; // acc1 value, or acc2 d_A
    G1Point b; // acc2 d_B only

    bool operator==(const AccValue& o) const;
    void serialize_into(ByteWriter& w, const PairingGroup& g) const;
    static AccValue deserialize(ByteReader& r, const PairingGroup& g, bool check_subgroup);
    Bytes serialize(const PairingGroup& g) const;
};

struct DisjointProof {
    Construction construction = Construction::acc1;
    G1Point f1, f2; // acc1 pair (F1*, F2*)
    G1Point pi;     // acc2 single element
    /// Query-side multiset the proof was generated against; required by
    /// proof_sum's precondition check. Not part of the wire encoding.
    Multiset rhs;

    void serialize_into(ByteWriter& w, const PairingGroup& g) const;
    static DisjointProof deserialize(ByteReader& r, const PairingGroup& g, bool check_subgroup);
};

inline constexpr size_t kDefaultKeygenMemoryBudget = size_t(1) << 31; // 2 GiB

/// Trusted-setup ceremony: samples the secret exponent, publishes the power
/// sequence, and discards the secret. Deterministic given the rng seed.
PublicParams keygen(Construction c, uint64_t capacity, const GroupPtr& group, Drbg& rng,
                    size_t memory_budget = kDefaultKeygenMemoryBudget);

/// INSECURE, test ceremonies only: same as keygen but retains the secret so
/// property tests can recompute accumulator values directly in the exponent.
struct TransparentParams {
    PublicParams params;
    Big secret;
};
TransparentParams keygen_transparent(Construction c, uint64_t capacity, const GroupPtr& group,
                                     Drbg& rng,
                                     size_t memory_budget = kDefaultKeygenMemoryBudget);

/// Digest of a multiset. Deterministic; computable from public powers only.
AccValue setup(const Multiset& x, const PublicParams& pk);

/// Proof that supports of x1 and x2 do not intersect.
DisjointProof prove_disjoint(const Multiset& x1, const Multiset& x2, const PublicParams& pk);

bool verify_disjoint(const AccValue& a1, const AccValue& a2, const DisjointProof& proof,
                     const PublicParams& pk, PairingCounter* counter = nullptr);

/// Acc2 only: digest of the multiset sum, computed from the digests alone.
AccValue sum(std::span<const AccValue> values, const PairingGroup& g);

/// Acc2 only: aggregate proofs sharing one query-side multiset.
DisjointProof proof_sum(std::span<const DisjointProof> proofs, const PairingGroup& g);

} // namespace vchain
