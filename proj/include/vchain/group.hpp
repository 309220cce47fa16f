#pragma once

#include <gmpxx.h>

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vchain/bytes.hpp"
#include "vchain/rng.hpp"

namespace vchain {

/// Affine point on the base curve (or the point at infinity).
struct G1Point {
    Big x;
    Big y;
    bool inf = true;

    bool operator==(const G1Point& o) const {
        return inf == o.inf && (inf || (x == o.x && y == o.y));
    }
};

/// Element of the quadratic extension field, a + b*i with i^2 = -1.
/// Pairing outputs live in the order-r subgroup after final exponentiation.
struct GtElement {
    Big a;
    Big b;

    bool operator==(const GtElement&) const = default;
    bool is_one() const { return a == 1 && b == 0; }
};

/// Counts pairing work for instrumentation (verifier cost reports).
struct PairingCounter {
    uint64_t miller_loops = 0;
    uint64_t final_exps = 0;
    uint64_t disjoint_checks = 0;
};

/// A symmetric (type-1) bilinear group of prime order r.
///
/// Realized as the order-r subgroup of a supersingular curve
/// y^2 = x^3 + x over F_p with p = c*r - 1, p = 3 (mod 4), and the
/// modified Tate pairing e: G x G -> GT in F_{p^2} via the distortion
/// map (x, y) -> (-x, i*y). Embedding degree 2.
///
/// Instances are immutable after construction and safe to share across
/// threads. The concrete curve is a configuration choice; callers refer
/// to presets by name.
class PairingGroup {
public:
    /// Cached, shared preset lookup ("ss256" test-grade, "ss1024" default).
    static std::shared_ptr<const PairingGroup> preset(const std::string& name);
    static std::vector<std::string> preset_names();

    const std::string& name() const { return name_; }
    const Big& field_prime() const { return p_; }
    const Big& order() const { return r_; }
    const G1Point& generator() const { return gen_; }
    size_t fp_bytes() const { return fp_bytes_; }
    size_t point_bytes() const { return fp_bytes_ + 1; }

    // --- group operations -------------------------------------------------
    G1Point add(const G1Point& a, const G1Point& b) const;
    G1Point neg(const G1Point& a) const;
    G1Point mul(const G1Point& a, const Big& k) const;
    /// Fixed-base multiple of the generator (comb table, much faster).
    G1Point mul_gen(const Big& k) const;
    /// Product of points[i]^scalars[i] (Pippenger buckets).
    G1Point multiexp(std::span<const G1Point> points, std::span<const Big> scalars) const;
    bool on_curve(const G1Point& a) const;
    bool in_subgroup(const G1Point& a) const;

    // --- pairing ------------------------------------------------------------
    GtElement pairing(const G1Point& p, const G1Point& q, PairingCounter* cnt = nullptr) const;
    /// prod_i e(pairs[i].first, pairs[i].second) with one shared final
    /// exponentiation.
    GtElement pairing_product(std::span<const std::pair<G1Point, G1Point>> pairs,
                              PairingCounter* cnt = nullptr) const;
    const GtElement& pairing_of_generators() const { return e_gg_; }
    GtElement gt_one() const { return GtElement{1, 0}; }

    // --- encoding -----------------------------------------------------------
    /// 1 flag byte + big-endian x. Flag: 0 infinity, 2/3 parity of y.
    Bytes compress(const G1Point& a) const;
    void compress_into(ByteWriter& w, const G1Point& a) const;
    /// Throws ParseError on malformed input. If check_subgroup is set the
    /// point is also checked to have order dividing r (needed for
    /// adversary-supplied points).
    G1Point decompress(ByteReader& r, bool check_subgroup) const;

    // --- scalar field Z_r ---------------------------------------------------
    Big mod_order(const Big& v) const;
    Big scalar_from_bytes(BytesView data) const; // reduced, mapped to [1, r-1]
    Big random_scalar(Drbg& rng) const;          // uniform in [1, r-1]

    explicit PairingGroup(const std::string& name, const std::string& p_hex,
                          const std::string& r_hex, const std::string& c_hex,
                          const std::string& gx_hex, const std::string& gy_hex);

private:
    std::string name_;
    Big p_, r_, cofactor_;
    G1Point gen_;
    size_t fp_bytes_;
    Big exp_sqrt_;   // (p+1)/4 for square roots
    GtElement e_gg_; // e(g, g)

    // fixed-base comb table for the generator
    size_t comb_window_ = 0;
    size_t comb_blocks_ = 0;
    std::vector<G1Point> comb_table_;

    void build_comb();
    GtElement miller(const G1Point& p, const G1Point& q) const;
    GtElement final_exp(const GtElement& f) const;
};

using GroupPtr = std::shared_ptr<const PairingGroup>;

} // namespace vchain
