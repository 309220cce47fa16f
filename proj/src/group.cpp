#include "vchain/group.hpp"

#include <map>
#include <mutex>

#include "vchain/errors.hpp"

namespace vchain {

namespace {

struct PresetDef {
    const char* name;
    const char* p;
    const char* r;
    const char* c;
    const char* gx;
    const char* gy;
};

// Supersingular curves y^2 = x^3 + x over F_p, p = c*r - 1, p = 3 (mod 4).
// ss256 is for tests and development only; ss1024 is the default
// (target field ~2048 bits).
const PresetDef kPresets[] = {
    {"ss256",
     "80000000000000000000008400000000006500c100000000000000006828c707",
     "80000000000000000000000000000000006500c1",
     "1000000000000000000000108",
     "57ee4d2336fe9fa921d3705ba32db41c7d1d54aefacdfe8464d3a053f60d0d8c",
     "4f3ba9c2814281045781bb0af734647cec0b3909cb3291b009e53e81cee90926"},
    {"ss1024",
     "8000000000000000000000000000000000000000000000000000000000ca01b100000000000000000000000000000000"
     "000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000268"
     "00000000000000000000000000000000000000000000000000000003cc2823cf",
     "8000000000000000000000000000000000000000000000000000000000ca01b1",
     "100000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000"
     "00000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000004d"
     "0",
     "31f71d8f1044ce11b008107866e7f4cbee3b1013c549b2eb37841d2abcb0b8ba8426d5ec389f8cec9ab87e7d925bc7d3"
     "633f9896ebe6099fd11a110dc0a2d9ab3d9fa48fdb8b4b161ae6d65295b4cfb13053a254607ece4e323b839f647d1274"
     "208bdd70f714833d1e8d263f67bc9c7ffe0c1c9981d1f53d165827878bbc4718",
     "67e3bbeb2cbfae4cd4838064a207eedc00515ea9ce9281ebf0772bc256d6bb93de395d5555bfa88943e6d546855e286a"
     "16069bec283917d3d34ded961e56270af50256c75b7e72f4b0514dc43d9ca51ab0925c8cae42c334d060ade1f45ef2be"
     "e9b1c3d03960c08f146dce64b04d4c1dc648979c7d0d3d7ee8b8265eee072d20"},
};

Big from_hex_big(const char* s) {
    Big v;
    if (mpz_set_str(v.get_mpz_t(), s, 16) != 0) throw Error("bad preset constant");
    return v;
}

} // namespace

// --- modular helpers --------------------------------------------------------

namespace {

inline void reduce(Big& v, const Big& p) {
    mpz_mod(v.get_mpz_t(), v.get_mpz_t(), p.get_mpz_t());
}

inline Big mulm(const Big& a, const Big& b, const Big& p) {
    Big t = a * b;
    reduce(t, p);
    return t;
}

inline Big sqrm(const Big& a, const Big& p) {
    Big t = a * a;
    reduce(t, p);
    return t;
}

inline Big subm(const Big& a, const Big& b, const Big& p) {
    Big t = a - b;
    if (t < 0) t += p;
    return t;
}

inline Big addm(const Big& a, const Big& b, const Big& p) {
    Big t = a + b;
    if (t >= p) t -= p;
    return t;
}

inline Big invm(const Big& a, const Big& p) {
    Big t;
    if (mpz_invert(t.get_mpz_t(), a.get_mpz_t(), p.get_mpz_t()) == 0)
        throw Error("non-invertible field element");
    return t;
}

// a + b*i, i^2 = -1
struct Fp2 {
    Big a, b;
};

inline Fp2 fp2_mul(const Fp2& x, const Fp2& y, const Big& p) {
    // Karatsuba: (a1a2 - b1b2) + ((a1+b1)(a2+b2) - a1a2 - b1b2) i
    Big t1 = mulm(x.a, y.a, p);
    Big t2 = mulm(x.b, y.b, p);
    Big t3 = mulm(addm(x.a, x.b, p), addm(y.a, y.b, p), p);
    Fp2 r;
    r.a = subm(t1, t2, p);
    r.b = subm(subm(t3, t1, p), t2, p);
    return r;
}

inline Fp2 fp2_sqr(const Fp2& x, const Big& p) {
    // (a+b)(a-b) + (2ab) i
    Big t1 = mulm(addm(x.a, x.b, p), subm(x.a, x.b, p), p);
    Big t2 = mulm(x.a, x.b, p);
    return Fp2{t1, addm(t2, t2, p)};
}

inline bool fp2_is_one(const Fp2& x) { return x.a == 1 && x.b == 0; }

} // namespace

// --- Jacobian point arithmetic ----------------------------------------------

namespace {

struct Jac {
    Big X, Y, Z; // Z == 0 encodes infinity

    bool inf() const { return Z == 0; }
};

Jac jac_from_affine(const G1Point& a) {
    if (a.inf) return Jac{0, 1, 0};
    return Jac{a.x, a.y, 1};
}

// doubling, curve a-coefficient = 1 (dbl-2007-bl)
Jac jac_dbl(const Jac& q, const Big& p) {
    if (q.inf() || q.Y == 0) return Jac{0, 1, 0};
    Big XX = sqrm(q.X, p);
    Big YY = sqrm(q.Y, p);
    Big YYYY = sqrm(YY, p);
    Big ZZ = sqrm(q.Z, p);
    Big S = sqrm(addm(q.X, YY, p), p);
    S = subm(subm(S, XX, p), YYYY, p);
    S = addm(S, S, p);
    Big M = addm(addm(XX, XX, p), XX, p);
    M = addm(M, sqrm(ZZ, p), p);
    Big X3 = subm(sqrm(M, p), addm(S, S, p), p);
    Big Y8 = YYYY;
    for (int i = 0; i < 3; ++i) Y8 = addm(Y8, Y8, p);
    Big Y3 = subm(mulm(M, subm(S, X3, p), p), Y8, p);
    Big Z3 = sqrm(addm(q.Y, q.Z, p), p);
    Z3 = subm(subm(Z3, YY, p), ZZ, p);
    return Jac{X3, Y3, Z3};
}

// mixed addition: q (Jacobian) + a (affine, not infinity)
Jac jac_madd(const Jac& q, const G1Point& a, const Big& p) {
    if (q.inf()) return Jac{a.x, a.y, 1};
    Big Z1Z1 = sqrm(q.Z, p);
    Big U2 = mulm(a.x, Z1Z1, p);
    Big S2 = mulm(mulm(a.y, q.Z, p), Z1Z1, p);
    Big H = subm(U2, q.X, p);
    Big rr = addm(subm(S2, q.Y, p), subm(S2, q.Y, p), p);
    if (H == 0) {
        if (rr == 0) return jac_dbl(q, p);
        return Jac{0, 1, 0};
    }
    Big HH = sqrm(H, p);
    Big I = addm(addm(HH, HH, p), addm(HH, HH, p), p);
    Big J = mulm(H, I, p);
    Big V = mulm(q.X, I, p);
    Big X3 = subm(subm(sqrm(rr, p), J, p), addm(V, V, p), p);
    Big Y3 = subm(mulm(rr, subm(V, X3, p), p), addm(mulm(q.Y, J, p), mulm(q.Y, J, p), p), p);
    Big Z3 = sqrm(addm(q.Z, H, p), p);
    Z3 = subm(subm(Z3, Z1Z1, p), HH, p);
    return Jac{X3, Y3, Z3};
}

// full Jacobian addition (add-2007-bl)
Jac jac_add(const Jac& q, const Jac& w, const Big& p) {
    if (q.inf()) return w;
    if (w.inf()) return q;
    Big Z1Z1 = sqrm(q.Z, p);
    Big Z2Z2 = sqrm(w.Z, p);
    Big U1 = mulm(q.X, Z2Z2, p);
    Big U2 = mulm(w.X, Z1Z1, p);
    Big S1 = mulm(mulm(q.Y, w.Z, p), Z2Z2, p);
    Big S2 = mulm(mulm(w.Y, q.Z, p), Z1Z1, p);
    Big H = subm(U2, U1, p);
    Big rr = addm(subm(S2, S1, p), subm(S2, S1, p), p);
    if (H == 0) {
        if (rr == 0) return jac_dbl(q, p);
        return Jac{0, 1, 0};
    }
    Big I = sqrm(addm(H, H, p), p);
    Big J = mulm(H, I, p);
    Big V = mulm(U1, I, p);
    Big X3 = subm(subm(sqrm(rr, p), J, p), addm(V, V, p), p);
    Big Y3 = subm(mulm(rr, subm(V, X3, p), p), addm(mulm(S1, J, p), mulm(S1, J, p), p), p);
    Big Z3 = sqrm(addm(q.Z, w.Z, p), p);
    Z3 = subm(subm(Z3, Z1Z1, p), Z2Z2, p);
    Z3 = mulm(Z3, H, p);
    return Jac{X3, Y3, Z3};
}

Jac jac_neg(const Jac& q, const Big& p) {
    if (q.inf()) return q;
    return Jac{q.X, q.Y == 0 ? Big(0) : Big(p - q.Y), q.Z};
}

G1Point jac_to_affine(const Jac& q, const Big& p) {
    if (q.inf()) return G1Point{};
    Big zi = invm(q.Z, p);
    Big zi2 = sqrm(zi, p);
    G1Point a;
    a.inf = false;
    a.x = mulm(q.X, zi2, p);
    a.y = mulm(q.Y, mulm(zi2, zi, p), p);
    return a;
}

// Normalize many Jacobian points with a single inversion.
std::vector<G1Point> batch_to_affine(const std::vector<Jac>& pts, const Big& p) {
    size_t n = pts.size();
    std::vector<G1Point> out(n);
    std::vector<Big> prefix(n);
    Big acc = 1;
    for (size_t i = 0; i < n; ++i) {
        prefix[i] = acc;
        if (!pts[i].inf()) acc = mulm(acc, pts[i].Z, p);
    }
    Big inv = invm(acc, p);
    for (size_t i = n; i-- > 0;) {
        if (pts[i].inf()) continue;
        Big zi = mulm(inv, prefix[i], p);
        inv = mulm(inv, pts[i].Z, p);
        Big zi2 = sqrm(zi, p);
        out[i].inf = false;
        out[i].x = mulm(pts[i].X, zi2, p);
        out[i].y = mulm(pts[i].Y, mulm(zi2, zi, p), p);
    }
    return out;
}

std::vector<int8_t> wnaf_digits(Big k, int w) {
    std::vector<int8_t> digits;
    const long full = 1L << w;
    const long half = 1L << (w - 1);
    while (k > 0) {
        if (mpz_odd_p(k.get_mpz_t())) {
            long m = static_cast<long>(mpz_fdiv_ui(k.get_mpz_t(), full));
            if (m >= half) m -= full;
            digits.push_back(static_cast<int8_t>(m));
            k -= m;
        } else {
            digits.push_back(0);
        }
        k >>= 1;
    }
    return digits;
}

} // namespace

// --- PairingGroup -----------------------------------------------------------

PairingGroup::PairingGroup(const std::string& name, const std::string& p_hex,
                           const std::string& r_hex, const std::string& c_hex,
                           const std::string& gx_hex, const std::string& gy_hex)
    : name_(name),
      p_(from_hex_big(p_hex.c_str())),
      r_(from_hex_big(r_hex.c_str())),
      cofactor_(from_hex_big(c_hex.c_str())) {
    gen_.inf = false;
    gen_.x = from_hex_big(gx_hex.c_str());
    gen_.y = from_hex_big(gy_hex.c_str());
    fp_bytes_ = (mpz_sizeinbase(p_.get_mpz_t(), 2) + 7) / 8;
    exp_sqrt_ = (p_ + 1) / 4;
    if (mpz_fdiv_ui(p_.get_mpz_t(), 4) != 3) throw Error("preset: p != 3 mod 4");
    if (cofactor_ * r_ != p_ + 1) throw Error("preset: p+1 != c*r");
    if (!on_curve(gen_) || !in_subgroup(gen_)) throw Error("preset: bad generator");
    build_comb();
    GtElement f = miller(gen_, gen_);
    e_gg_ = final_exp(f);
    if (e_gg_.is_one()) throw Error("preset: degenerate pairing");
}

std::shared_ptr<const PairingGroup> PairingGroup::preset(const std::string& name) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const PairingGroup>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    for (const auto& d : kPresets) {
        if (name == d.name) {
            auto g = std::make_shared<const PairingGroup>(d.name, d.p, d.r, d.c, d.gx, d.gy);
            cache[name] = g;
            return g;
        }
    }
    throw NotFoundError("unknown curve preset: " + name);
}

std::vector<std::string> PairingGroup::preset_names() {
    std::vector<std::string> names;
    for (const auto& d : kPresets) names.push_back(d.name);
    return names;
}

bool PairingGroup::on_curve(const G1Point& a) const {
    if (a.inf) return true;
    if (a.x < 0 || a.x >= p_ || a.y < 0 || a.y >= p_) return false;
    Big lhs = sqrm(a.y, p_);
    Big rhs = addm(mulm(sqrm(a.x, p_), a.x, p_), a.x, p_);
    return lhs == rhs;
}

bool PairingGroup::in_subgroup(const G1Point& a) const {
    if (a.inf) return true;
    if (!on_curve(a)) return false;
    return mul(a, r_).inf;
}

G1Point PairingGroup::add(const G1Point& a, const G1Point& b) const {
    if (a.inf) return b;
    if (b.inf) return a;
    return jac_to_affine(jac_madd(jac_from_affine(a), b, p_), p_);
}

G1Point PairingGroup::neg(const G1Point& a) const {
    if (a.inf) return a;
    return G1Point{a.x, a.y == 0 ? Big(0) : Big(p_ - a.y), false};
}

G1Point PairingGroup::mul(const G1Point& a, const Big& k) const {
    Big s = mod_order(k);
    if (a.inf || s == 0) return G1Point{};
    auto digits = wnaf_digits(s, 4);
    // odd multiples 1P, 3P, 5P, 7P
    std::vector<Jac> table(4);
    Jac p1 = jac_from_affine(a);
    Jac p2 = jac_dbl(p1, p_);
    table[0] = p1;
    for (int i = 1; i < 4; ++i) table[i] = jac_add(table[i - 1], p2, p_);
    Jac acc{0, 1, 0};
    for (size_t i = digits.size(); i-- > 0;) {
        acc = jac_dbl(acc, p_);
        int8_t d = digits[i];
        if (d > 0)
            acc = jac_add(acc, table[(d - 1) / 2], p_);
        else if (d < 0)
            acc = jac_add(acc, jac_neg(table[(-d - 1) / 2], p_), p_);
    }
    return jac_to_affine(acc, p_);
}

void PairingGroup::build_comb() {
    // windowed fixed-base table: table[j][m-1] = m * 2^(jw) * G
    comb_window_ = 8;
    size_t rbits = mpz_sizeinbase(r_.get_mpz_t(), 2);
    comb_blocks_ = (rbits + comb_window_ - 1) / comb_window_;
    size_t per = (1u << comb_window_) - 1;
    std::vector<Jac> jac_table;
    jac_table.reserve(comb_blocks_ * per);
    Jac base = jac_from_affine(gen_);
    for (size_t j = 0; j < comb_blocks_; ++j) {
        Jac m = base;
        for (size_t i = 0; i < per; ++i) {
            jac_table.push_back(m);
            m = jac_add(m, base, p_);
        }
        base = m; // base * 2^w  (m == (per+1) * base == 2^w * base)
    }
    comb_table_ = batch_to_affine(jac_table, p_);
}

G1Point PairingGroup::mul_gen(const Big& k) const {
    Big s = mod_order(k);
    if (s == 0) return G1Point{};
    size_t per = (1u << comb_window_) - 1;
    Jac acc{0, 1, 0};
    for (size_t j = 0; j < comb_blocks_ && s != 0; ++j) {
        unsigned long m = mpz_fdiv_ui(s.get_mpz_t(), 1u << comb_window_);
        if (m) acc = jac_madd(acc, comb_table_[j * per + (m - 1)], p_);
        s >>= comb_window_;
    }
    return jac_to_affine(acc, p_);
}

G1Point PairingGroup::multiexp(std::span<const G1Point> points,
                               std::span<const Big> scalars) const {
    if (points.size() != scalars.size()) throw LogicError("multiexp size mismatch");
    size_t n = points.size();
    if (n == 0) return G1Point{};
    if (n < 8) {
        Jac acc{0, 1, 0};
        for (size_t i = 0; i < n; ++i)
            acc = jac_add(acc, jac_from_affine(mul(points[i], scalars[i])), p_);
        return jac_to_affine(acc, p_);
    }
    std::vector<Big> red(n);
    size_t maxbits = 1;
    for (size_t i = 0; i < n; ++i) {
        red[i] = mod_order(scalars[i]);
        if (red[i] != 0) maxbits = std::max(maxbits, mpz_sizeinbase(red[i].get_mpz_t(), 2));
    }
    size_t c = 3;
    while ((size_t(1) << c) < n / 2 && c < 12) ++c;
    c = std::min(c, maxbits);
    size_t windows = (maxbits + c - 1) / c;
    std::vector<Jac> buckets(size_t(1) << c);
    Jac result{0, 1, 0};
    for (size_t w = windows; w-- > 0;) {
        for (size_t i = 0; i < c; ++i) result = jac_dbl(result, p_);
        for (auto& b : buckets) b = Jac{0, 1, 0};
        for (size_t i = 0; i < n; ++i) {
            if (points[i].inf || red[i] == 0) continue;
            Big shifted = red[i] >> (w * c);
            unsigned long idx = mpz_fdiv_ui(shifted.get_mpz_t(), 1UL << c);
            if (idx) buckets[idx] = jac_madd(buckets[idx], points[i], p_);
        }
        Jac run{0, 1, 0};
        Jac sum{0, 1, 0};
        for (size_t b = buckets.size(); b-- > 1;) {
            run = jac_add(run, buckets[b], p_);
            sum = jac_add(sum, run, p_);
        }
        result = jac_add(result, sum, p_);
    }
    return jac_to_affine(result, p_);
}

// --- pairing ------------------------------------------------------------------

GtElement PairingGroup::miller(const G1Point& pp, const G1Point& qq) const {
    // f_{r,P} evaluated at the distorted point (-x_Q, i*y_Q); vertical lines
    // live in F_p and are erased by the final exponentiation, so they are
    // skipped (denominator elimination, embedding degree 2).
    if (pp.inf || qq.inf) return GtElement{1, 0};
    const Big& xq = qq.x;
    const Big& yq = qq.y;
    Fp2 f{1, 0};
    Jac T = jac_from_affine(pp);
    size_t rbits = mpz_sizeinbase(r_.get_mpz_t(), 2);
    for (size_t i = rbits - 1; i-- > 0;) {
        // tangent line at T, evaluated at (-xq, i*yq)
        f = fp2_sqr(f, p_);
        if (!T.inf()) {
            Big ZZ = sqrm(T.Z, p_);
            Big YY = sqrm(T.Y, p_);
            Big M = addm(addm(sqrm(T.X, p_), sqrm(T.X, p_), p_), sqrm(T.X, p_), p_);
            M = addm(M, sqrm(ZZ, p_), p_);
            Big Z3 = sqrm(addm(T.Y, T.Z, p_), p_);
            Z3 = subm(subm(Z3, YY, p_), ZZ, p_); // 2*Y*Z
            Big lr = subm(addm(YY, YY, p_),
                          mulm(M, addm(mulm(xq, ZZ, p_), T.X, p_), p_), p_);
            Big li = p_ - mulm(mulm(Z3, ZZ, p_), yq, p_);
            if (li == p_) li = 0;
            f = fp2_mul(f, Fp2{lr, li}, p_);
            T = jac_dbl(T, p_);
        }
        if (mpz_tstbit(r_.get_mpz_t(), i)) {
            if (!T.inf()) {
                // chord through T and P, evaluated at (-xq, i*yq)
                Big Z1Z1 = sqrm(T.Z, p_);
                Big U2 = mulm(pp.x, Z1Z1, p_);
                Big S2 = mulm(mulm(pp.y, T.Z, p_), Z1Z1, p_);
                Big H = subm(U2, T.X, p_);
                Big rr = addm(subm(S2, T.Y, p_), subm(S2, T.Y, p_), p_);
                if (H == 0) {
                    // vertical chord (T == -P): line value lies in F_p, skip
                    T = (rr == 0) ? jac_dbl(T, p_) : Jac{0, 1, 0};
                } else {
                    Big Z3 = sqrm(addm(T.Z, H, p_), p_);
                    Z3 = subm(subm(Z3, Z1Z1, p_), sqrm(H, p_), p_); // 2*Z1*H
                    Big lr = subm(mulm(Z3, pp.y, p_),
                                  mulm(rr, addm(xq, pp.x, p_), p_), p_);
                    Big li = p_ - mulm(Z3, yq, p_);
                    if (li == p_) li = 0;
                    f = fp2_mul(f, Fp2{lr, li}, p_);
                    T = jac_madd(T, pp, p_);
                }
            }
        }
    }
    return GtElement{f.a, f.b};
}

GtElement PairingGroup::final_exp(const GtElement& fin) const {
    Fp2 f{fin.a, fin.b};
    if (f.a == 0 && f.b == 0) throw Error("pairing: zero accumulator");
    // f^(p-1) = conj(f)^2 / norm(f); the result is unitary
    Big norm = addm(sqrm(f.a, p_), sqrm(f.b, p_), p_);
    Big ninv = invm(norm, p_);
    Fp2 c{f.a, f.b == 0 ? Big(0) : Big(p_ - f.b)};
    Fp2 g = fp2_sqr(c, p_);
    g.a = mulm(g.a, ninv, p_);
    g.b = mulm(g.b, ninv, p_);
    // then raise to (p+1)/r = cofactor; g is unitary so squaring is cheap
    Fp2 acc{1, 0};
    size_t bits = mpz_sizeinbase(cofactor_.get_mpz_t(), 2);
    for (size_t i = bits; i-- > 0;) {
        // unitary square: (2a^2 - 1) + 2ab i
        Big a2 = sqrm(acc.a, p_);
        Big na = subm(addm(a2, a2, p_), Big(1), p_);
        Big nb = mulm(acc.a, acc.b, p_);
        nb = addm(nb, nb, p_);
        acc = Fp2{na, nb};
        if (mpz_tstbit(cofactor_.get_mpz_t(), i)) acc = fp2_mul(acc, g, p_);
    }
    return GtElement{acc.a, acc.b};
}

GtElement PairingGroup::pairing(const G1Point& p, const G1Point& q, PairingCounter* cnt) const {
    if (cnt) {
        cnt->miller_loops += 1;
        cnt->final_exps += 1;
    }
    if (p.inf || q.inf) return gt_one();
    return final_exp(miller(p, q));
}

GtElement PairingGroup::pairing_product(std::span<const std::pair<G1Point, G1Point>> pairs,
                                        PairingCounter* cnt) const {
    Fp2 f{1, 0};
    bool any = false;
    for (const auto& [p, q] : pairs) {
        if (p.inf || q.inf) continue;
        GtElement m = miller(p, q);
        f = fp2_mul(f, Fp2{m.a, m.b}, p_);
        any = true;
        if (cnt) cnt->miller_loops += 1;
    }
    if (cnt) cnt->final_exps += 1;
    if (!any) return gt_one();
    return final_exp(GtElement{f.a, f.b});
}

// --- encoding -------------------------------------------------------------------

Bytes PairingGroup::compress(const G1Point& a) const {
    ByteWriter w;
    compress_into(w, a);
    return std::move(w.out);
}

void PairingGroup::compress_into(ByteWriter& w, const G1Point& a) const {
    if (a.inf) {
        w.u8(0);
        w.out.insert(w.out.end(), fp_bytes_, 0);
        return;
    }
    w.u8(static_cast<uint8_t>(2 + mpz_tstbit(a.y.get_mpz_t(), 0)));
    Bytes xb(fp_bytes_, 0);
    size_t count = 0;
    mpz_export(xb.data(), &count, 1, 1, 0, 0, a.x.get_mpz_t());
    // right-align big-endian value
    if (count < fp_bytes_) {
        std::rotate(xb.begin(), xb.begin() + count, xb.end());
        std::fill(xb.begin(), xb.begin() + (fp_bytes_ - count), 0);
    }
    w.raw(xb);
}

G1Point PairingGroup::decompress(ByteReader& r, bool check_subgroup) const {
    uint8_t flag = r.u8();
    Bytes xb = r.raw(fp_bytes_);
    if (flag == 0) {
        for (uint8_t b : xb)
            if (b) throw ParseError("bad infinity encoding");
        return G1Point{};
    }
    if (flag != 2 && flag != 3) throw ParseError("bad point flag");
    G1Point a;
    a.inf = false;
    mpz_import(a.x.get_mpz_t(), xb.size(), 1, 1, 0, 0, xb.data());
    if (a.x >= p_) throw ParseError("point x out of range");
    Big t = addm(mulm(sqrm(a.x, p_), a.x, p_), a.x, p_);
    Big y;
    mpz_powm(y.get_mpz_t(), t.get_mpz_t(), exp_sqrt_.get_mpz_t(), p_.get_mpz_t());
    if (sqrm(y, p_) != t) throw ParseError("point not on curve");
    if (mpz_tstbit(y.get_mpz_t(), 0) != (flag & 1)) y = p_ - y;
    a.y = y;
    if (check_subgroup && !in_subgroup(a)) throw ParseError("point not in prime-order subgroup");
    return a;
}

// --- scalars -----------------------------------------------------------------------

Big PairingGroup::mod_order(const Big& v) const {
    Big t;
    mpz_mod(t.get_mpz_t(), v.get_mpz_t(), r_.get_mpz_t());
    return t;
}

Big PairingGroup::scalar_from_bytes(BytesView data) const {
    Big v;
    mpz_import(v.get_mpz_t(), data.size(), 1, 1, 0, 0, data.data());
    Big rm1 = r_ - 1;
    mpz_mod(v.get_mpz_t(), v.get_mpz_t(), rm1.get_mpz_t());
    return v + 1;
}

Big PairingGroup::random_scalar(Drbg& rng) const {
    return rng.big_below(r_ - 1) + 1;
}

} // namespace vchain
