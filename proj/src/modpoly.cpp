#include "vchain/modpoly.hpp"

#include "vchain/errors.hpp"

namespace vchain {

Big Modring::reduce(const Big& v) const {
    Big t;
    mpz_mod(t.get_mpz_t(), v.get_mpz_t(), m_.get_mpz_t());
    return t;
}

Big Modring::add(const Big& a, const Big& b) const {
    Big t = a + b;
    if (t >= m_) t -= m_;
    return t;
}

Big Modring::sub(const Big& a, const Big& b) const {
    Big t = a - b;
    if (t < 0) t += m_;
    return t;
}

Big Modring::mul(const Big& a, const Big& b) const {
    Big t = a * b;
    mpz_mod(t.get_mpz_t(), t.get_mpz_t(), m_.get_mpz_t());
    return t;
}

Big Modring::neg(const Big& a) const {
    if (a == 0) return a;
    return m_ - a;
}

Big Modring::inv(const Big& a) const {
    Big t;
    if (mpz_invert(t.get_mpz_t(), a.get_mpz_t(), m_.get_mpz_t()) == 0)
        throw Error("non-invertible ring element");
    return t;
}

void poly_trim(Poly& p) {
    while (!p.empty() && p.back() == 0) p.pop_back();
}

int poly_degree(const Poly& p) {
    return static_cast<int>(p.size()) - 1;
}

bool poly_is_one(const Poly& p) {
    return p.size() == 1 && p[0] == 1;
}

Poly poly_add(const Modring& r, const Poly& a, const Poly& b) {
    Poly out(std::max(a.size(), b.size()), Big(0));
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i];
    for (size_t i = 0; i < b.size(); ++i) out[i] = r.add(out[i], b[i]);
    poly_trim(out);
    return out;
}

Poly poly_mul(const Modring& r, const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    // accumulate unreduced, one reduction per output coefficient
    std::vector<Big> acc(a.size() + b.size() - 1, Big(0));
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) continue;
        for (size_t j = 0; j < b.size(); ++j) {
            mpz_addmul(acc[i + j].get_mpz_t(), a[i].get_mpz_t(), b[j].get_mpz_t());
        }
    }
    Poly out(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out[i] = r.reduce(acc[i]);
    poly_trim(out);
    return out;
}

std::pair<Poly, Poly> poly_divmod(const Modring& r, const Poly& a, const Poly& b) {
    if (b.empty()) throw LogicError("polynomial division by zero");
    if (a.size() < b.size()) return {Poly{}, a};
    Poly rem = a;
    Poly q(a.size() - b.size() + 1, Big(0));
    Big lead_inv = r.inv(b.back());
    for (size_t i = a.size(); i-- >= b.size();) {
        if (rem.size() <= i || rem[i] == 0) {
            if (i == 0) break;
            continue;
        }
        Big c = r.mul(rem[i], lead_inv);
        q[i - (b.size() - 1)] = c;
        for (size_t j = 0; j < b.size(); ++j) {
            size_t k = i - (b.size() - 1) + j;
            rem[k] = r.sub(rem[k], r.mul(c, b[j]));
        }
        if (i == 0) break;
    }
    poly_trim(q);
    poly_trim(rem);
    return {q, rem};
}

Big poly_eval(const Modring& r, const Poly& p, const Big& x) {
    Big acc = 0;
    for (size_t i = p.size(); i-- > 0;) {
        acc = r.add(r.mul(acc, x), p[i]);
    }
    return acc;
}

static Poly roots_product(const Modring& r, const std::vector<Big>& roots, size_t lo, size_t hi) {
    if (hi - lo == 1) return Poly{roots[lo], Big(1)};
    size_t mid = lo + (hi - lo) / 2;
    return poly_mul(r, roots_product(r, roots, lo, mid), roots_product(r, roots, mid, hi));
}

Poly poly_from_shifted_roots(const Modring& r, const std::vector<Big>& roots) {
    if (roots.empty()) return Poly{Big(1)};
    return roots_product(r, roots, 0, roots.size());
}

static Poly negate_all(const Modring& ring, const Poly& p) {
    Poly out(p.size());
    for (size_t i = 0; i < p.size(); ++i) out[i] = ring.neg(p[i]);
    return out;
}

ExtGcd poly_ext_gcd(const Modring& ring, const Poly& a, const Poly& b) {
    Poly r0 = a, r1 = b;
    Poly s0{Big(1)}, s1{};
    Poly t0{}, t1{Big(1)};
    auto normalize = [&](Poly& r, Poly& s, Poly& t) {
        if (r.empty() || r.back() == 1) return;
        Big inv = ring.inv(r.back());
        for (auto& c : r) c = ring.mul(c, inv);
        for (auto& c : s) c = ring.mul(c, inv);
        for (auto& c : t) c = ring.mul(c, inv);
    };
    normalize(r0, s0, t0);
    normalize(r1, s1, t1);
    while (!r1.empty()) {
        auto [q, rem] = poly_divmod(ring, r0, r1);
        Poly s2 = poly_add(ring, s0, poly_mul(ring, q, negate_all(ring, s1)));
        Poly t2 = poly_add(ring, t0, poly_mul(ring, q, negate_all(ring, t1)));
        r0 = std::move(r1);
        s0 = std::move(s1);
        t0 = std::move(t1);
        r1 = std::move(rem);
        s1 = std::move(s2);
        t1 = std::move(t2);
        normalize(r1, s1, t1);
    }
    return ExtGcd{r0, s0, t0};
}

} // namespace vchain
