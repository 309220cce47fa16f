#pragma once

#include <gmpxx.h>

#include <vector>

#include "vchain/rng.hpp"

namespace vchain {

/// Arithmetic in Z_m for a prime modulus m (the pairing group order).
class Modring {
public:
    explicit Modring(Big m) : m_(std::move(m)) {}

    const Big& modulus() const { return m_; }
    Big reduce(const Big& v) const;
    Big add(const Big& a, const Big& b) const;
    Big sub(const Big& a, const Big& b) const;
    Big mul(const Big& a, const Big& b) const;
    Big neg(const Big& a) const;
    Big inv(const Big& a) const;

private:
    Big m_;
};

/// Dense polynomial over Z_m, coefficients ordered low to high.
/// Canonical form has no trailing zero coefficients; the zero polynomial
/// is the empty vector.
using Poly = std::vector<Big>;

void poly_trim(Poly& p);
int poly_degree(const Poly& p); // -1 for the zero polynomial
bool poly_is_one(const Poly& p);
Poly poly_add(const Modring& r, const Poly& a, const Poly& b);
Poly poly_mul(const Modring& r, const Poly& a, const Poly& b);
/// Quotient and remainder; divisor must be nonzero.
std::pair<Poly, Poly> poly_divmod(const Modring& r, const Poly& a, const Poly& b);
Big poly_eval(const Modring& r, const Poly& p, const Big& x);

/// Product of (X + roots[i]) over all i, multiplicities expanded by the
/// caller. Built with a product tree.
Poly poly_from_shifted_roots(const Modring& r, const std::vector<Big>& roots);

struct ExtGcd {
    Poly g; // monic gcd
    Poly u;
    Poly v; // a*u + b*v = g
};

/// Extended Euclid with monic normalization at each step.
ExtGcd poly_ext_gcd(const Modring& r, const Poly& a, const Poly& b);

} // namespace vchain
