#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace polka_te {

/// Raised when a divisor or modulus is the zero polynomial.
struct DivisionByZero : std::domain_error {
    using std::domain_error::domain_error;
};

/// Raised by inv_mod when gcd(a, m) != 1.
struct NotInvertible : std::domain_error {
    using std::domain_error::domain_error;
};

/// Raised when a product would not fit the 128-bit coefficient store.
struct Gf2Overflow : std::overflow_error {
    using std::overflow_error::overflow_error;
};

/**
 * Polynomial over GF(2), stored as a 128-bit coefficient mask.
 *
 * Bit k set means the coefficient of t^k is 1. The representation is
 * canonical: there is no notion of leading zeros, so two polynomials are
 * equal iff their masks are equal. The zero polynomial has degree kNegInf.
 */
class Gf2Poly {
public:
    using Word = unsigned __int128;

    static constexpr int kMaxBits = 128;
    static constexpr int kNegInf = std::numeric_limits<int>::min();

    constexpr Gf2Poly() = default;
    constexpr explicit Gf2Poly(Word bits) : bits_(bits) {}

    static constexpr Gf2Poly zero() { return Gf2Poly{}; }
    static constexpr Gf2Poly one() { return Gf2Poly{Word{1}}; }
    /// t^k
    static Gf2Poly monomial(int k);
    static constexpr Gf2Poly from_u64(std::uint64_t v) { return Gf2Poly{Word{v}}; }

    /// MSB-first binary string, e.g. "10000" is t^4. Leading zeros are accepted.
    static Gf2Poly from_binary(std::string_view s);
    /// Human notation, e.g. "t^3+t+1", "t^2 + 1", "0".
    static Gf2Poly from_human(std::string_view s);
    /// Accepts either notation: digits only means binary, anything else human form.
    static Gf2Poly parse(std::string_view s);

    std::string to_binary() const;
    std::string to_human() const;

    constexpr Word bits() const { return bits_; }
    constexpr bool is_zero() const { return bits_ == 0; }
    constexpr bool coeff(int k) const { return k >= 0 && k < kMaxBits && ((bits_ >> k) & 1); }

    /// Index of the highest set bit, or kNegInf for the zero polynomial.
    int degree() const;

    /// Low 64 bits; throws if the polynomial does not fit.
    std::uint64_t to_u64() const;

    friend constexpr bool operator==(Gf2Poly a, Gf2Poly b) = default;
    friend constexpr auto operator<=>(Gf2Poly a, Gf2Poly b) { return a.bits_ <=> b.bits_; }

private:
    Word bits_ = 0;
};

struct DivModResult {
    Gf2Poly quotient;
    Gf2Poly remainder;
};

struct ExtGcdResult {
    Gf2Poly gcd;
    Gf2Poly u;  // u*a + v*b = gcd
    Gf2Poly v;
};

struct Congruence {
    Gf2Poly residue;
    Gf2Poly modulus;
};

inline int degree(Gf2Poly p) { return p.degree(); }

Gf2Poly add(Gf2Poly a, Gf2Poly b);
/// Carry-less product. Throws Gf2Overflow if deg(a)+deg(b) >= 128.
Gf2Poly mul(Gf2Poly a, Gf2Poly b);
/// Polynomial long division: a = b*q + r, deg(r) < deg(b).
DivModResult divmod(Gf2Poly a, Gf2Poly b);
Gf2Poly mod(Gf2Poly a, Gf2Poly b);
ExtGcdResult gcd_ext(Gf2Poly a, Gf2Poly b);
Gf2Poly gcd(Gf2Poly a, Gf2Poly b);
/// Inverse of a modulo m, reduced below deg(m).
Gf2Poly inv_mod(Gf2Poly a, Gf2Poly m);
/// Trial division by every polynomial of degree 1..deg(p)/2.
bool is_irreducible(Gf2Poly p);
/// Unique x with deg(x) < sum deg(m_i) satisfying every congruence.
Gf2Poly crt(std::span<const Congruence> congruences);

inline Gf2Poly operator+(Gf2Poly a, Gf2Poly b) { return add(a, b); }
inline Gf2Poly operator-(Gf2Poly a, Gf2Poly b) { return add(a, b); }
inline Gf2Poly operator*(Gf2Poly a, Gf2Poly b) { return mul(a, b); }
inline Gf2Poly operator/(Gf2Poly a, Gf2Poly b) { return divmod(a, b).quotient; }
inline Gf2Poly operator%(Gf2Poly a, Gf2Poly b) { return divmod(a, b).remainder; }
inline Gf2Poly& operator+=(Gf2Poly& a, Gf2Poly b) { return a = a + b; }

}  // namespace polka_te
