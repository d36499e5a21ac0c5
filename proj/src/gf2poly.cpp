#include "polka_te/gf2poly.hpp"

#include <cctype>

namespace polka_te {

namespace {

// Trial division over every candidate of degree <= deg/2 is 2^(deg/2) work.
constexpr int kMaxIrreducibleDegree = 40;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Gf2Poly Gf2Poly::monomial(int k) {
    if (k < 0 || k >= kMaxBits) throw Gf2Overflow("monomial degree out of range: " + std::to_string(k));
    return Gf2Poly{Word{1} << k};
}

int Gf2Poly::degree() const {
    const auto hi = static_cast<std::uint64_t>(bits_ >> 64);
    const auto lo = static_cast<std::uint64_t>(bits_);
    if (hi != 0) return 127 - __builtin_clzll(hi);
    if (lo != 0) return 63 - __builtin_clzll(lo);
    return kNegInf;
}

std::uint64_t Gf2Poly::to_u64() const {
    if ((bits_ >> 64) != 0) throw Gf2Overflow("polynomial does not fit in 64 bits");
    return static_cast<std::uint64_t>(bits_);
}

Gf2Poly Gf2Poly::from_binary(std::string_view s) {
    s = trim(s);
    if (s.empty()) throw std::invalid_argument("empty binary polynomial");
    // Leading zeros carry no information.
    while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
    if (static_cast<int>(s.size()) > kMaxBits) throw Gf2Overflow("binary polynomial longer than 128 bits");
    Word bits = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '0' && c != '1') {
            throw std::invalid_argument("invalid binary digit '" + std::string(1, c) + "' at position " +
                                        std::to_string(i));
        }
        bits = (bits << 1) | Word(c == '1');
    }
    return Gf2Poly{bits};
}

Gf2Poly Gf2Poly::from_human(std::string_view s) {
    std::string compact;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    }
    if (compact.empty()) throw std::invalid_argument("empty polynomial");

    Gf2Poly out;
    std::size_t pos = 0;
    while (pos <= compact.size()) {
        const auto end = std::min(compact.find('+', pos), compact.size());
        const std::string_view term(compact.data() + pos, end - pos);
        if (term.empty()) throw std::invalid_argument("empty term at position " + std::to_string(pos));

        if (term == "0") {
            // contributes nothing
        } else if (term == "1") {
            out += one();
        } else if (term.front() == 't' || term.front() == 'x') {
            int k = 1;
            if (term.size() > 1) {
                if (term[1] != '^' || term.size() < 3) {
                    throw std::invalid_argument("malformed term '" + std::string(term) + "' at position " +
                                                std::to_string(pos));
                }
                k = 0;
                for (std::size_t i = 2; i < term.size(); ++i) {
                    if (!std::isdigit(static_cast<unsigned char>(term[i]))) {
                        throw std::invalid_argument("malformed exponent in '" + std::string(term) +
                                                    "' at position " + std::to_string(pos + i));
                    }
                    k = k * 10 + (term[i] - '0');
                    if (k >= kMaxBits) throw Gf2Overflow("exponent out of range in '" + std::string(term) + "'");
                }
            }
            out += monomial(k);
        } else {
            throw std::invalid_argument("malformed term '" + std::string(term) + "' at position " +
                                        std::to_string(pos));
        }
        pos = end + 1;
    }
    return out;
}

Gf2Poly Gf2Poly::parse(std::string_view s) {
    const auto t = trim(s);
    const bool binary = !t.empty() && t.find_first_not_of("01") == std::string_view::npos;
    return binary ? from_binary(t) : from_human(t);
}

std::string Gf2Poly::to_binary() const {
    if (is_zero()) return "0";
    std::string out;
    for (int k = degree(); k >= 0; --k) out.push_back(coeff(k) ? '1' : '0');
    return out;
}

std::string Gf2Poly::to_human() const {
    if (is_zero()) return "0";
    std::string out;
    for (int k = degree(); k >= 0; --k) {
        if (!coeff(k)) continue;
        if (!out.empty()) out += '+';
        if (k == 0) {
            out += '1';
        } else if (k == 1) {
            out += 't';
        } else {
            out += "t^" + std::to_string(k);
        }
    }
    return out;
}

Gf2Poly add(Gf2Poly a, Gf2Poly b) { return Gf2Poly{a.bits() ^ b.bits()}; }

Gf2Poly mul(Gf2Poly a, Gf2Poly b) {
    if (a.is_zero() || b.is_zero()) return Gf2Poly::zero();
    if (a.degree() + b.degree() >= Gf2Poly::kMaxBits) {
        throw Gf2Overflow("product degree " + std::to_string(a.degree() + b.degree()) + " exceeds 127");
    }
    Gf2Poly::Word acc = 0;
    Gf2Poly::Word rhs = b.bits();
    for (int i = 0; rhs != 0; ++i, rhs >>= 1) {
        if (rhs & 1) acc ^= a.bits() << i;
    }
    return Gf2Poly{acc};
}

DivModResult divmod(Gf2Poly a, Gf2Poly b) {
    if (b.is_zero()) throw DivisionByZero("division by the zero polynomial");
    const int db = b.degree();
    Gf2Poly::Word q = 0;
    Gf2Poly::Word r = a.bits();
    for (int dr = Gf2Poly{r}.degree(); dr >= db; dr = Gf2Poly{r}.degree()) {
        const int shift = dr - db;
        r ^= b.bits() << shift;
        q |= Gf2Poly::Word{1} << shift;
    }
    return {Gf2Poly{q}, Gf2Poly{r}};
}

Gf2Poly mod(Gf2Poly a, Gf2Poly b) { return divmod(a, b).remainder; }

ExtGcdResult gcd_ext(Gf2Poly a, Gf2Poly b) {
    if (a.is_zero() && b.is_zero()) throw std::invalid_argument("gcd_ext of two zero polynomials");
    Gf2Poly old_r = a, r = b;
    Gf2Poly old_u = Gf2Poly::one(), u = Gf2Poly::zero();
    Gf2Poly old_v = Gf2Poly::zero(), v = Gf2Poly::one();
    while (!r.is_zero()) {
        const auto [q, rem] = divmod(old_r, r);
        old_r = std::exchange(r, rem);
        old_u = std::exchange(u, old_u + q * u);
        old_v = std::exchange(v, old_v + q * v);
    }
    return {old_r, old_u, old_v};
}

Gf2Poly gcd(Gf2Poly a, Gf2Poly b) {
    while (!b.is_zero()) a = std::exchange(b, mod(a, b));
    return a;
}

Gf2Poly inv_mod(Gf2Poly a, Gf2Poly m) {
    if (m.degree() < 1) throw std::invalid_argument("modulus must have degree >= 1");
    const auto reduced = mod(a, m);
    if (reduced.is_zero()) throw NotInvertible(a.to_binary() + " is not invertible modulo " + m.to_binary());
    const auto [g, u, v] = gcd_ext(reduced, m);
    if (g != Gf2Poly::one()) {
        throw NotInvertible(a.to_binary() + " is not invertible modulo " + m.to_binary() + " (gcd " +
                            g.to_binary() + ")");
    }
    return mod(u, m);
}

bool is_irreducible(Gf2Poly p) {
    const int d = p.degree();
    if (d < 1) throw std::invalid_argument("irreducibility is undefined for constant polynomials");
    if (d > kMaxIrreducibleDegree) {
        throw std::invalid_argument("degree " + std::to_string(d) + " exceeds the trial-division cap");
    }
    for (int k = 1; k <= d / 2; ++k) {
        const Gf2Poly::Word lo = Gf2Poly::Word{1} << k;
        const Gf2Poly::Word hi = lo << 1;
        for (Gf2Poly::Word q = lo; q < hi; ++q) {
            if (mod(p, Gf2Poly{q}).is_zero()) return false;
        }
    }
    return true;
}

Gf2Poly crt(std::span<const Congruence> congruences) {
    if (congruences.empty()) throw std::invalid_argument("crt needs at least one congruence");
    for (std::size_t i = 0; i < congruences.size(); ++i) {
        const auto& [r, m] = congruences[i];
        if (m.is_zero()) throw DivisionByZero("congruence " + std::to_string(i) + " has a zero modulus");
        if (r.degree() >= m.degree()) {
            throw std::invalid_argument("residue " + r.to_binary() + " is not reduced modulo " + m.to_binary());
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (gcd(congruences[j].modulus, m) != Gf2Poly::one()) {
                throw std::invalid_argument("moduli " + congruences[j].modulus.to_binary() + " and " +
                                            m.to_binary() + " are not coprime");
            }
        }
    }

    // Garner: keep x correct modulo the running product, lift one modulus at a time.
    Gf2Poly x = congruences.front().residue;
    Gf2Poly product = congruences.front().modulus;
    for (const auto& [r, m] : congruences.subspan(1)) {
        if (m.degree() == 0) continue;
        const auto lift = mod(mod(r + x, m) * inv_mod(product, m), m);
        x = x + product * lift;
        product = product * m;
    }
    return x;
}

}  // namespace polka_te
