#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace occultist {

using Rat = boost::multiprecision::mpq_rational;
using Int = boost::multiprecision::mpz_int;

using Vec = std::vector<Rat>;

class RationalParseError : public std::runtime_error {
public:
    explicit RationalParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Parses "p", "-p" or "p/q" with q > 0 after normalization. Rejects q = 0.
inline Rat parse_rat(const std::string& s) {
    if (s.empty()) throw RationalParseError("empty rational literal");
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(Int(s));
        Int num(s.substr(0, slash));
        Int den(s.substr(slash + 1));
        if (den == 0) throw RationalParseError("zero denominator in \"" + s + "\"");
        return Rat(num, den);
    } catch (const RationalParseError&) {
        throw;
    } catch (const std::exception&) {
        throw RationalParseError("malformed rational \"" + s + "\"");
    }
}

inline std::string rat_to_string(const Rat& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

inline Rat dot(const Vec& a, const Vec& b) {
    Rat s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scale(const Vec& a, const Rat& c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * c;
    return r;
}

inline bool is_zero(const Vec& a) {
    for (const auto& x : a) if (x != 0) return false;
    return true;
}

/// Scales to a primitive integer vector, preserving direction (sign kept).
inline Vec primitive(const Vec& v) {
    Int l = 1;
    for (const auto& x : v) l = lcm(l, denominator(x));
    Int g = 0;
    std::vector<Int> ints(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        ints[i] = numerator(v[i]) * (l / denominator(v[i]));
        g = gcd(g, ints[i]);
    }
    Vec r(v.size());
    if (g == 0) return Vec(v.size(), Rat(0));
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = Rat(ints[i] / g);
    return r;
}

/// Canonical form for a projective vector: primitive integers, first nonzero
/// coordinate positive.
inline Vec canonical_line(const Vec& v) {
    Vec r = primitive(v);
    for (const auto& x : r) {
        if (x != 0) {
            if (x < 0) for (auto& y : r) y = -y;
            break;
        }
    }
    return r;
}

inline std::string vec_to_string(const Vec& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += rat_to_string(v[i]);
    }
    return s + ")";
}

}  // namespace occultist
