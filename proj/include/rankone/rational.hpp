#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rankone {

using Rational = mpq_class;
using Level = std::int64_t;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
    Rational q(mpz_class(std::to_string(num)), mpz_class(std::to_string(den)));
    q.canonicalize();
    return q;
}

inline Rational from_int(std::int64_t v) { return Rational(mpz_class(std::to_string(v))); }

/// 2^e for any signed exponent.
inline Rational pow2(long e) {
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 2, static_cast<unsigned long>(e < 0 ? -e : e));
    Rational q = e < 0 ? Rational(mpz_class(1), p) : Rational(p);
    q.canonicalize();
    return q;
}

inline Rational abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }
inline Rational min(const Rational& a, const Rational& b) { return a < b ? a : b; }
inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

/// Accepts "p", "p/q", "-p/q". Whitespace is not allowed inside the literal.
inline Rational parse_rational(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("empty rational literal");
    const auto slash = text.find('/');
    auto valid_int = [](std::string_view s) {
        if (s.empty()) return false;
        std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (i == s.size()) return false;
        for (; i < s.size(); ++i)
            if (s[i] < '0' || s[i] > '9') return false;
        return true;
    };
    auto strip_plus = [](std::string_view s) {
        return std::string(!s.empty() && s[0] == '+' ? s.substr(1) : s);
    };
    const std::string_view num = text.substr(0, slash);
    const std::string_view den = slash == std::string_view::npos ? std::string_view("1") : text.substr(slash + 1);
    if (!valid_int(num) || !valid_int(den) || den[0] == '-')
        throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    mpz_class d(strip_plus(den));
    if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    Rational q(mpz_class(strip_plus(num)), d);
    q.canonicalize();
    return q;
}

inline std::string to_string(const Rational& q) { return q.get_str(); }

/// Fixed-point decimal rendering, truncated toward zero. Exact and platform independent.
inline std::string to_decimal(const Rational& q, int digits = 12) {
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(digits));
    const bool negative = q < 0;
    mpz_class scaled = abs(q).get_num() * scale;
    mpz_class truncated;
    mpz_tdiv_q(truncated.get_mpz_t(), scaled.get_mpz_t(), q.get_den().get_mpz_t());
    std::string s = truncated.get_str();
    if (s.size() <= static_cast<std::size_t>(digits)) s.insert(0, static_cast<std::size_t>(digits) + 1 - s.size(), '0');
    s.insert(s.size() - static_cast<std::size_t>(digits), ".");
    if (negative && truncated != 0) s.insert(0, "-");
    return s;
}

inline double to_double(const Rational& q) { return q.get_d(); }

}  // namespace rankone
