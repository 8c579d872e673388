#pragma once

#include <gmpxx.h>

#include <cmath>
#include <string>

namespace evgp {

// Exact rational arithmetic for the moment oracle. GMP keeps everything
// canonical; results are independent of evaluation order.
using Rational = mpq_class;

inline Rational frac(long num, long den) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

inline Rational rational_pow(const Rational& base, unsigned e) {
    Rational out(1);
    Rational b = base;
    while (e > 0) {
        if (e & 1u) out *= b;
        b *= b;
        e >>= 1u;
    }
    return out;
}

// (2k-1)!! = 1*3*5*...*(2k-1); k = 0 gives 1.
inline Rational double_factorial_odd(unsigned k) {
    Rational out(1);
    for (unsigned i = 1; i <= k; ++i) out *= Rational(2 * i - 1);
    return out;
}

inline double to_double(const Rational& r) { return r.get_d(); }

// "num/den" even when den == 1, so exact values are visibly exact.
inline std::string to_fraction_string(const Rational& r) {
    return r.get_num().get_str() + "/" + r.get_den().get_str();
}

// log of a positive rational, accurate also when num/den overflows double.
inline double log_rational(const Rational& r) {
    signed long exp_num = 0, exp_den = 0;
    double mn = mpz_get_d_2exp(&exp_num, r.get_num().get_mpz_t());
    double md = mpz_get_d_2exp(&exp_den, r.get_den().get_mpz_t());
    return std::log(mn / md) + static_cast<double>(exp_num - exp_den) * std::log(2.0);
}

}  // namespace evgp
