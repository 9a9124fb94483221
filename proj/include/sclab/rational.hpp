#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "sclab/grid.hpp"

namespace sclab {

// Exact rational arithmetic on 64-bit numerator/denominator with __int128
// intermediates. Enough for the boundary-amplitude bookkeeping of the layered
// constructive check, where event counts are small and speeds are small
// rationals.
struct Fraction {
    long long num = 0;
    long long den = 1;

    Fraction() = default;
    Fraction(long long n) : num(n), den(1) {}
    Fraction(long long n, long long d) : num(n), den(d) { normalize(); }

    void normalize() {
        require(den != 0, "Fraction: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    static Fraction from_128(__int128 n, __int128 d) {
        require(d != 0, "Fraction: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        __int128 a = n < 0 ? -n : n, b = d;
        while (b != 0) {
            __int128 t = a % b;
            a = b;
            b = t;
        }
        if (a > 1) {
            n /= a;
            d /= a;
        }
        require(n <= INT64_MAX && n >= INT64_MIN && d <= INT64_MAX, "Fraction: overflow");
        Fraction f;
        f.num = static_cast<long long>(n);
        f.den = static_cast<long long>(d);
        return f;
    }

    Fraction operator+(const Fraction& o) const {
        return from_128(static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den,
                        static_cast<__int128>(den) * o.den);
    }
    Fraction operator-(const Fraction& o) const {
        return from_128(static_cast<__int128>(num) * o.den - static_cast<__int128>(o.num) * den,
                        static_cast<__int128>(den) * o.den);
    }
    Fraction operator*(const Fraction& o) const {
        return from_128(static_cast<__int128>(num) * o.num, static_cast<__int128>(den) * o.den);
    }
    Fraction operator/(const Fraction& o) const {
        require(o.num != 0, "Fraction: division by zero");
        return from_128(static_cast<__int128>(num) * o.den, static_cast<__int128>(den) * o.num);
    }
    Fraction operator-() const {
        Fraction f = *this;
        f.num = -f.num;
        return f;
    }
    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
    bool zero() const { return num == 0; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const {
        return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
    }
};

}  // namespace sclab
