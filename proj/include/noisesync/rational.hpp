// rational.hpp - small exact rationals for closed-form decay constants
#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>

#include "errors.hpp"

namespace noisesync {

class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
        if (den_ == 0) throw NumericalError("rational: zero denominator");
        normalize();
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return double(num_) / double(den_); }

    friend Rational operator+(Rational a, Rational b) {
        return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
    }
    friend Rational operator-(Rational a, Rational b) {
        return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_};
    }
    friend Rational operator*(Rational a, Rational b) { return {a.num_ * b.num_, a.den_ * b.den_}; }
    friend Rational operator/(Rational a, Rational b) {
        if (b.num_ == 0) throw NumericalError("rational: division by zero");
        return {a.num_ * b.den_, a.den_ * b.num_};
    }
    friend bool operator==(Rational a, Rational b) = default;

    std::string str() const {
        return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
    }
    friend std::ostream& operator<<(std::ostream& os, Rational r) { return os << r.str(); }

private:
    void normalize() {
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        const std::int64_t g = std::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

// sin^2(p pi / q) when it is rational, i.e. when the reduced denominator is
// one of 1, 2, 3, 4, 6.
inline std::optional<Rational> rational_sin_squared(std::int64_t p, std::int64_t q) {
    if (q <= 0) throw PreconditionError("rational_sin_squared: q must be positive");
    p %= q;  // sin^2 has period pi
    if (p < 0) p += q;
    if (p == 0) return Rational(0);
    const std::int64_t g = std::gcd(p, q);
    const std::int64_t qr = q / g;
    switch (qr) {
        case 2: return Rational(1);
        case 3: return Rational(3, 4);
        case 4: return Rational(1, 2);
        case 6: return Rational(1, 4);
        default: return std::nullopt;
    }
}

}  // namespace noisesync
