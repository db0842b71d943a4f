#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace hytccp {

using Rational = boost::multiprecision::cpp_rational;

inline std::string to_string(const Rational& q) {
    if (boost::multiprecision::denominator(q) == 1) return boost::multiprecision::numerator(q).str();
    return numerator(q).str() + "/" + denominator(q).str();
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

/// Parses "p", "p/q" or a finite decimal literal ("12.5", "-0.25") exactly.
inline Rational parse_rational(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("empty rational literal");
    std::string s(text);
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        i = 1;
    }
    auto digits = [&](std::size_t from, std::size_t to) {
        if (from >= to) throw std::invalid_argument("malformed rational literal '" + s + "'");
        for (std::size_t k = from; k < to; ++k)
            if (s[k] < '0' || s[k] > '9') throw std::invalid_argument("malformed rational literal '" + s + "'");
        return boost::multiprecision::cpp_int(s.substr(from, to - from));
    };
    Rational out;
    if (auto slash = s.find('/'); slash != std::string::npos) {
        auto den = digits(slash + 1, s.size());
        if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
        out = Rational(digits(i, slash), den);
    } else if (auto dot = s.find('.'); dot != std::string::npos) {
        boost::multiprecision::cpp_int whole = dot > i ? digits(i, dot) : 0;
        auto frac_len = s.size() - dot - 1;
        boost::multiprecision::cpp_int frac = digits(dot + 1, s.size());
        boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                          static_cast<unsigned>(frac_len));
        out = Rational(whole * scale + frac, scale);
    } else {
        out = Rational(digits(i, s.size()));
    }
    return neg ? Rational(-out) : out;
}

/// Tolerance used whenever an inexact (floating point) value meets a comparison.
inline constexpr double kFloatTolerance = 1e-9;

/// A real that stays an exact rational until an exponential flow forces a double.
class Number {
public:
    Number() : rep_(Rational(0)) {}
    Number(Rational q) : rep_(std::move(q)) {}
    Number(int v) : rep_(Rational(v)) {}
    static Number inexact(double d) { return Number(Tag{}, d); }

    bool exact() const { return std::holds_alternative<Rational>(rep_); }
    const Rational& rational() const { return std::get<Rational>(rep_); }
    double to_double() const { return exact() ? hytccp::to_double(rational()) : std::get<double>(rep_); }

    friend Number operator+(const Number& a, const Number& b) {
        if (a.exact() && b.exact()) return Number(Rational(a.rational() + b.rational()));
        return inexact(a.to_double() + b.to_double());
    }
    friend Number operator-(const Number& a, const Number& b) {
        if (a.exact() && b.exact()) return Number(Rational(a.rational() - b.rational()));
        return inexact(a.to_double() - b.to_double());
    }
    friend Number operator*(const Number& a, const Number& b) {
        if (a.exact() && b.exact()) return Number(Rational(a.rational() * b.rational()));
        return inexact(a.to_double() * b.to_double());
    }
    friend Number operator/(const Number& a, const Number& b) {
        if (a.exact() && b.exact()) return Number(Rational(a.rational() / b.rational()));
        return inexact(a.to_double() / b.to_double());
    }
    Number operator-() const { return exact() ? Number(Rational(-rational())) : inexact(-to_double()); }

    /// Three-way comparison; inexact operands compare equal within kFloatTolerance (relative, floor 1).
    friend int compare(const Number& a, const Number& b) {
        if (a.exact() && b.exact()) return a.rational() < b.rational() ? -1 : (a.rational() > b.rational() ? 1 : 0);
        double x = a.to_double(), y = b.to_double();
        double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
        if (std::fabs(x - y) <= kFloatTolerance * scale) return 0;
        return x < y ? -1 : 1;
    }
    friend bool operator==(const Number& a, const Number& b) { return compare(a, b) == 0; }
    friend bool operator<(const Number& a, const Number& b) { return compare(a, b) < 0; }
    friend bool operator<=(const Number& a, const Number& b) { return compare(a, b) <= 0; }
    friend bool operator>(const Number& a, const Number& b) { return compare(a, b) > 0; }
    friend bool operator>=(const Number& a, const Number& b) { return compare(a, b) >= 0; }

    /// Bitwise identity (exactness and representation), used for configuration equality.
    bool identical(const Number& o) const {
        if (exact() != o.exact()) return false;
        return exact() ? rational() == o.rational() : std::get<double>(rep_) == std::get<double>(o.rep_);
    }

    /// "p/q" (or "p") when exact, shortest round-trip decimal otherwise.
    std::string str() const {
        if (exact()) return hytccp::to_string(rational());
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(rep_));
        return buf;
    }

private:
    struct Tag {};
    Number(Tag, double d) : rep_(d) {}
    std::variant<Rational, double> rep_;
};

}  // namespace hytccp
