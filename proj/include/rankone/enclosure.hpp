#pragma once

#include "rational.hpp"

#include <algorithm>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rankone {

/// A closed rational interval [lo, hi] certified to contain some real quantity.
/// Arithmetic is exact on the endpoints, hence trivially outward-rounded.
class Enclosure {
public:
    Enclosure() = default;
    explicit Enclosure(Rational point) : lo_(point), hi_(lo_) {}
    Enclosure(Rational lo, Rational hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
        if (hi_ < lo_) throw std::invalid_argument("enclosure with hi < lo");
    }

    const Rational& lo() const { return lo_; }
    const Rational& hi() const { return hi_; }
    Rational width() const { return hi_ - lo_; }
    Rational midpoint() const { return (lo_ + hi_) / 2; }
    bool is_point() const { return lo_ == hi_; }

    bool contains(const Rational& x) const { return lo_ <= x && x <= hi_; }
    bool contains(const Enclosure& other) const { return lo_ <= other.lo_ && other.hi_ <= hi_; }
    bool overlaps(const Enclosure& other) const { return !(hi_ < other.lo_ || other.hi_ < lo_); }

    Enclosure operator-() const { return {-hi_, -lo_}; }
    Enclosure& operator+=(const Enclosure& o) {
        lo_ += o.lo_;
        hi_ += o.hi_;
        return *this;
    }
    Enclosure& operator-=(const Enclosure& o) {
        lo_ -= o.hi_;
        hi_ -= o.lo_;
        return *this;
    }
    friend Enclosure operator+(Enclosure a, const Enclosure& b) { return a += b; }
    friend Enclosure operator-(Enclosure a, const Enclosure& b) { return a -= b; }

    friend Enclosure operator*(const Enclosure& a, const Enclosure& b) {
        const Rational p[] = {a.lo_ * b.lo_, a.lo_ * b.hi_, a.hi_ * b.lo_, a.hi_ * b.hi_};
        return {*std::min_element(std::begin(p), std::end(p)), *std::max_element(std::begin(p), std::end(p))};
    }
    friend Enclosure operator*(const Rational& s, const Enclosure& a) {
        return s >= 0 ? Enclosure(s * a.lo_, s * a.hi_) : Enclosure(s * a.hi_, s * a.lo_);
    }

    /// Division by an enclosure that excludes zero.
    friend Enclosure operator/(const Enclosure& a, const Enclosure& b) {
        if (b.contains(Rational(0))) throw std::domain_error("division by an enclosure containing zero");
        return a * Enclosure(1 / b.hi_, 1 / b.lo_);
    }

    Enclosure abs() const {
        if (lo_ >= 0) return *this;
        if (hi_ <= 0) return -*this;
        return {Rational(0), rankone::max(-lo_, hi_)};
    }

    /// Intersection of two enclosures of the same real; they must overlap.
    Enclosure intersect(const Enclosure& o) const {
        if (!overlaps(o)) throw std::logic_error("disjoint enclosures of one quantity");
        return {rankone::max(lo_, o.lo_), rankone::min(hi_, o.hi_)};
    }
    Enclosure hull(const Enclosure& o) const { return {rankone::min(lo_, o.lo_), rankone::max(hi_, o.hi_)}; }

    Enclosure clamp_below(const Rational& floor) const {
        return {rankone::max(lo_, floor), rankone::max(hi_, floor)};
    }

    friend bool operator==(const Enclosure& a, const Enclosure& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }

    friend std::ostream& operator<<(std::ostream& os, const Enclosure& e) {
        return os << '[' << e.lo_.get_str() << ", " << e.hi_.get_str() << ']';
    }

private:
    Rational lo_{0};
    Rational hi_{0};
};

/// Smallest enclosure holding all the given points.
inline Enclosure hull_of(std::initializer_list<Rational> points) {
    return {std::min(points), std::max(points)};
}

}  // namespace rankone
