#pragma once

// Brute-force cross-check. A stage-J tower is laid out on the line with level
// l = [l w_J, (l+1) w_J), T becomes a piecewise translation, and mu(T^n A ∩ B)
// is computed by composing translations and intersecting intervals.
//
// Sets given at an earlier stage are expanded by walking each stage-J level
// down to its ancestor, using only the cutting data. Nothing here calls into
// stepcalc.

#include "construction.hpp"
#include "rational.hpp"
#include "stepcalc.hpp"  // TowerSet only

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankone {

/// Half-open interval [lo, hi).
struct Interval {
    Rational lo;
    Rational hi;

    Rational length() const { return hi - lo; }
    bool empty() const { return !(lo < hi); }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted, disjoint, non-adjacent intervals.
using IntervalSet = std::vector<Interval>;

inline IntervalSet normalize(IntervalSet s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](const Interval& i) { return i.empty(); }), s.end());
    std::sort(s.begin(), s.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    IntervalSet out;
    for (auto& i : s) {
        if (!out.empty() && out.back().hi >= i.lo)
            out.back().hi = rankone::max(out.back().hi, i.hi);
        else
            out.push_back(std::move(i));
    }
    return out;
}

inline Rational measure(const IntervalSet& s) {
    Rational m = 0;
    for (const auto& i : s) m += i.length();
    return m;
}

inline IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
    IntervalSet out;
    std::size_t i = 0, k = 0;
    while (i < a.size() && k < b.size()) {
        Interval x{rankone::max(a[i].lo, b[k].lo), rankone::min(a[i].hi, b[k].hi)};
        if (!x.empty()) out.push_back(std::move(x));
        if (a[i].hi < b[k].hi)
            ++i;
        else
            ++k;
    }
    return out;
}

struct Translation {
    Interval source;
    Rational offset;
};

/// A partial map x -> x + offset on disjoint source intervals.
class PiecewiseTranslation {
public:
    PiecewiseTranslation() = default;
    explicit PiecewiseTranslation(std::vector<Translation> pieces) : pieces_(std::move(pieces)) { tidy(); }

    static PiecewiseTranslation identity(const Interval& domain) { return PiecewiseTranslation({Translation{domain, 0}}); }

    const std::vector<Translation>& pieces() const { return pieces_; }

    IntervalSet domain() const {
        IntervalSet d;
        for (const auto& p : pieces_) d.push_back(p.source);
        return normalize(d);
    }

    IntervalSet range() const {
        IntervalSet r;
        for (const auto& p : pieces_) r.push_back({p.source.lo + p.offset, p.source.hi + p.offset});
        return normalize(r);
    }

    /// Sources pairwise disjoint and images pairwise disjoint.
    bool injective() const {
        auto disjoint = [](std::vector<Interval> v) {
            std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
            for (std::size_t i = 1; i < v.size(); ++i)
                if (v[i].lo < v[i - 1].hi) return false;
            return true;
        };
        std::vector<Interval> src, img;
        for (const auto& p : pieces_) {
            src.push_back(p.source);
            img.push_back({p.source.lo + p.offset, p.source.hi + p.offset});
        }
        return disjoint(src) && disjoint(img);
    }

    PiecewiseTranslation inverse() const {
        std::vector<Translation> out;
        for (const auto& p : pieces_) out.push_back({{p.source.lo + p.offset, p.source.hi + p.offset}, -p.offset});
        return PiecewiseTranslation(std::move(out));
    }

    /// outer ∘ inner, defined where inner is defined and lands in outer's domain.
    friend PiecewiseTranslation compose(const PiecewiseTranslation& outer, const PiecewiseTranslation& inner) {
        std::vector<Translation> out;
        const auto& q = outer.pieces_;
        for (const auto& p : inner.pieces_) {
            const Rational lo = p.source.lo + p.offset;
            const Rational hi = p.source.hi + p.offset;
            auto it = std::upper_bound(q.begin(), q.end(), lo, [](const Rational& x, const Translation& t) { return x < t.source.lo; });
            if (it != q.begin()) --it;
            for (; it != q.end() && it->source.lo < hi; ++it) {
                const Rational a = rankone::max(lo, it->source.lo);
                const Rational b = rankone::min(hi, it->source.hi);
                if (a < b) out.push_back({{a - p.offset, b - p.offset}, p.offset + it->offset});
            }
        }
        return PiecewiseTranslation(std::move(out));
    }

    /// Image of a set and the measure of its part outside the domain.
    std::pair<IntervalSet, Rational> apply(const IntervalSet& s) const {
        IntervalSet image;
        IntervalSet covered;
        for (const auto& p : pieces_) {
            for (const auto& part : intersect(s, IntervalSet{p.source})) {
                covered.push_back(part);
                image.push_back({part.lo + p.offset, part.hi + p.offset});
            }
        }
        return {normalize(image), measure(s) - measure(normalize(covered))};
    }

private:
    void tidy() {
        pieces_.erase(std::remove_if(pieces_.begin(), pieces_.end(), [](const Translation& t) { return t.source.empty(); }), pieces_.end());
        std::sort(pieces_.begin(), pieces_.end(), [](const Translation& a, const Translation& b) { return a.source.lo < b.source.lo; });
        std::vector<Translation> merged;
        for (auto& p : pieces_) {
            if (!merged.empty() && merged.back().source.hi == p.source.lo && merged.back().offset == p.offset)
                merged.back().source.hi = p.source.hi;
            else
                merged.push_back(std::move(p));
        }
        pieces_ = std::move(merged);
    }

    std::vector<Translation> pieces_;
};

/// One translation per level 0..h_J-2; the top level is left undefined.
inline std::vector<Translation> realize(const Construction& c, int J) {
    const std::int64_t h = c.height(J);
    const Rational w = c.width(J);
    std::vector<Translation> pieces;
    for (std::int64_t l = 0; l + 1 < h; ++l) pieces.push_back({{from_int(l) * w, from_int(l + 1) * w}, w});
    return pieces;
}

/// realize() as a map, adjacent pieces merged.
inline PiecewiseTranslation realize_map(const Construction& c, int J) { return PiecewiseTranslation(realize(c, J)); }

/// The full stage-J tower [0, h_J w_J).
inline Interval tower_extent(const Construction& c, int J) { return {0, from_int(c.height(J)) * c.width(J)}; }

/// T^n for |n| < h_J by repeated squaring; n < 0 uses the inverse map.
inline PiecewiseTranslation realize_power(const Construction& c, int J, std::int64_t n) {
    PiecewiseTranslation base = realize_map(c, J);
    if (n < 0) {
        base = base.inverse();
        n = -n;
    }
    PiecewiseTranslation result = PiecewiseTranslation::identity(tower_extent(c, J));
    while (n > 0) {
        if (n & 1) result = compose(base, result);
        n >>= 1;
        if (n) base = compose(base, base);
    }
    return result;
}

/// Levels of stage J, as intervals, whose ancestor at the set's stage lies in the set.
inline IntervalSet expand_to_stage(const Construction& c, const TowerSet& A, int J) {
    if (J < A.stage) throw std::invalid_argument("set lives above the oracle stage");
    // column start positions rebuilt from the cutting data
    std::vector<std::vector<std::int64_t>> starts(static_cast<std::size_t>(J + 1));
    for (int j = A.stage + 1; j <= J; ++j) {
        const StageParams& p = c.cut(j - 1);
        std::int64_t at = 0;
        for (std::int64_t s : p.spacers) {
            starts[static_cast<std::size_t>(j)].push_back(at);
            at += c.height(j - 1) + s;
        }
    }
    const Rational w = c.width(J);
    IntervalSet out;
    for (std::int64_t L = 0; L < c.height(J); ++L) {
        std::int64_t l = L;
        bool inside = true;
        for (int j = J; j > A.stage && inside; --j) {
            const auto& st = starts[static_cast<std::size_t>(j)];
            std::size_t col = st.size() - 1;
            while (st[col] > l) --col;
            l -= st[col];
            inside = l < c.height(j - 1);
        }
        if (inside && std::binary_search(A.levels.begin(), A.levels.end(), l)) out.push_back({from_int(L) * w, from_int(L + 1) * w});
    }
    return normalize(out);
}

struct OracleResult {
    Rational value;            // mu(T^n A ∩ B) on the part of A where T^n is defined
    Rational undefined_mass;   // mu of the part of A where T^n is undefined
    bool fully_undefined = false;
};

/// Cache of T^n at one stage, built by composing with T one step at a time.
class OraclePowers {
public:
    OraclePowers(const Construction& c, int J) : c_(c), J_(J), step_(realize_map(c, J)), back_(step_.inverse()) {
        forward_.push_back(PiecewiseTranslation::identity(tower_extent(c, J)));
        backward_.push_back(forward_.front());
    }

    int stage() const { return J_; }

    /// T^n; empty map once |n| >= h_J.
    const PiecewiseTranslation& power(std::int64_t n) {
        auto& cache = n >= 0 ? forward_ : backward_;
        const auto& step = n >= 0 ? step_ : back_;
        const auto k = static_cast<std::size_t>(n >= 0 ? n : -n);
        while (cache.size() <= k) cache.push_back(compose(step, cache.back()));
        return cache[k];
    }

    OracleResult correlation(std::int64_t n, const TowerSet& A, const TowerSet& B) {
        const IntervalSet a = expand_to_stage(c_, A, J_);
        const IntervalSet b = expand_to_stage(c_, B, J_);
        if (n >= c_.height(J_) || -n >= c_.height(J_)) return {0, measure(a), true};
        const auto [image, lost] = power(n).apply(a);
        return {measure(intersect(image, b)), lost, false};
    }

private:
    const Construction& c_;
    int J_;
    PiecewiseTranslation step_;
    PiecewiseTranslation back_;
    std::vector<PiecewiseTranslation> forward_;
    std::vector<PiecewiseTranslation> backward_;
};

inline OracleResult oracle_correlation(const Construction& c, int J, std::int64_t n, const TowerSet& A, const TowerSet& B) {
    const IntervalSet a = expand_to_stage(c, A, J);
    const IntervalSet b = expand_to_stage(c, B, J);
    if (n >= c.height(J) || -n >= c.height(J)) return {0, measure(a), true};
    const auto [image, lost] = realize_power(c, J, n).apply(a);
    return {measure(intersect(image, b)), lost, false};
}

}  // namespace rankone
