#pragma once

// Truncated Halmos metric rho, weak metric d_w, and a lower bound on the
// Alpern-Tikhonov metric r = rho + sup_n d_w(S^n, T^n), for two constructions
// that share their first P stages.
//
// The set family {A_i} is the canonical enumeration of levels: stage 1 levels
// bottom to top, then stage 2, and so on. Term i carries weight 2^-i.
//
// rho compares images S A and T A as subsets of one space. Both constructions
// are laid out on the real line: stage 1 occupies [0, 1), each cut keeps the
// i-th subinterval of every level in column i, and spacers added while
// cutting stage j are appended after X_j in column order. Every level is then
// a single interval, and spaces sharing a prefix coincide on X_P.

#include "construction.hpp"
#include "enclosure.hpp"
#include "stepcalc.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rankone {

class PrefixMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_shared_prefix(const Construction& S, const Construction& T, int P) {
    if (P < 1) throw PrefixMismatch("shared prefix must contain stage 1");
    if (S.params().h1 != T.params().h1) throw PrefixMismatch("initial heights differ");
    for (int j = 1; j < P; ++j)
        if (!(S.cut(j) == T.cut(j))) throw PrefixMismatch("cutting data differ at stage " + std::to_string(j));
}

/// First D sets of the canonical level enumeration restricted to stages <= P.
inline std::vector<TowerSet> canonical_family(const Construction& c, int P, int D) {
    if (D < 1) throw std::invalid_argument("family depth must be >= 1");
    std::vector<TowerSet> out;
    for (int j = 1; j <= P && static_cast<int>(out.size()) < D; ++j)
        for (Level l = 0; l < c.height(j) && static_cast<int>(out.size()) < D; ++l) out.push_back(TowerSet{j, {l}});
    return out;
}

/// Left endpoints of levels in the real-line layout.
class Layout {
public:
    explicit Layout(const Construction& c) : c_(c) {}

    Rational position(int J, Level L) {
        Rational x = 0;
        for (int s = J; s > 1; --s) {
            const Stage& st = c_.stage(s);
            const auto it = std::upper_bound(st.offsets.begin(), st.offsets.end(), L);
            const auto col = static_cast<std::size_t>(it - st.offsets.begin() - 1);
            const Level t = L - st.offsets[col];
            const std::int64_t below = c_.height(s - 1);
            if (t < below) {
                x += from_int(static_cast<std::int64_t>(col)) * st.width;
                L = t;
                continue;
            }
            const auto& prefix = spacer_prefix(s - 1);
            return x + c_.stage(s - 1).total_mass + from_int(prefix[col] + (t - below)) * st.width;
        }
        return x + from_int(L) * c_.width(1);
    }

private:
    const std::vector<std::int64_t>& spacer_prefix(int j) {
        if (prefix_.size() < static_cast<std::size_t>(j)) prefix_.resize(static_cast<std::size_t>(j));
        auto& p = prefix_[static_cast<std::size_t>(j - 1)];
        if (p.empty()) {
            const auto& sp = c_.cut(j).spacers;
            p.assign(sp.size(), 0);
            for (std::size_t i = 1; i < sp.size(); ++i) p[i] = p[i - 1] + sp[i - 1];
        }
        return p;
    }

    const Construction& c_;
    std::vector<std::vector<std::int64_t>> prefix_;
};

namespace detail {

struct Span {
    Rational lo;
    Rational hi;
};

inline std::vector<Span> merged_spans(Layout& layout, int J, const Rational& width, const std::vector<Level>& levels) {
    std::vector<Span> spans;
    spans.reserve(levels.size());
    for (Level l : levels) {
        Rational x = layout.position(J, l);
        spans.push_back({x, x + width});
    }
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.lo < b.lo; });
    std::vector<Span> out;
    for (auto& s : spans) {
        if (!out.empty() && out.back().hi >= s.lo)
            out.back().hi = rankone::max(out.back().hi, s.hi);
        else
            out.push_back(std::move(s));
    }
    return out;
}

inline Rational span_measure(const std::vector<Span>& a) {
    Rational m = 0;
    for (const auto& s : a) m += s.hi - s.lo;
    return m;
}

inline Rational overlap_measure(const std::vector<Span>& a, const std::vector<Span>& b) {
    Rational m = 0;
    std::size_t i = 0, k = 0;
    while (i < a.size() && k < b.size()) {
        const Rational lo = rankone::max(a[i].lo, b[k].lo);
        const Rational hi = rankone::min(a[i].hi, b[k].hi);
        if (lo < hi) m += hi - lo;
        if (a[i].hi < b[k].hi)
            ++i;
        else
            ++k;
    }
    return m;
}

/// Image of A under T^step at stage J: merged spans and unresolved mass.
inline std::pair<std::vector<Span>, Rational> image_spans(const Construction& c, Layout& layout, const TowerSet& A, std::int64_t step, int J) {
    const auto levels = refine_levels(c, A.levels, A.stage, J);
    const auto shifted = shift_levels(levels, step, c.height(J));
    return {merged_spans(layout, J, c.width(J), shifted.resolved), from_int(shifted.unresolved) * c.width(J)};
}

/// mu(S^step A Δ T^step A) at stage J.
inline Enclosure symmetric_difference_at(const Construction& S, Layout& LS, const Construction& T, Layout& LT, const TowerSet& A, std::int64_t step, int J) {
    auto [rs, us] = image_spans(S, LS, A, step, J);
    auto [rt, ut] = image_spans(T, LT, A, step, J);
    const Rational d = span_measure(rs) + span_measure(rt) - 2 * overlap_measure(rs, rt);
    const Rational slack = us + ut;
    return {rankone::max(Rational(0), d - slack), d + slack};
}

}  // namespace detail

struct MetricOptions {
    Rational tol{1, 1000};
    Budget budget;
};

/// Truncated rho with the family tail 2^{-D+1} added to hi.
inline Enclosure halmos_rho(const Construction& S, const Construction& T, int P, int D, const MetricOptions& opt = {}) {
    require_shared_prefix(S, T, P);
    const auto family = canonical_family(S, P, D);
    const Rational tail = pow2(1 - static_cast<long>(family.size()));
    Layout LS(S), LT(T);
    std::optional<Enclosure> best;
    for (int J = P;; ++J) {
        Enclosure sum(Rational(0));
        for (std::size_t i = 0; i < family.size(); ++i) {
            const Rational weight = pow2(-static_cast<long>(i + 1));
            sum += weight * (detail::symmetric_difference_at(S, LS, T, LT, family[i], 1, J) + detail::symmetric_difference_at(S, LS, T, LT, family[i], -1, J));
        }
        best = best ? best->intersect(sum) : sum;
        if (best->width() <= opt.tol || J >= opt.budget.max_stage) break;
        std::size_t next = 0;
        for (const auto& A : family)
            next = std::max({next, detail::refined_size(S, A.levels.size(), A.stage, J + 1), detail::refined_size(T, A.levels.size(), A.stage, J + 1)});
        if (next > opt.budget.max_levels) break;
    }
    return {best->lo(), best->hi() + tail};
}

namespace detail {

/// d_w terms at one working stage.
inline Enclosure weak_dw_at(const Construction& S, const Construction& T, std::int64_t n, const std::vector<TowerSet>& family, int J) {
    auto refined = [&](const Construction& c) {
        std::vector<std::vector<Level>> out;
        for (const auto& A : family) out.push_back(refine_levels(c, A.levels, A.stage, J));
        return out;
    };
    const auto fs = refined(S);
    const auto ft = refined(T);
    const Rational& ws = S.width(J);
    const Rational& wt = T.width(J);
    Enclosure sum(Rational(0));
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto ss = shift_levels(fs[i], n, S.height(J));
        const auto st = shift_levels(ft[i], n, T.height(J));
        for (std::size_t k = 0; k < family.size(); ++k) {
            const std::int64_t hs = count_common(ss.resolved, fs[k]);
            const std::int64_t ht = count_common(st.resolved, ft[k]);
            const Enclosure xs(from_int(hs) * ws, from_int(hs + ss.unresolved) * ws);
            const Enclosure xt(from_int(ht) * wt, from_int(ht + st.unresolved) * wt);
            sum += pow2(-static_cast<long>(i + k + 2)) * (xs - xt).abs();
        }
    }
    return sum;
}

}  // namespace detail

/// Truncated d_w(S^n, T^n) with the family tail 2^{-D+2} added to hi.
inline Enclosure weak_dw(const Construction& S, const Construction& T, std::int64_t n, int P, int D, const MetricOptions& opt = {}) {
    require_shared_prefix(S, T, P);
    if (n < 0) throw std::invalid_argument("power must be >= 0");
    const auto family = canonical_family(S, P, D);
    const Rational tail = pow2(2 - static_cast<long>(family.size()));
    std::optional<Enclosure> best;
    for (int J = P;; ++J) {
        const Enclosure e = detail::weak_dw_at(S, T, n, family, J);
        best = best ? best->intersect(e) : e;
        if (best->width() <= opt.tol || J >= opt.budget.max_stage) break;
        std::size_t next = 0;
        for (const auto& A : family)
            next = std::max({next, detail::refined_size(S, A.levels.size(), A.stage, J + 1), detail::refined_size(T, A.levels.size(), A.stage, J + 1)});
        if (next > opt.budget.max_levels) break;
    }
    return {best->lo(), best->hi() + tail};
}

struct MetricBound {
    Enclosure value;  // rho + max_{1<=n<=N} d_w
    Enclosure rho;
    std::vector<Enclosure> dw;  // n = 1..N
    /// The supremum over all n > 0 is never certified; value.lo bounds r from below.
    bool lower_bound_only = true;
};

inline MetricBound at_metric_lower(const Construction& S, const Construction& T, int P, int D, int N, const MetricOptions& opt = {}) {
    MetricBound out;
    out.rho = halmos_rho(S, T, P, D, opt);
    Rational lo = 0, hi = 0;
    for (int n = 1; n <= N; ++n) {
        out.dw.push_back(weak_dw(S, T, n, P, D, opt));
        lo = rankone::max(lo, out.dw.back().lo());
        hi = rankone::max(hi, out.dw.back().hi());
    }
    out.value = out.rho + Enclosure(lo, hi);
    return out;
}

}  // namespace rankone
