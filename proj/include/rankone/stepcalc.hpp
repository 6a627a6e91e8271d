#pragma once

// Exact calculus of level sets and step functions over a Construction.
//
// Everything here is certified: a quantity computed at working stage J is
// returned as an Enclosure. T^n is known exactly on every level whose image
// stays inside the stage-J tower; the remaining levels are "unresolved" and
// only their mass and value range are carried along.

#include "construction.hpp"
#include "enclosure.hpp"
#include "rational.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rankone {

/// Limits for adaptive refinement.
struct Budget {
    int max_stage = 40;
    /// Largest refined level list materialized for one set.
    std::size_t max_levels = std::size_t{1} << 24;
};

/// A finite union of levels of one stage.
struct TowerSet {
    int stage = 1;
    std::vector<Level> levels;  // sorted, unique

    static TowerSet of(int stage, std::vector<Level> levels) {
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        return TowerSet{stage, std::move(levels)};
    }

    bool empty() const { return levels.empty(); }

    void validate(const Construction& c) const {
        const std::int64_t h = c.height(stage);
        for (Level l : levels)
            if (l < 0 || l >= h)
                throw std::out_of_range("level " + std::to_string(l) + " outside stage " + std::to_string(stage) + " of height " + std::to_string(h));
    }

    Rational measure(const Construction& c) const { return from_int(static_cast<std::int64_t>(levels.size())) * c.width(stage); }

    friend bool operator==(const TowerSet&, const TowerSet&) = default;
};

namespace detail {

inline std::size_t saturating_mul(std::size_t a, std::size_t b) {
    std::size_t out;
    return __builtin_mul_overflow(a, b, &out) ? std::numeric_limits<std::size_t>::max() : out;
}

/// Number of stage-`to` levels a list of `count` stage-`from` levels refines into.
inline std::size_t refined_size(const Construction& c, std::size_t count, int from, int to) {
    for (int j = from; j < to; ++j) count = saturating_mul(count, static_cast<std::size_t>(c.cut(j).cuts));
    return count;
}

/// One refinement step j -> j+1; keeps the output sorted.
inline std::vector<Level> refine_once(const Construction& c, const std::vector<Level>& levels, int j) {
    const Stage& next = c.stage(j + 1);
    std::vector<Level> out;
    out.reserve(levels.size() * next.offsets.size());
    for (Level o : next.offsets)
        for (Level l : levels) out.push_back(o + l);
    return out;
}

inline std::vector<Level> refine_levels(const Construction& c, std::vector<Level> levels, int from, int to) {
    for (int j = from; j < to; ++j) levels = refine_once(c, levels, j);
    return levels;
}

struct ShiftedLevels {
    std::vector<Level> resolved;  // images, sorted
    std::int64_t unresolved = 0;  // source levels whose image leaves the tower
};

/// Images of sorted levels under T^n inside a tower of the given height.
inline ShiftedLevels shift_levels(const std::vector<Level>& levels, std::int64_t n, std::int64_t height) {
    ShiftedLevels out;
    out.resolved.reserve(levels.size());
    for (Level l : levels) {
        const Level t = l + n;
        if (t >= 0 && t < height)
            out.resolved.push_back(t);
        else
            ++out.unresolved;
    }
    return out;
}

inline std::int64_t count_common(const std::vector<Level>& a, const std::vector<Level>& b) {
    std::int64_t n = 0;
    auto i = a.begin();
    auto k = b.begin();
    while (i != a.end() && k != b.end()) {
        if (*i < *k)
            ++i;
        else if (*k < *i)
            ++k;
        else {
            ++n;
            ++i;
            ++k;
        }
    }
    return n;
}

inline void check_stage_not_below(int J, int stage) {
    if (J < stage) throw std::invalid_argument("target stage " + std::to_string(J) + " below source stage " + std::to_string(stage));
}

}  // namespace detail

inline TowerSet refine_set(const Construction& c, const TowerSet& A, int target_stage) {
    detail::check_stage_not_below(target_stage, A.stage);
    return TowerSet{target_stage, detail::refine_levels(c, A.levels, A.stage, target_stage)};
}

/// Unresolved part of a step function: an unknown error term e with
/// lo <= e <= hi (lo <= 0 <= hi) supported on a set of measure <= mass.
struct Residual {
    Rational mass;
    Rational lo;
    Rational hi;

    Rational sup() const { return rankone::max(-lo, hi); }
    Enclosure range() const { return {lo, hi}; }
};

/// A function constant on the levels of one stage, plus certified residual terms.
/// The represented function is sum(values[l] * 1_level(l)) + sum(residual errors).
struct StepFunction {
    int stage = 1;
    std::map<Level, Rational> values;
    std::vector<Residual> residuals;

    static StepFunction indicator(const TowerSet& A) {
        StepFunction f;
        f.stage = A.stage;
        for (Level l : A.levels) f.values.emplace(l, 1);
        return f;
    }

    bool exact() const { return residuals.empty(); }

    Rational residual_mass() const {
        Rational m = 0;
        for (const auto& r : residuals) m += r.mass;
        return m;
    }
    Rational residual_sup() const {
        Rational s = 0;
        for (const auto& r : residuals) s += r.sup();
        return s;
    }
    Rational value_sup() const {
        Rational s = 0;
        for (const auto& [l, v] : values) s = rankone::max(s, rankone::abs(v));
        return s;
    }
    /// Bound on |f| everywhere; residual terms may overlap resolved levels.
    Rational sup_bound() const { return value_sup() + residual_sup(); }

    /// Range of the resolved part, widened to contain 0 (it vanishes off its levels).
    Enclosure value_range() const {
        Rational lo = 0, hi = 0;
        for (const auto& [l, v] : values) {
            lo = rankone::min(lo, v);
            hi = rankone::max(hi, v);
        }
        return {lo, hi};
    }

    Enclosure integral(const Construction& c) const {
        Rational sum = 0;
        for (const auto& [l, v] : values) sum += v;
        Enclosure out(sum * c.width(stage));
        for (const auto& r : residuals) out += r.mass * r.range();
        return out;
    }

    void drop_zeros() {
        for (auto it = values.begin(); it != values.end();)
            it = it->second == 0 ? values.erase(it) : std::next(it);
    }
};

inline StepFunction refine(const Construction& c, const StepFunction& f, int target_stage) {
    detail::check_stage_not_below(target_stage, f.stage);
    StepFunction out = f;
    for (int j = f.stage; j < target_stage; ++j) {
        const Stage& next = c.stage(j + 1);
        std::map<Level, Rational> refined;
        for (const auto& [l, v] : out.values)
            for (Level o : next.offsets) refined.emplace_hint(refined.end(), o + l, v);
        out.values = std::move(refined);
        out.stage = j + 1;
    }
    return out;
}

inline StepFunction scale(const Rational& alpha, StepFunction f) {
    for (auto& [l, v] : f.values) v *= alpha;
    for (auto& r : f.residuals) {
        Enclosure e = alpha * r.range();
        r.lo = e.lo();
        r.hi = e.hi();
    }
    f.drop_zeros();
    return f;
}

inline StepFunction add(const Construction& c, const StepFunction& f, const StepFunction& g) {
    const int J = std::max(f.stage, g.stage);
    StepFunction out = refine(c, f, J);
    const StepFunction gg = refine(c, g, J);
    for (const auto& [l, v] : gg.values) out.values[l] += v;
    out.residuals.insert(out.residuals.end(), gg.residuals.begin(), gg.residuals.end());
    out.drop_zeros();
    return out;
}

/// T^n f at working stage J, where (T^n f)(x) = f(T^{-n} x), so the indicator
/// of A goes to the indicator of T^n A. Levels whose image leaves the tower
/// become one new residual term; existing residuals are carried unchanged.
inline StepFunction shift(const Construction& c, const StepFunction& f, std::int64_t n, int J) {
    detail::check_stage_not_below(J, f.stage);
    const std::int64_t h = c.height(J);
    if (n >= h || -n >= h)
        throw std::out_of_range("shift " + std::to_string(n) + " not below stage " + std::to_string(J) + " height " + std::to_string(h));
    const StepFunction src = refine(c, f, J);
    StepFunction out;
    out.stage = J;
    out.residuals = src.residuals;
    std::int64_t lost = 0;
    Rational lost_lo = 0, lost_hi = 0;
    for (const auto& [l, v] : src.values) {
        const Level t = l + n;
        if (t >= 0 && t < h) {
            out.values.emplace(t, v);
        } else {
            ++lost;
            lost_lo = rankone::min(lost_lo, v);
            lost_hi = rankone::max(lost_hi, v);
        }
    }
    if (lost > 0 && !(lost_lo == 0 && lost_hi == 0))
        out.residuals.push_back(Residual{from_int(lost) * c.width(J), lost_lo, lost_hi});
    return out;
}

namespace detail {

/// Bound on the integral of (error term) * (function with the given pointwise range).
inline Enclosure residual_product(const Rational& mass, const Enclosure& a, const Enclosure& b) {
    Enclosure p = a * b;
    return mass * p.hull(Enclosure(Rational(0)));
}

}  // namespace detail

/// Enclosure of the L2 inner product of two step functions.
inline Enclosure inner(const Construction& c, const StepFunction& f, const StepFunction& g) {
    const int J = std::max(f.stage, g.stage);
    const StepFunction ff = refine(c, f, J);
    const StepFunction gg = refine(c, g, J);
    const StepFunction& small = ff.values.size() <= gg.values.size() ? ff : gg;
    const StepFunction& large = &small == &ff ? gg : ff;
    Rational exact = 0;
    for (const auto& [l, v] : small.values) {
        auto it = large.values.find(l);
        if (it != large.values.end()) exact += v * it->second;
    }
    Enclosure out(exact * c.width(J));
    const Enclosure f_range = ff.value_range();
    const Enclosure g_range = gg.value_range();
    for (const auto& r : ff.residuals) out += detail::residual_product(r.mass, r.range(), g_range);
    for (const auto& r : gg.residuals) out += detail::residual_product(r.mass, r.range(), f_range);
    for (const auto& a : ff.residuals)
        for (const auto& b : gg.residuals) out += detail::residual_product(rankone::min(a.mass, b.mass), a.range(), b.range());
    return out;
}

/// x / mu(X) where only a lower bound on mu(X) may be known.
inline Enclosure divide_by_mass(const Enclosure& x, const TotalMass& m) {
    if (m.known()) return x / m.enclosure();
    const Rational a = x.lo() / m.lo;
    const Rational b = x.hi() / m.lo;
    return {rankone::min(a, Rational(0)), rankone::max(b, Rational(0))};
}

struct CenteredFunction {
    /// Absent when mu(X) has no certified upper bound.
    std::optional<StepFunction> function;
    Enclosure mean;
    bool tail_known = false;
};

/// f minus its mean over X, expressed at stage J. The centering constant is
/// the midpoint of the mean enclosure; the mismatch and the unknown mass
/// outside X_J are carried as residual terms.
inline CenteredFunction center(const StepFunction& f, const Construction& c, int J) {
    const TotalMass mass = total_mass_enclosure(c, J);
    const Enclosure integral = f.integral(c);
    CenteredFunction out;
    out.mean = divide_by_mass(integral, mass);
    out.tail_known = mass.known();
    if (!mass.known()) return out;

    const Rational a = out.mean.midpoint();
    const Rational half_width = out.mean.width() / 2;
    StepFunction g = refine(c, f, J);
    const std::int64_t h = c.height(J);
    for (Level l = 0; l < h; ++l) g.values[l] -= a;
    g.drop_zeros();
    if (half_width > 0) g.residuals.push_back(Residual{*mass.hi, -half_width, half_width});
    const Rational tail = *mass.hi - c.stage(J).total_mass;
    if (tail > 0 && a != 0) g.residuals.push_back(Residual{tail, rankone::min(Rational(0), -a), rankone::max(Rational(0), -a)});
    out.function = std::move(g);
    return out;
}

/// mu(T^n A ∩ B) at working stage J: exact on resolved levels, plus the
/// unresolved mass of A as upper slack. Any n is accepted; |n| >= h_J leaves
/// all of A unresolved.
inline Enclosure correlation_at(const Construction& c, std::int64_t n, const TowerSet& A, const TowerSet& B, int J) {
    detail::check_stage_not_below(J, std::max(A.stage, B.stage));
    const auto a = detail::refine_levels(c, A.levels, A.stage, J);
    const auto b = detail::refine_levels(c, B.levels, B.stage, J);
    const auto shifted = detail::shift_levels(a, n, c.height(J));
    const std::int64_t hit = detail::count_common(shifted.resolved, b);
    const Rational& w = c.width(J);
    return {from_int(hit) * w, from_int(hit + shifted.unresolved) * w};
}

struct CorrelationResult {
    Enclosure value;
    int stage = 1;
    bool converged = false;
};

namespace detail {

/// Drives a per-stage evaluator over J = start, start+1, ... until the width
/// target is met or the budget stops refinement. Successive enclosures of the
/// same real are intersected.
template <class AtStage>
CorrelationResult adapt(const Construction& c, int start, std::size_t base_levels, const Rational& tol, const Budget& budget, AtStage&& at_stage) {
    if (tol <= 0) throw std::invalid_argument("tolerance must be positive");
    std::optional<Enclosure> best;
    int used = start;
    for (int J = start; J <= std::max(start, budget.max_stage); ++J) {
        if (J > start && refined_size(c, base_levels, start, J) > budget.max_levels) break;
        Enclosure e = at_stage(J);
        best = best ? best->intersect(e) : e;
        used = J;
        if (best->width() <= tol) return {*best, used, true};
    }
    return {*best, used, false};
}

}  // namespace detail

/// Enclosure of mu(T^n A ∩ B), refined until its width is at most tol.
inline CorrelationResult correlation(const Construction& c, std::int64_t n, const TowerSet& A, const TowerSet& B, const Rational& tol,
                                     const Budget& budget = {}) {
    const int start = std::max(A.stage, B.stage);
    const std::size_t base = std::max(detail::refined_size(c, A.levels.size(), A.stage, start), detail::refined_size(c, B.levels.size(), B.stage, start));
    return detail::adapt(c, start, base, tol, budget, [&](int J) { return correlation_at(c, n, A, B, J); });
}

/// ||T^k 1_A - 1_A||_1 at stage J via 2(mu(A) - mu(T^k A ∩ A)).
inline Enclosure l1_distance_at(const Construction& c, std::int64_t k, const TowerSet& A, int J) {
    const Enclosure x = correlation_at(c, k, A, A, J);
    const Rational mu = A.measure(c);
    return {2 * (mu - x.hi()), 2 * (mu - x.lo())};
}

inline CorrelationResult l1_distance_indicator(const Construction& c, std::int64_t k, const TowerSet& A, const Rational& tol, const Budget& budget = {}) {
    return detail::adapt(c, A.stage, A.levels.size(), tol, budget, [&](int J) { return l1_distance_at(c, k, A, J); });
}

/// ||(1/N) sum_n T^{k_n} 1_A - 1_A||_1 at stage J, evaluated level by level.
inline Enclosure cesaro_deviation_at(const Construction& c, const std::vector<std::int64_t>& k_seq, const TowerSet& A, int J) {
    if (k_seq.empty()) throw std::invalid_argument("empty time sequence");
    const auto a = detail::refine_levels(c, A.levels, A.stage, J);
    const std::int64_t h = c.height(J);
    const auto N = static_cast<std::int64_t>(k_seq.size());
    std::vector<Level> images;
    images.reserve(a.size() * k_seq.size());
    std::int64_t unresolved = 0;
    for (std::int64_t k : k_seq) {
        auto s = detail::shift_levels(a, k, h);
        unresolved += s.unresolved;
        images.insert(images.end(), s.resolved.begin(), s.resolved.end());
    }
    std::sort(images.begin(), images.end());

    // sum over levels of |count(l) - N * [l in A]|
    std::int64_t total = 0;
    auto ia = a.begin();
    for (std::size_t i = 0; i < images.size();) {
        std::size_t k = i;
        while (k < images.size() && images[k] == images[i]) ++k;
        const Level l = images[i];
        const auto count = static_cast<std::int64_t>(k - i);
        while (ia != a.end() && *ia < l) {
            total += N;
            ++ia;
        }
        if (ia != a.end() && *ia == l) {
            total += count > N ? count - N : N - count;
            ++ia;
        } else {
            total += count;
        }
        i = k;
    }
    total += N * static_cast<std::int64_t>(a.end() - ia);

    const Rational scale = c.width(J) / from_int(N);
    const Rational l1 = from_int(total) * scale;
    const Rational slack = from_int(unresolved) * scale;
    return {rankone::max(Rational(0), l1 - slack), l1 + slack};
}

inline CorrelationResult cesaro_deviation(const Construction& c, const std::vector<std::int64_t>& k_seq, const TowerSet& A, const Rational& tol,
                                          const Budget& budget = {}) {
    for (std::int64_t k : k_seq)
        if (k < 0) throw std::invalid_argument("cesaro times must be nonnegative");
    return detail::adapt(c, A.stage, A.levels.size() * std::max<std::size_t>(1, k_seq.size()), tol, budget,
                         [&](int J) { return cesaro_deviation_at(c, k_seq, A, J); });
}

// ---------------------------------------------------------------------------
// Correlations of step functions. These work on the level sets of constant
// value and use integer level lists, so they reach much deeper stages than
// StepFunction::shift/inner. Centering goes through
//   (T^n (f - m_f), g - m_g) = (T^n f, g) - (∫f)(∫g) / mu(X),
// which holds because T preserves mu and fixes the constants.
// ---------------------------------------------------------------------------

/// A residual-free step function grouped by value, optionally mean-removed.
struct Observable {
    int stage = 1;
    std::vector<std::pair<Rational, TowerSet>> parts;  // disjoint, nonzero coefficients
    bool centered = true;

    static Observable from(const StepFunction& f, bool centered = true) {
        if (!f.exact()) throw std::invalid_argument("observable needs a residual-free step function");
        std::map<Rational, std::vector<Level>> groups;
        for (const auto& [l, v] : f.values)
            if (v != 0) groups[v].push_back(l);
        Observable o;
        o.stage = f.stage;
        o.centered = centered;
        for (auto& [v, ls] : groups) o.parts.emplace_back(v, TowerSet::of(f.stage, std::move(ls)));
        return o;
    }

    StepFunction as_step_function() const {
        StepFunction f;
        f.stage = stage;
        for (const auto& [v, s] : parts)
            for (Level l : s.levels) f.values[l] += v;
        f.drop_zeros();
        return f;
    }

    std::size_t level_count() const {
        std::size_t n = 0;
        for (const auto& p : parts) n += p.second.levels.size();
        return n;
    }

    Rational integral(const Construction& c) const {
        Rational s = 0;
        for (const auto& [v, A] : parts) s += v * from_int(static_cast<std::int64_t>(A.levels.size()));
        return s * c.width(stage);
    }

    Enclosure value_range() const {
        Rational lo = 0, hi = 0;
        for (const auto& [v, A] : parts) {
            lo = rankone::min(lo, v);
            hi = rankone::max(hi, v);
        }
        return {lo, hi};
    }
};

struct CorrelationOptions {
    /// Divide by mu(X), i.e. report probability-space inner products.
    bool normalized = true;
};

namespace detail {

/// Per-stage evaluator for (T^n f, g); keeps refined level lists so the stage
/// can be raised incrementally.
class PairCorrelator {
public:
    PairCorrelator(const Construction& c, const Observable& f, const Observable& g) : c_(c), f_(f), g_(g) {
        stage_ = std::max(f.stage, g.stage);
        for (const auto& [v, A] : f.parts) f_levels_.push_back(refine_levels(c, A.levels, A.stage, stage_));
        for (const auto& [v, B] : g.parts) g_levels_.push_back(refine_levels(c, B.levels, B.stage, stage_));
    }

    int stage() const { return stage_; }

    std::size_t next_size() const {
        std::size_t n = 0;
        for (const auto& v : f_levels_) n = std::max(n, saturating_mul(v.size(), static_cast<std::size_t>(c_.cut(stage_).cuts)));
        for (const auto& v : g_levels_) n = std::max(n, saturating_mul(v.size(), static_cast<std::size_t>(c_.cut(stage_).cuts)));
        return n;
    }

    void advance() {
        for (auto& v : f_levels_) v = refine_once(c_, v, stage_);
        for (auto& v : g_levels_) v = refine_once(c_, v, stage_);
        ++stage_;
    }

    /// Uncentered, unnormalized (T^n f, g) at the current stage.
    Enclosure raw(std::int64_t n) const {
        const std::int64_t h = c_.height(stage_);
        const Enclosure g_range = g_.value_range();
        Rational exact = 0;
        Enclosure slack(Rational(0));
        for (std::size_t a = 0; a < f_levels_.size(); ++a) {
            const auto shifted = shift_levels(f_levels_[a], n, h);
            const Rational& ca = f_.parts[a].first;
            for (std::size_t b = 0; b < g_levels_.size(); ++b) {
                const std::int64_t hit = count_common(shifted.resolved, g_levels_[b]);
                if (hit) exact += ca * g_.parts[b].first * from_int(hit);
            }
            if (shifted.unresolved) slack += (ca * from_int(shifted.unresolved)) * g_range;
        }
        return c_.width(stage_) * (Enclosure(exact) + slack);
    }

    Enclosure value(std::int64_t n, const CorrelationOptions& opt) const {
        Enclosure x = raw(n);
        const TotalMass mass = total_mass_enclosure(c_, stage_);
        if (f_.centered || g_.centered) {
            const Rational product = f_.integral(c_) * g_.integral(c_);
            if (product != 0) x -= divide_by_mass(Enclosure(product), mass);
        }
        return opt.normalized ? divide_by_mass(x, mass) : x;
    }

private:
    const Construction& c_;
    const Observable& f_;
    const Observable& g_;
    int stage_;
    std::vector<std::vector<Level>> f_levels_;
    std::vector<std::vector<Level>> g_levels_;
};

}  // namespace detail

/// (T^n f, g) at a fixed working stage J.
inline Enclosure observable_correlation_at(const Construction& c, const Observable& f, const Observable& g, std::int64_t n, int J,
                                           const CorrelationOptions& opt = {}) {
    detail::PairCorrelator pc(c, f, g);
    detail::check_stage_not_below(J, pc.stage());
    while (pc.stage() < J) pc.advance();
    return pc.value(n, opt);
}

/// (T^n f, g) refined until the enclosure width is at most tol.
inline CorrelationResult observable_correlation(const Construction& c, const Observable& f, const Observable& g, std::int64_t n, const Rational& tol,
                                                const Budget& budget = {}, const CorrelationOptions& opt = {}) {
    if (tol <= 0) throw std::invalid_argument("tolerance must be positive");
    detail::PairCorrelator pc(c, f, g);
    std::optional<Enclosure> best;
    while (true) {
        Enclosure e = pc.value(n, opt);
        best = best ? best->intersect(e) : e;
        if (best->width() <= tol) return {*best, pc.stage(), true};
        if (pc.stage() >= budget.max_stage || pc.next_size() > budget.max_levels) return {*best, pc.stage(), false};
        pc.advance();
    }
}

/// Several shifts of one pair at a common stage schedule; used by scans.
inline std::vector<CorrelationResult> observable_correlations(const Construction& c, const Observable& f, const Observable& g,
                                                              const std::vector<std::int64_t>& shifts, const Rational& tol, const Budget& budget = {},
                                                              const CorrelationOptions& opt = {}) {
    if (tol <= 0) throw std::invalid_argument("tolerance must be positive");
    detail::PairCorrelator pc(c, f, g);
    std::vector<std::optional<Enclosure>> best(shifts.size());
    std::vector<CorrelationResult> out(shifts.size());
    std::vector<bool> done(shifts.size(), false);
    std::size_t remaining = shifts.size();
    while (remaining > 0) {
        for (std::size_t i = 0; i < shifts.size(); ++i) {
            if (done[i]) continue;
            Enclosure e = pc.value(shifts[i], opt);
            best[i] = best[i] ? best[i]->intersect(e) : e;
            out[i] = {*best[i], pc.stage(), best[i]->width() <= tol};
            if (out[i].converged) {
                done[i] = true;
                --remaining;
            }
        }
        if (remaining == 0 || pc.stage() >= budget.max_stage || pc.next_size() > budget.max_levels) break;
        pc.advance();
    }
    return out;
}

}  // namespace rankone
