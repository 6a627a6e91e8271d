#pragma once

// Scans over times: correlation decay against psi, rigidity at structured
// times, rigid-factor (mild mixing) search, and Cesaro averages in L1.

#include "construction.hpp"
#include "enclosure.hpp"
#include "parallel.hpp"
#include "presets.hpp"
#include "stepcalc.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankone {

enum class Verdict { exceeds, below, unknown };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::exceeds: return "EXCEEDS";
        case Verdict::below: return "BELOW";
        case Verdict::unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

/// EXCEEDS iff |corr| > psi is certified, BELOW iff |corr| < psi is certified.
inline Verdict classify(const Enclosure& correlation, const Enclosure& psi) {
    const Enclosure a = correlation.abs();
    if (a.lo() > psi.hi()) return Verdict::exceeds;
    if (a.hi() < psi.lo()) return Verdict::below;
    return Verdict::unknown;
}

struct DecayRow {
    std::int64_t n = 0;
    Enclosure correlation;
    Enclosure psi;
    Verdict verdict = Verdict::unknown;
    int stage = 1;
    bool converged = false;
};

struct DecayScan {
    std::vector<DecayRow> rows;
    std::vector<std::int64_t> exceedances;
};

struct ScanOptions {
    Rational tol{1, 1000};
    Budget budget;
    unsigned threads = 1;
    /// Probability-normalized correlations (divide by mu(X)).
    bool normalized = true;
};

namespace detail {

/// Correlations at many shifts, split into contiguous chunks per worker.
/// Each shift follows the same stage sequence regardless of chunking.
inline std::vector<CorrelationResult> chunked_correlations(const Construction& c, const Observable& f, const Observable& g,
                                                           const std::vector<std::int64_t>& shifts, const ScanOptions& opt) {
    std::vector<CorrelationResult> out(shifts.size());
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(opt.threads, shifts.size()));
    const std::size_t per = (shifts.size() + chunks - 1) / std::max<std::size_t>(chunks, 1);
    parallel_for(chunks, opt.threads, [&](std::size_t t) {
        const std::size_t lo = t * per;
        const std::size_t hi = std::min(shifts.size(), lo + per);
        if (lo >= hi) return;
        std::vector<std::int64_t> part(shifts.begin() + static_cast<std::ptrdiff_t>(lo), shifts.begin() + static_cast<std::ptrdiff_t>(hi));
        auto res = observable_correlations(c, f, g, part, opt.tol, opt.budget, CorrelationOptions{opt.normalized});
        std::copy(res.begin(), res.end(), out.begin() + static_cast<std::ptrdiff_t>(lo));
    });
    return out;
}

}  // namespace detail

inline DecayScan decay_scan(const Construction& c, const Observable& f, const DecaySchedule& psi, std::int64_t n_max, const ScanOptions& opt = {}) {
    if (f.parts.empty()) throw std::invalid_argument("decay scan needs a nonzero function");
    std::vector<std::int64_t> shifts;
    for (std::int64_t n = 0; n <= n_max; ++n) shifts.push_back(n);
    const auto res = detail::chunked_correlations(c, f, f, shifts, opt);
    DecayScan scan;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        DecayRow row;
        row.n = shifts[i];
        row.correlation = res[i].value;
        row.psi = psi.at(shifts[i]);
        row.verdict = classify(row.correlation, row.psi);
        row.stage = res[i].stage;
        row.converged = res[i].converged;
        if (row.verdict == Verdict::exceeds) scan.exceedances.push_back(row.n);
        scan.rows.push_back(std::move(row));
    }
    return scan;
}

struct RigidityRow {
    int stage = 0;
    std::int64_t time = 0;
    Enclosure correlation;
    /// correlation / (f, f); absent if the variance enclosure touches 0.
    std::optional<Enclosure> ratio;
    int working_stage = 0;
    bool converged = false;
};

struct RigidityScan {
    Enclosure variance;
    std::vector<RigidityRow> rows;
};

/// Largest distance from `target` to a point of the ratio enclosure.
inline std::optional<Rational> rigidity_gap(const RigidityRow& row, const Rational& target) {
    if (!row.ratio) return std::nullopt;
    return rankone::max(rankone::abs(row.ratio->lo() - target), rankone::abs(row.ratio->hi() - target));
}

inline RigidityScan rigidity_scan(const Construction& c, const Observable& f, const std::vector<StructuredTime>& times, const ScanOptions& opt = {}) {
    std::vector<std::int64_t> shifts{0};
    for (const auto& t : times) shifts.push_back(t.time);
    const auto res = detail::chunked_correlations(c, f, f, shifts, opt);
    RigidityScan scan;
    scan.variance = res[0].value;
    for (std::size_t i = 0; i < times.size(); ++i) {
        RigidityRow row;
        row.stage = times[i].stage;
        row.time = times[i].time;
        row.correlation = res[i + 1].value;
        if (!scan.variance.contains(Rational(0))) row.ratio = row.correlation / scan.variance;
        row.working_stage = res[i + 1].stage;
        row.converged = res[i + 1].converged;
        scan.rows.push_back(std::move(row));
    }
    return scan;
}

struct MildMixingScan {
    std::vector<std::pair<std::int64_t, Enclosure>> distances;  // k -> ||T^k 1_A - 1_A||_1
    std::optional<Enclosure> minimum;
    std::int64_t argmin = 0;
    std::vector<std::int64_t> candidates;  // k with certified distance < theta
};

inline void require_proper_set(const Construction& c, const TowerSet& A) {
    A.validate(c);
    if (A.empty()) throw std::invalid_argument("set must have positive measure");
    const TotalMass m = total_mass_enclosure(c, A.stage);
    const bool whole_stage = static_cast<std::int64_t>(A.levels.size()) == c.height(A.stage);
    if (whole_stage && m.known() && *m.hi == m.lo) throw std::invalid_argument("set must have measure below mu(X)");
}

inline MildMixingScan mild_mixing_scan(const Construction& c, const TowerSet& A, std::int64_t k_max, const Rational& theta, const ScanOptions& opt = {}) {
    require_proper_set(c, A);
    MildMixingScan scan;
    if (k_max < 1) return scan;
    std::vector<std::int64_t> shifts;
    for (std::int64_t k = 1; k <= k_max; ++k) shifts.push_back(k);
    // the distance is 2(mu(A) - mu(T^k A ∩ A)): halve the width target
    ScanOptions raw = opt;
    raw.tol = opt.tol / 2;
    raw.normalized = false;
    const Observable indicator{A.stage, {{Rational(1), A}}, false};
    const auto res = detail::chunked_correlations(c, indicator, indicator, shifts, raw);
    const Rational mu = A.measure(c);
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        const Enclosure& x = res[i].value;
        const Enclosure d(2 * (mu - x.hi()), 2 * (mu - x.lo()));
        scan.distances.emplace_back(shifts[i], d);
        if (d.hi() < theta) scan.candidates.push_back(shifts[i]);
        if (!scan.minimum || d.hi() < scan.minimum->hi() || (d.hi() == scan.minimum->hi() && d.lo() < scan.minimum->lo())) scan.argmin = shifts[i];
        scan.minimum = scan.minimum ? Enclosure(rankone::min(scan.minimum->lo(), d.lo()), rankone::min(scan.minimum->hi(), d.hi())) : d;
    }
    return scan;
}

/// e_N = Cesaro deviation over the first N times, N = 1..|k_seq|.
inline std::vector<CorrelationResult> cesaro_check(const Construction& c, const TowerSet& A, const std::vector<std::int64_t>& k_seq, const ScanOptions& opt = {}) {
    require_proper_set(c, A);
    std::vector<CorrelationResult> out(k_seq.size());
    parallel_for(k_seq.size(), opt.threads, [&](std::size_t i) {
        const std::vector<std::int64_t> prefix(k_seq.begin(), k_seq.begin() + static_cast<std::ptrdiff_t>(i + 1));
        out[i] = cesaro_deviation(c, prefix, A, opt.tol, opt.budget);
    });
    return out;
}

}  // namespace rankone
