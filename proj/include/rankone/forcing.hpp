#pragma once

// Greedy construction of a plateau staircase whose autocorrelations exceed a
// decay schedule at infinitely many times.
//
// Round k fixes a plateau fraction eps_k and looks for a stage j beyond the
// committed prefix such that |(T^m f_i, f_i)| > psi(m) at m = h_j + v_j for
// the first k functions. A correlation certified at working stage J depends
// only on the cuts of stages < J, so those cuts are committed and every later
// round (and every continuation) inherits the inequality.

#include "construction.hpp"
#include "enclosure.hpp"
#include "presets.hpp"
#include "stepcalc.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rankone {

struct ForcingProblem {
    std::int64_t h1 = 1;
    IntSchedule cuts = IntSchedule::affine(4, 0);
    IntSchedule plateau = IntSchedule::constant(0);
    DecaySchedule psi = DecaySchedule::power(1);
    /// eps_k for k = 1, 2, ...; missing entries default to 2^-k.
    std::vector<Rational> eps;
    /// Residual-free step functions; their means are removed.
    std::vector<StepFunction> functions;
    int rounds = 1;
    /// Plateau stages tried per round before giving up.
    int max_candidates = 6;
    Budget budget;

    Rational eps_for(int k) const {
        return static_cast<std::size_t>(k) <= eps.size() ? eps[static_cast<std::size_t>(k - 1)] : pow2(-k);
    }
};

struct ForcingRound {
    int k = 0;
    Rational eps;
    int stage = 0;           // j_k, the plateau stage
    std::int64_t plateau = 0;  // v_{j_k}
    std::int64_t time = 0;     // m_k = h_{j_k} + v_{j_k}
    int working_stage = 0;
    std::vector<Enclosure> correlations;  // probability-normalized (T^m f_i, f_i), i <= k
    Enclosure psi;
};

struct ForcingCertificate {
    std::int64_t h1 = 1;
    IntSchedule cuts = IntSchedule::affine(4, 0);
    DecaySchedule psi = DecaySchedule::power(1);
    std::vector<StepFunction> functions;
    std::vector<StageParams> committed;
    std::vector<ForcingRound> rounds;
    int requested_rounds = 0;
    std::optional<int> failed_round;

    bool complete() const { return !failed_round && static_cast<int>(rounds.size()) == requested_rounds; }
};

namespace detail {

inline StageRule staircase_rule(const IntSchedule& cuts) {
    return [cuts](int j, std::int64_t h) {
        const std::int64_t r = cuts(j, h);
        return StageParams{r, staircase_spacers(r)};
    };
}

inline std::optional<TailMassBound> staircase_bound(std::int64_t h1, const IntSchedule& cuts) {
    if (!cuts.affine_tail()) return std::nullopt;
    return TailMassBound([h1, cuts](int J) { return staircase_tail(h1, cuts, J); });
}

inline int function_stage(const std::vector<StepFunction>& fs) {
    int s = 1;
    for (const auto& f : fs) s = std::max(s, f.stage);
    return s;
}

enum class Decision { certified, refuted, open };

inline Decision decide(const Enclosure& corr, const Enclosure& psi) {
    const Enclosure a = corr.abs();
    if (a.lo() > psi.hi()) return Decision::certified;
    if (a.hi() < psi.lo()) return Decision::refuted;
    return Decision::open;
}

}  // namespace detail

inline ForcingCertificate force_slow_decay(const ForcingProblem& problem) {
    if (problem.rounds > 0 && problem.functions.empty()) throw std::invalid_argument("forcing needs at least one function");
    for (const auto& f : problem.functions)
        if (!f.exact() || f.values.empty()) throw std::invalid_argument("forcing functions must be nonzero and residual-free");

    ForcingCertificate cert;
    cert.h1 = problem.h1;
    cert.cuts = problem.cuts;
    cert.psi = problem.psi;
    cert.functions = problem.functions;
    cert.requested_rounds = std::max(problem.rounds, 0);
    if (problem.rounds <= 0) return cert;

    const auto bound = detail::staircase_bound(problem.h1, problem.cuts);
    std::vector<Observable> observables;
    for (const auto& f : problem.functions) observables.push_back(Observable::from(f, true));

    {
        // stages below the functions' stage are plain staircase
        Construction base(with_prefix(problem.h1, {}, detail::staircase_rule(problem.cuts)));
        for (int j = 1; j < detail::function_stage(problem.functions); ++j) cert.committed.push_back(base.cut(j));
    }

    for (int k = 1; k <= problem.rounds; ++k) {
        const Rational eps = problem.eps_for(k);
        const std::size_t used = std::min<std::size_t>(static_cast<std::size_t>(k), observables.size());
        const StageRule plateau_rule = [eps, cuts = problem.cuts, v = problem.plateau](int j, std::int64_t h) {
            const std::int64_t r = cuts(j, h);
            return StageParams{r, modified_staircase_spacers(eps, r, v(j, h), j)};
        };
        bool closed = false;
        for (int cand = 0; cand < problem.max_candidates && !closed; ++cand) {
            const int j = static_cast<int>(cert.committed.size()) + 1 + cand;
            Construction c(with_prefix(problem.h1, cert.committed, plateau_rule, bound));
            std::int64_t h = 0, v = 0;
            try {
                h = c.height(j);
                v = problem.plateau(j, h);
                c.stage(j + 1);
            } catch (const ConstructionError&) {
                break;
            }
            const std::int64_t m = h + v;
            const Enclosure psi = problem.psi.at(m);

            std::vector<detail::PairCorrelator> correlators;
            correlators.reserve(used);
            for (std::size_t i = 0; i < used; ++i) correlators.emplace_back(c, observables[i], observables[i]);
            std::vector<Enclosure> best(used);
            std::vector<bool> have(used, false);
            int J = j + 1;
            bool refuted = false;
            while (true) {
                bool all = true;
                try {
                    for (std::size_t i = 0; i < used; ++i) {
                        while (correlators[i].stage() < J) correlators[i].advance();
                        const Enclosure e = correlators[i].value(m, {});
                        best[i] = have[i] ? best[i].intersect(e) : e;
                        have[i] = true;
                        const auto d = detail::decide(best[i], psi);
                        if (d == detail::Decision::refuted) refuted = true;
                        if (d != detail::Decision::certified) all = false;
                    }
                } catch (const ConstructionError&) {
                    break;
                }
                if (all) {
                    ForcingRound round{k, eps, j, v, m, J, best, psi};
                    for (int s = static_cast<int>(cert.committed.size()) + 1; s < J; ++s) cert.committed.push_back(c.cut(s));
                    cert.rounds.push_back(std::move(round));
                    closed = true;
                    break;
                }
                if (refuted || J >= problem.budget.max_stage) break;
                std::size_t next = 0;
                for (const auto& pc : correlators) next = std::max(next, pc.next_size());
                if (next > problem.budget.max_levels) break;
                ++J;
            }
        }
        if (!closed) {
            cert.failed_round = k;
            break;
        }
    }
    return cert;
}

struct RoundCheck {
    int k = 0;
    bool pass = false;
    std::vector<Enclosure> recomputed;
    std::string reason;
};

struct VerificationReport {
    std::vector<RoundCheck> rounds;
    bool all_pass() const {
        return std::all_of(rounds.begin(), rounds.end(), [](const RoundCheck& r) { return r.pass; });
    }
};

/// Re-derives every round from the committed cuts alone, with fresh state.
/// The continuation past the committed prefix is the plain staircase; no
/// certified quantity depends on it.
inline VerificationReport verify_certificate(const ForcingCertificate& cert) {
    VerificationReport report;
    // the staircase tail bound on mu(X) holds only if every committed cut has staircase spacer mass
    bool staircase_sums = true;
    {
        Construction probe(with_prefix(cert.h1, cert.committed, detail::staircase_rule(cert.cuts)));
        for (std::size_t j = 0; j < cert.committed.size(); ++j) {
            const auto& p = cert.committed[j];
            const int stage = static_cast<int>(j) + 1;
            if (p.spacer_total() != p.cuts * (p.cuts + 1) / 2 || p.cuts != cert.cuts(stage, probe.height(stage))) staircase_sums = false;
        }
    }
    const auto bound = staircase_sums ? detail::staircase_bound(cert.h1, cert.cuts) : std::nullopt;
    Construction c(with_prefix(cert.h1, cert.committed, detail::staircase_rule(cert.cuts), bound));

    int last_stage = 0;
    for (const auto& round : cert.rounds) {
        RoundCheck check;
        check.k = round.k;
        auto fail = [&](std::string why) {
            check.reason = std::move(why);
            report.rounds.push_back(check);
        };
        if (round.stage <= last_stage) {
            fail("plateau stages not strictly increasing");
            continue;
        }
        last_stage = round.stage;
        if (round.working_stage - 1 > static_cast<int>(cert.committed.size())) {
            fail("working stage uses uncommitted cuts");
            continue;
        }
        if (round.stage > static_cast<int>(cert.committed.size())) {
            fail("plateau stage not committed");
            continue;
        }
        const StageParams& cut = cert.committed[static_cast<std::size_t>(round.stage - 1)];
        try {
            if (cut.spacers != modified_staircase_spacers(round.eps, cut.cuts, round.plateau, round.stage)) {
                fail("plateau stage does not carry the recorded plateau cut");
                continue;
            }
        } catch (const ConstructionError& e) {
            fail(e.what());
            continue;
        }
        if (round.time != c.height(round.stage) + round.plateau) {
            fail("time differs from h_j + v_j");
            continue;
        }
        const Enclosure psi = cert.psi.at(round.time);
        const std::size_t used = std::min<std::size_t>(static_cast<std::size_t>(round.k), cert.functions.size());
        bool ok = true;
        for (std::size_t i = 0; i < used; ++i) {
            const Observable f = Observable::from(cert.functions[i], true);
            const Enclosure e = observable_correlation_at(c, f, f, round.time, round.working_stage);
            check.recomputed.push_back(e);
            if (!(e.abs().lo() > psi.hi())) ok = false;
        }
        check.pass = ok;
        if (!ok) check.reason = "correlation does not exceed psi";
        report.rounds.push_back(check);
    }
    return report;
}

}  // namespace rankone
