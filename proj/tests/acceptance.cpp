// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every threshold below is pinned here; see README for where the
// frozen constants come from.

#include <rankone/rankone.hpp>

#include "properties.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rankone;

namespace {

// criterion 1
constexpr double kContainmentSeconds = 120;
constexpr std::int64_t kContainmentMaxN = 50;
constexpr int kContainmentMaxStage = 6;
constexpr int kContainmentPairs = 20;

// criterion 2
const Rational kRigidL1Bound(1, 1000);
const Rational kCesaroBound(1, 100);

// criterion 3: the oracle at stage 9 certifies min_k ||T^k 1_A - 1_A||_1 >= 160/729 for k <= 200
const Rational kChaconMinDistance(1, 5);
const Rational kChaconTheta(1, 100);
constexpr std::int64_t kChaconKMax = 200;
constexpr double kChaconSeconds = 300;

// criterion 4: v_j is the largest admissible plateau for eps = 1/2, r_j = 4j
const std::vector<std::int64_t> kPlateauFixture{7, 8, 11, 14, 17, 20};
const Rational kRigidityTolerance(1, 10);
constexpr int kRigidityLastStage = 6;
constexpr int kRigidityMaxWorkingStage = 7;

// criterion 5
constexpr int kForcingRounds = 3;
constexpr double kForcingSeconds = 600;

// criterion 6
constexpr int kMetricTriples = 10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string dec(const Rational& x) { return to_decimal(x, 6); }

std::string show(const Enclosure& e) { return "[" + dec(e.lo()) + ", " + dec(e.hi()) + "]"; }

StepFunction difference(int stage, std::vector<Level> plus, std::vector<Level> minus) {
    StepFunction f;
    f.stage = stage;
    for (Level l : plus) f.values[l] = 1;
    for (Level l : minus) f.values[l] = -1;
    return f;
}

Outcome oracle_containment() {
    Clock clock;
    std::mt19937_64 rng(2024);
    std::size_t checks = 0, failures = 0;
    std::string first;
    const std::vector<std::pair<std::string, Preset>> presets{
        {"chacon", make_chacon()}, {"odometer", make_odometer()}, {"staircase", make_staircase({IntSchedule::affine(1, 1), 1})}};
    for (const auto& [name, preset] : presets) {
        Construction c(preset.params);
        for (int J = 1; J <= kContainmentMaxStage; ++J) {
            OraclePowers oracle(c, J);
            for (int pair = 0; pair < kContainmentPairs; ++pair) {
                auto random_set = [&] {
                    const int s = std::uniform_int_distribution<int>(1, J)(rng);
                    const std::int64_t h = c.height(s);
                    std::vector<Level> levels;
                    const std::int64_t k = std::uniform_int_distribution<std::int64_t>(1, h)(rng);
                    for (std::int64_t i = 0; i < k; ++i) levels.push_back(std::uniform_int_distribution<std::int64_t>(0, h - 1)(rng));
                    return TowerSet::of(s, std::move(levels));
                };
                const TowerSet A = random_set(), B = random_set();
                for (std::int64_t n = 0; n <= kContainmentMaxN; ++n) {
                    const OracleResult o = oracle.correlation(n, A, B);
                    const Enclosure truth(o.value, o.value + o.undefined_mass);
                    ++checks;
                    if (!correlation_at(c, n, A, B, J).contains(truth)) {
                        if (failures++ == 0) first = name + " J=" + std::to_string(J) + " n=" + std::to_string(n);
                    }
                }
            }
        }
    }
    const double t = clock.seconds();
    std::ostringstream d;
    d << checks - failures << "/" << checks << " contained";
    if (failures) d << ", first miss " << first;
    d << ", " << t << "s (limit " << kContainmentSeconds << "s)";
    return {failures == 0 && checks > 0 && t < kContainmentSeconds, d.str()};
}

Outcome odometer_rigidity() {
    Construction c(make_odometer().params);
    const TowerSet A{2, {0}};
    bool ok = true;
    std::ostringstream d;
    for (int m = 1; m <= 4; ++m) {
        const std::int64_t k = std::int64_t{1} << m;
        const CorrelationResult r = l1_distance_indicator(c, k, A, Rational(1, 10000));
        // carries never reach level 0 of stage 2 at k = 2^m, so the distance is exactly 0;
        // the oracle only loses the top k levels of its tower
        const OracleResult o = oracle_correlation(c, 16, k, A, A);
        const Enclosure oracle_distance(2 * (A.measure(c) - o.value - o.undefined_mass), 2 * (A.measure(c) - o.value));
        ok = ok && r.value.hi() < kRigidL1Bound && r.value.contains(Rational(0)) && oracle_distance.contains(Rational(0)) &&
             oracle_distance.hi() < kRigidL1Bound;
        d << "l1(" << k << ")=" << show(r.value) << " ";
    }
    const auto e = cesaro_check(c, A, {2, 4, 8, 16});
    ok = ok && e.size() == 4 && e.back().value.hi() < kCesaroBound;
    d << "e_4=" << show(e.back().value);
    return {ok, d.str()};
}

Outcome chacon_mild_mixing() {
    Clock clock;
    Construction c(make_chacon().params);
    const auto scan = mild_mixing_scan(c, TowerSet{2, {0}}, kChaconKMax, kChaconTheta);
    const double t = clock.seconds();
    const bool ok = scan.candidates.empty() && scan.minimum && scan.minimum->lo() >= kChaconMinDistance && t < kChaconSeconds &&
                    static_cast<std::int64_t>(scan.distances.size()) == kChaconKMax;
    std::ostringstream d;
    d << scan.candidates.size() << " candidates, min distance " << (scan.minimum ? show(*scan.minimum) : "none") << " >= " << kChaconMinDistance << ", "
      << t << "s";
    return {ok, d.str()};
}

Outcome eps_rigidity() {
    const Rational eps(1, 2);
    ModifiedStaircaseRule rule;
    rule.eps = eps;
    rule.cuts = IntSchedule::affine(4, 0);
    rule.plateau = IntSchedule::table(kPlateauFixture);
    const Preset p = make_modified_staircase(rule);
    Construction c(p.params);
    for (int j = 1; j <= static_cast<int>(kPlateauFixture.size()); ++j)
        if (kPlateauFixture[static_cast<std::size_t>(j - 1)] != *max_plateau(eps, 4 * j)) return {false, "fixture is not the maximal plateau at stage " + std::to_string(j)};

    const TowerSet A{2, {0}};
    ScanOptions opt;
    opt.tol = Rational(1, 1000);
    opt.budget.max_stage = kRigidityMaxWorkingStage;
    const auto times = structured_times(c, p, 2, kRigidityLastStage);
    const auto scan = rigidity_scan(c, Observable::from(StepFunction::indicator(A), true), times, opt);

    std::vector<const RigidityRow*> computable;
    for (const auto& row : scan.rows)
        if (row.ratio) computable.push_back(&row);
    if (computable.size() < 3) return {false, "fewer than three computable stages"};
    computable.erase(computable.begin(), computable.end() - 3);

    bool ok = true;
    std::optional<Rational> prev;
    std::ostringstream d;
    for (const RigidityRow* row : computable) {
        const Rational gap = *rigidity_gap(*row, eps);
        ok = ok && gap <= kRigidityTolerance && (!prev || gap <= *prev);
        prev = gap;
        d << "j" << row->stage << " ratio " << show(*row->ratio) << " ";
    }

    // the underlying correlations agree with the oracle at stage 6
    OraclePowers oracle(c, 6);
    for (const auto& t : structured_times(c, p, 2, 5)) {
        const OracleResult o = oracle.correlation(t.time, A, A);
        ok = ok && correlation_at(c, t.time, A, A, 6).contains(Enclosure(o.value, o.value + o.undefined_mass));
    }
    d << "gap <= " << kRigidityTolerance;
    return {ok, d.str()};
}

Outcome forcing() {
    Clock clock;
    ForcingProblem p;
    p.cuts = IntSchedule::affine(4, 0);
    p.psi = DecaySchedule::power(1);
    p.functions = {difference(2, {0, 1, 2, 3}, {4, 5, 6, 7}), difference(2, {0, 2, 4, 6}, {1, 3, 5, 7})};
    p.rounds = kForcingRounds;
    p.budget.max_stage = 8;
    p.budget.max_levels = std::size_t{1} << 22;
    const ForcingCertificate cert = force_slow_decay(p);
    bool ok = cert.complete() && static_cast<int>(cert.rounds.size()) == kForcingRounds;
    for (const auto& r : cert.rounds) {
        ok = ok && r.eps == pow2(-r.k);
        for (const auto& e : r.correlations) ok = ok && e.abs().lo() > r.psi.hi();
    }
    const VerificationReport report = verify_certificate(cert);
    ok = ok && report.all_pass() && report.rounds.size() == cert.rounds.size();
    for (const auto& rc : report.rounds)
        for (const auto& e : rc.recomputed) ok = ok && e.abs().lo() > cert.rounds.at(static_cast<std::size_t>(rc.k - 1)).psi.hi();
    const double t = clock.seconds();
    ok = ok && t < kForcingSeconds;
    std::ostringstream d;
    d << cert.rounds.size() << "/" << kForcingRounds << " rounds, times";
    for (const auto& r : cert.rounds) d << " " << r.time;
    d << ", re-verification " << (report.all_pass() ? "passes" : "fails") << ", " << t << "s";
    return {ok, d.str()};
}

/// Random constructions that agree on the cuts below stage P.
std::vector<ConstructionParams> prefix_sharing_triple(std::mt19937_64& rng, int P) {
    auto draw = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
    auto random_cut = [&] {
        StageParams s;
        s.cuts = draw(2, 3);
        for (std::int64_t i = 0; i < s.cuts; ++i) s.spacers.push_back(draw(0, 2));
        return s;
    };
    const std::int64_t h1 = draw(1, 2);
    std::vector<StageParams> shared;
    for (int j = 1; j < P; ++j) shared.push_back(random_cut());
    std::vector<ConstructionParams> out;
    for (int t = 0; t < 3; ++t) {
        std::vector<StageParams> cuts = shared;
        for (int j = P; j <= 12; ++j) cuts.push_back(random_cut());
        ConstructionParams c;
        c.h1 = h1;
        c.rule = [cuts](int j, std::int64_t) { return cuts.at(static_cast<std::size_t>(j - 1)); };
        out.push_back(std::move(c));
    }
    return out;
}

Outcome metric_identities() {
    MetricOptions opt;
    opt.tol = Rational(1, 100);
    opt.budget.max_stage = 6;
    bool ok = true;
    std::ostringstream d;

    ModifiedStaircaseRule plateau;
    plateau.cuts = IntSchedule::affine(1, 1);
    plateau.plateau = IntSchedule::constant(3);
    plateau.first_stage = 2;
    const std::vector<Preset> presets{make_chacon(), make_odometer(), make_staircase({IntSchedule::affine(1, 1), 1}), make_modified_staircase(plateau)};
    for (const Preset& p : presets) {
        Construction a(p.params), b(p.params);
        ok = ok && at_metric_lower(a, b, 2, 6, 4, opt).value.lo() == 0;
    }
    d << "self-distance 0 on " << presets.size() << " presets; ";

    std::mt19937_64 rng(7);
    int checked = 0;
    for (int t = 0; t < kMetricTriples; ++t) {
        const auto triple = prefix_sharing_triple(rng, 2);
        Construction S(triple[0]), T(triple[1]), U(triple[2]);
        const Enclosure st = halmos_rho(S, T, 2, 6, opt), ts = halmos_rho(T, S, 2, 6, opt);
        const Enclosure tu = halmos_rho(T, U, 2, 6, opt), su = halmos_rho(S, U, 2, 6, opt);
        ok = ok && st.overlaps(ts) && su.lo() <= st.hi() + tu.hi();
        for (std::int64_t n : {1, 2}) {
            const Enclosure a = weak_dw(S, T, n, 2, 6, opt), b = weak_dw(T, S, n, 2, 6, opt);
            const Enclosure c = weak_dw(T, U, n, 2, 6, opt), e = weak_dw(S, U, n, 2, 6, opt);
            ok = ok && a.overlaps(b) && e.lo() <= a.hi() + c.hi();
        }
        const MetricBound r_st = at_metric_lower(S, T, 2, 6, 2, opt), r_ts = at_metric_lower(T, S, 2, 6, 2, opt);
        const MetricBound r_tu = at_metric_lower(T, U, 2, 6, 2, opt), r_su = at_metric_lower(S, U, 2, 6, 2, opt);
        ok = ok && r_st.value.overlaps(r_ts.value) && r_su.value.lo() <= r_st.value.hi() + r_tu.value.hi();
        ++checked;
    }
    d << checked << " triples symmetric and triangular; ";

    Construction s(presets[2].params), m(presets[3].params);
    const MetricBound r = at_metric_lower(s, m, 2, 8, 8, opt);
    Rational best = 0;
    for (const auto& e : r.dw) best = rankone::max(best, e.lo());
    ok = ok && best > 0 && r.lower_bound_only;
    d << "staircase vs plateau staircase d_w lower bound " << dec(best);
    return {ok, d.str()};
}

Outcome structural_invariants() {
    bool ok = true;
    std::ostringstream d;
    for (const auto& r : props::all(200)) {
        ok = ok && r.ok() && r.cases == 200;
        d << r.name << " " << (r.cases - r.failures) << "/" << r.cases;
        if (!r.ok()) d << " (" << r.first_failure << ")";
        d << "; ";
    }
    return {ok, d.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle containment", oracle_containment},
        {"odometer rigidity", odometer_rigidity},
        {"chacon mild mixing", chacon_mild_mixing},
        {"eps-rigidity trend", eps_rigidity},
        {"forcing certificate", forcing},
        {"metric identities", metric_identities},
        {"structural invariants", structural_invariants},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << ". " << criteria[i].first << ": " << o.detail << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
