#include <catch_amalgamated.hpp>

#include <rankone/diagnostics.hpp>

using namespace rankone;

namespace {

Observable centered(const TowerSet& A) { return Observable::from(StepFunction::indicator(A), true); }

}  // namespace

TEST_CASE("classify") {
    const Enclosure psi(Rational(1, 2));
    CHECK(classify(Enclosure(Rational(3, 4)), psi) == Verdict::exceeds);
    CHECK(classify(Enclosure(Rational(-3, 4)), psi) == Verdict::exceeds);
    CHECK(classify(Enclosure(Rational(1, 4)), psi) == Verdict::below);
    CHECK(classify(Enclosure(Rational(1, 4), Rational(3, 4)), psi) == Verdict::unknown);
    CHECK(to_string(Verdict::exceeds) == "EXCEEDS");
}

TEST_CASE("odometer decay scan") {
    Construction c(make_odometer().params);
    const auto f = centered({2, {0}});
    const auto scan = decay_scan(c, f, DecaySchedule::power(1), 8);
    REQUIRE(scan.rows.size() == 9);
    // (f,f) = 1/4 < psi(1) = 1
    CHECK(scan.rows[0].verdict == Verdict::below);
    CHECK(scan.rows[2].correlation.contains(Rational(1, 4)));
    CHECK(scan.rows[2].verdict == Verdict::below);
    // n = 8: 1/4 > 1/8
    CHECK(scan.rows[8].verdict == Verdict::exceeds);
    // n = 4 is a tie, |(T^4 f, f)| = 1/4 = psi(4): neither strict verdict can be certified
    CHECK(scan.rows[4].correlation.contains(Rational(1, 4)));
    CHECK(scan.rows[4].verdict == Verdict::unknown);
    for (const auto& r : scan.rows) {
        if (r.n != 4) CHECK(r.verdict != Verdict::unknown);
        CHECK(r.correlation.width() <= Rational(1, 1000));
    }
    CHECK(scan.exceedances == std::vector<std::int64_t>{5, 6, 7, 8});
}

TEST_CASE("decay scan against a dominating table is all BELOW") {
    Construction c(make_chacon().params);
    const auto f = centered({2, {0, 1}});
    const auto scan = decay_scan(c, f, DecaySchedule::table({Rational(1)}), 20);
    for (const auto& r : scan.rows) CHECK(r.verdict == Verdict::below);
    CHECK(scan.exceedances.empty());
}

TEST_CASE("scans do not depend on the thread count") {
    Construction c(make_chacon().params);
    const auto f = centered({2, {0}});
    ScanOptions one, four;
    four.threads = 4;
    const auto a = decay_scan(c, f, DecaySchedule::inverse_log(), 30, one);
    const auto b = decay_scan(c, f, DecaySchedule::inverse_log(), 30, four);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].correlation == b.rows[i].correlation);
        CHECK(a.rows[i].verdict == b.rows[i].verdict);
    }
}

TEST_CASE("odometer is rigid along its heights") {
    const Preset p = make_odometer();
    Construction c(p.params);
    const auto f = centered({2, {0}});
    const auto scan = rigidity_scan(c, f, structured_times(c, p, 2, 6));
    CHECK(scan.variance.contains(Rational(1, 4)));
    for (const auto& row : scan.rows) {
        REQUIRE(row.ratio);
        CHECK(row.ratio->contains(Rational(1)));
        CHECK(*rigidity_gap(row, Rational(1)) <= Rational(1, 100));
    }
}

TEST_CASE("chacon ratios at its heights stay away from zero") {
    const Preset p = make_chacon();
    Construction c(p.params);
    const auto f = centered({2, {0}});
    const auto scan = rigidity_scan(c, f, structured_times(c, p, 2, 6));
    for (const auto& row : scan.rows) {
        REQUIRE(row.ratio);
        CHECK(row.ratio->lo() > Rational(1, 10));
    }
}

TEST_CASE("mild mixing scan") {
    Construction odo(make_odometer().params);
    const TowerSet A{2, {0}};
    const auto s = mild_mixing_scan(odo, A, 8, Rational(1, 100));
    CHECK(std::find(s.candidates.begin(), s.candidates.end(), 2) != s.candidates.end());
    REQUIRE(s.minimum);
    CHECK(s.minimum->lo() == 0);
    // every even k fixes A; the argmin is one of them
    CHECK(s.argmin % 2 == 0);
    CHECK(s.distances.at(static_cast<std::size_t>(s.argmin - 1)).second.lo() == 0);

    const auto empty = mild_mixing_scan(odo, A, 0, Rational(1, 100));
    CHECK(empty.distances.empty());
    CHECK_FALSE(empty.minimum);

    CHECK_THROWS_AS(mild_mixing_scan(odo, TowerSet{2, {0, 1}}, 4, Rational(1, 100)), std::invalid_argument);
    CHECK_THROWS_AS(mild_mixing_scan(odo, TowerSet{2, {}}, 4, Rational(1, 100)), std::invalid_argument);
}

TEST_CASE("cesaro check") {
    Construction odo(make_odometer().params);
    const TowerSet A{2, {0}};
    const auto e = cesaro_check(odo, A, {2, 4, 8, 16});
    REQUIRE(e.size() == 4);
    for (const auto& r : e) CHECK(r.value.hi() <= Rational(1, 1000));
    CHECK(cesaro_check(odo, A, {0})[0].value == Enclosure(Rational(0)));

    const Preset p = make_chacon();
    Construction ch(p.params);
    std::vector<std::int64_t> heights;
    for (const auto& t : structured_times(ch, p, 2, 5)) heights.push_back(t.time);
    for (const auto& r : cesaro_check(ch, A, heights)) CHECK(r.value.lo() > 0);
}
