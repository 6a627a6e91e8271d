#include <catch_amalgamated.hpp>

#include <rankone/metrics.hpp>
#include <rankone/presets.hpp>

using namespace rankone;

namespace {

Preset staircase() { return make_staircase({IntSchedule::affine(1, 1), 1}); }

Preset plateau_from_stage_2(std::int64_t v) {
    ModifiedStaircaseRule rule;
    rule.cuts = IntSchedule::affine(1, 1);
    rule.plateau = IntSchedule::constant(v);
    rule.first_stage = 2;
    return make_modified_staircase(rule);
}

MetricOptions quick() {
    MetricOptions o;
    o.tol = Rational(1, 100);
    o.budget.max_stage = 6;
    return o;
}

}  // namespace

TEST_CASE("canonical family enumerates levels stage by stage") {
    Construction c(make_chacon().params);
    const auto f = canonical_family(c, 2, 10);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == TowerSet{1, {0}});
    CHECK(f[1] == TowerSet{2, {0}});
    CHECK(f[4] == TowerSet{2, {3}});
    CHECK(canonical_family(c, 3, 3).size() == 3);
    CHECK_THROWS_AS(canonical_family(c, 2, 0), std::invalid_argument);
}

TEST_CASE("layout puts every level inside [0, mu(X_J))") {
    Construction c(plateau_from_stage_2(3).params);
    Layout L(c);
    for (int J = 1; J <= 4; ++J) {
        std::vector<Rational> xs;
        for (Level l = 0; l < c.height(J); ++l) xs.push_back(L.position(J, l));
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] - xs[i - 1] >= c.width(J));
        CHECK(xs.back() + c.width(J) == c.stage(J).total_mass);
    }
    // a level and its refinement occupy the same set
    for (Level l = 0; l < c.height(2); ++l) {
        Rational lo = L.position(2, l);
        Rational total = 0;
        for (Level k : refine_level(c, 2, l)) {
            CHECK(L.position(3, k) >= lo);
            CHECK(L.position(3, k) + c.width(3) <= lo + c.width(2));
            total += c.width(3);
        }
        CHECK(total == c.width(2));
    }
}

TEST_CASE("prefix mismatch is rejected") {
    Construction a(make_chacon().params), b(make_odometer().params);
    CHECK_THROWS_AS(halmos_rho(a, b, 2, 4, quick()), PrefixMismatch);
    CHECK_NOTHROW(halmos_rho(a, b, 1, 4, quick()));
    Construction s(staircase().params), m(plateau_from_stage_2(3).params);
    CHECK_NOTHROW(weak_dw(s, m, 1, 2, 6, quick()));
    CHECK_THROWS_AS(weak_dw(s, m, 1, 3, 6, quick()), PrefixMismatch);
}

TEST_CASE("identical constructions are at distance zero") {
    for (const Preset& p : {make_chacon(), make_odometer(), staircase()}) {
        Construction a(p.params), b(p.params);
        const Enclosure rho = halmos_rho(a, b, 2, 6, quick());
        CHECK(rho.lo() == 0);
        CHECK(rho.hi() >= pow2(-5));
        for (std::int64_t n : {0, 1, 3}) CHECK(weak_dw(a, b, n, 2, 6, quick()).lo() == 0);
        const MetricBound r = at_metric_lower(a, b, 2, 6, 4, quick());
        CHECK(r.value.lo() == 0);
        CHECK(r.lower_bound_only);
    }
}

TEST_CASE("zero power gives zero before the tail") {
    Construction a(staircase().params), b(plateau_from_stage_2(3).params);
    const Enclosure e = weak_dw(a, b, 0, 2, 6, quick());
    CHECK(e.lo() == 0);
    CHECK(e.hi() == pow2(-4));
}

TEST_CASE("staircase and plateau staircase are separated") {
    Construction a(staircase().params), b(plateau_from_stage_2(3).params);
    const Enclosure rho = halmos_rho(a, b, 2, 8, quick());
    CHECK(rho.lo() > 0);
    CHECK(halmos_rho(b, a, 2, 8, quick()).overlaps(rho));
    const MetricBound r = at_metric_lower(a, b, 2, 8, 8, quick());
    CHECK(r.value.lo() > 0);
    bool positive = false;
    for (const auto& d : r.dw) positive = positive || d.lo() > 0;
    CHECK(positive);
    // lower bound nondecreasing in N
    const MetricBound r4 = at_metric_lower(a, b, 2, 8, 4, quick());
    CHECK(r4.value.lo() <= r.value.lo());
}

TEST_CASE("chacon and odometer differ at the first power") {
    Construction a(make_chacon().params), b(make_odometer().params);
    const Enclosure d = weak_dw(a, b, 1, 1, 6, quick());
    CHECK(d.lo() > 0);
    CHECK(weak_dw(b, a, 1, 1, 6, quick()).overlaps(d));
}
