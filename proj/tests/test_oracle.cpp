#include <catch_amalgamated.hpp>

#include <rankone/oracle.hpp>
#include <rankone/presets.hpp>
#include <rankone/stepcalc.hpp>

#include <random>

using namespace rankone;

TEST_CASE("realize lays levels out left to right") {
    Construction odo(make_odometer().params);
    const auto m = realize(odo, 2);
    REQUIRE(m.size() == 1);
    CHECK(m[0].source == Interval{0, Rational(1, 2)});
    CHECK(m[0].offset == Rational(1, 2));

    Construction ch(make_chacon().params);
    const auto c2 = realize(ch, 2);
    CHECK(c2.size() == 3);
    Rational defined = 0;
    for (const auto& t : c2) defined += t.source.length();
    CHECK(defined == 1);
    CHECK(tower_extent(ch, 2).length() == Rational(4, 3));

    CHECK(realize(ch, 1).empty());
}

TEST_CASE("piecewise translations are injective with the expected defined mass") {
    Construction st(make_staircase({}).params);
    for (int J = 1; J <= 5; ++J) {
        const auto T = realize_map(st, J);
        CHECK(T.injective());
        CHECK(measure(T.domain()) == from_int(st.height(J) - 1) * st.width(J));
        for (std::int64_t n : {2, 5, 11}) {
            const auto P = realize_power(st, J, n);
            CHECK(P.injective());
            const auto Q = realize_power(st, J, -n);
            CHECK(measure(P.domain()) == measure(Q.domain()));
        }
    }
}

TEST_CASE("composition with the inverse is the identity on the domain") {
    Construction ch(make_chacon().params);
    const auto T = realize_power(ch, 4, 7);
    const auto I = compose(T.inverse(), T);
    for (const auto& p : I.pieces()) CHECK(p.offset == 0);
    CHECK(I.domain() == T.domain());
}

TEST_CASE("oracle examples") {
    Construction odo(make_odometer().params);
    const TowerSet A{4, {0, 2, 4, 6}};
    const auto r = oracle_correlation(odo, 4, 2, A, A);
    CHECK(r.value == Rational(3, 8));
    CHECK(r.undefined_mass == Rational(1, 8));
    CHECK_FALSE(r.fully_undefined);
    CHECK(correlation_at(odo, 2, A, A, 4) == Enclosure(r.value, r.value + r.undefined_mass));

    const TowerSet L{2, {0}};
    const auto z = oracle_correlation(odo, 3, 0, L, TowerSet{3, {0, 1}});
    CHECK(z.value == Rational(1, 4));
    CHECK(z.undefined_mass == 0);

    Construction ch(make_chacon().params);
    const auto c = oracle_correlation(ch, 3, 1, L, L);
    CHECK(c.value == 0);

    const auto far = oracle_correlation(ch, 3, 13, L, L);
    CHECK(far.fully_undefined);
    CHECK(far.undefined_mass == Rational(1, 3));
}

TEST_CASE("set expansion agrees with measure and refinement counts") {
    Construction ch(make_chacon().params);
    const TowerSet A{2, {0, 2, 3}};
    for (int J = 2; J <= 5; ++J) CHECK(measure(expand_to_stage(ch, A, J)) == A.measure(ch));
    CHECK_THROWS_AS(expand_to_stage(ch, A, 1), std::invalid_argument);
}

TEST_CASE("cached powers match direct powers") {
    Construction st(make_staircase({}).params);
    OraclePowers cache(st, 4);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::int64_t n = static_cast<std::int64_t>(rng() % 60) - 30;
        const TowerSet A = TowerSet::of(2, {static_cast<Level>(rng() % 5), static_cast<Level>(rng() % 5)});
        const TowerSet B = TowerSet::of(3, {static_cast<Level>(rng() % 21)});
        const auto x = cache.correlation(n, A, B);
        const auto y = oracle_correlation(st, 4, n, A, B);
        CHECK(x.value == y.value);
        CHECK(x.undefined_mass == y.undefined_mass);
    }
}
