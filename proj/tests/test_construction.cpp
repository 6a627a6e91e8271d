#include <catch_amalgamated.hpp>

#include <rankone/construction.hpp>
#include <rankone/presets.hpp>

using namespace rankone;

namespace {

ConstructionParams fixed(std::int64_t h1, std::vector<StageParams> stages, std::optional<TailMassBound> bound = std::nullopt) {
    ConstructionParams p;
    p.h1 = h1;
    p.rule = [stages](int j, std::int64_t) { return stages[static_cast<std::size_t>(std::min<int>(j, static_cast<int>(stages.size())) - 1)]; };
    p.tail_spacer_mass_bound = std::move(bound);
    return p;
}

// r_1 = 2, s = (1,2); r_2 = 3, s = (1,2,3); then r = 4
Construction small_staircase() { return Construction(fixed(1, {{2, {1, 2}}, {3, {1, 2, 3}}, {4, {1, 2, 3, 4}}})); }

}  // namespace

TEST_CASE("chacon heights") {
    Construction c(make_chacon().params);
    CHECK(c.height(1) == 1);
    CHECK(c.height(2) == 4);
    CHECK(c.height(3) == 13);
    CHECK(c.height(4) == 40);
    CHECK(c.height(5) == 121);
}

TEST_CASE("odometer heights and mass") {
    Construction c(make_odometer().params);
    for (int j = 1; j <= 4; ++j) {
        CHECK(c.height(j) == (std::int64_t{1} << (j - 1)));
        CHECK(c.stage(j).total_mass == 1);
    }
}

TEST_CASE("staircase recursion") {
    auto c = small_staircase();
    CHECK(c.height(2) == 5);
    CHECK(c.height(3) == 21);
}

TEST_CASE("stage records") {
    Construction chacon(make_chacon().params);
    const Stage& s = chacon.stage(2);
    CHECK(s.height == 4);
    CHECK(s.width == Rational(1, 3));
    CHECK(s.offsets == std::vector<Level>{0, 1, 3});
    CHECK(s.total_mass == Rational(4, 3));

    Construction odo(make_odometer().params);
    CHECK(odo.stage(3).height == 4);
    CHECK(odo.stage(3).width == Rational(1, 4));
    CHECK(odo.stage(3).offsets == std::vector<Level>{0, 2});

    auto st = small_staircase();
    CHECK(st.stage(2).width == Rational(1, 2));
    CHECK(st.stage(2).offsets == std::vector<Level>{0, 2});
    CHECK_THROWS_AS(st.stage(0), std::out_of_range);
}

TEST_CASE("refine_level") {
    Construction chacon(make_chacon().params);
    CHECK(refine_level(chacon, 1, 0) == std::vector<Level>{0, 1, 3});
    Construction odo(make_odometer().params);
    CHECK(refine_level(odo, 2, 1) == std::vector<Level>{1, 3});
    CHECK_THROWS_AS(refine_level(odo, 2, 2), std::out_of_range);
    CHECK_THROWS_AS(refine_level(odo, 2, -1), std::out_of_range);
    auto st = small_staircase();
    for (int j = 1; j <= 3; ++j)
        for (Level l = 0; l < st.height(j); ++l) CHECK(static_cast<std::int64_t>(refine_level(st, j, l).size()) == st.cut(j).cuts);
}

TEST_CASE("spacer_levels") {
    Construction chacon(make_chacon().params);
    CHECK(spacer_levels(chacon, 1) == std::vector<Level>{2});
    Construction odo(make_odometer().params);
    CHECK(spacer_levels(odo, 3).empty());
    auto st = small_staircase();
    CHECK(spacer_levels(st, 1) == std::vector<Level>{1, 3, 4});
}

TEST_CASE("total mass enclosure") {
    Construction chacon(make_chacon().params);
    const TotalMass m = total_mass_enclosure(chacon, 3);
    CHECK(m.lo == Rational(13, 9));
    REQUIRE(m.known());
    CHECK(*m.hi == Rational(3, 2));

    Construction odo(make_odometer().params);
    CHECK(total_mass_enclosure(odo, 5).enclosure() == Enclosure(Rational(1)));

    auto st = small_staircase();
    const TotalMass u = total_mass_enclosure(st, 2);
    CHECK(u.lo == Rational(5, 2));
    CHECK_FALSE(u.known());
    CHECK_THROWS_AS(u.enclosure(), std::logic_error);
}

TEST_CASE("invalid stage data is rejected with the stage index") {
    auto expect_stage = [](ConstructionParams p, int stage) {
        Construction c(std::move(p));
        try {
            c.stage(stage + 1);
            FAIL("expected a construction error");
        } catch (const ConstructionError& e) {
            CHECK(e.stage() == stage);
        }
    };
    expect_stage(fixed(1, {{2, {0, 0}}, {1, {0}}}), 2);
    expect_stage(fixed(1, {{3, {0, 1}}}), 1);
    expect_stage(fixed(1, {{2, {0, 0}}, {2, {0, -1}}}), 2);
    CHECK_THROWS_AS(Construction(fixed(0, {{2, {0, 0}}})), ConstructionError);
}

TEST_CASE("height overflow is detected") {
    Construction c(fixed(1, {{1000, std::vector<std::int64_t>(1000, 0)}}));
    CHECK_THROWS_AS(c.stage(10), ConstructionError);
}

TEST_CASE("stage rule is consulted once per stage") {
    int calls = 0;
    ConstructionParams p;
    p.h1 = 2;
    p.rule = [&calls](int, std::int64_t) {
        ++calls;
        return StageParams{2, {0, 1}};
    };
    Construction c(p);
    c.stage(5);
    c.stage(3);
    c.cut(2);
    CHECK(calls == 4);
    CHECK(c.materialized() == 5);
}
