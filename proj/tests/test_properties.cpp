#include <catch_amalgamated.hpp>

#include "properties.hpp"

using namespace rankone;

namespace {

void check(const props::SuiteResult& r) {
    INFO(r.name << ": " << r.first_failure);
    CHECK(r.cases == 200);
    CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("height, width and mass recursions") { check(props::recursions()); }
TEST_CASE("refinements and spacers partition the next stage") { check(props::partition()); }
TEST_CASE("shifts conserve mass") { check(props::shift_conservation()); }
TEST_CASE("forward and backward correlations agree") { check(props::adjoint_symmetry()); }
TEST_CASE("enclosures nest as the stage grows") { check(props::nesting()); }
