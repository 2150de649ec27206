#include <catch2/catch_amalgamated.hpp>
#include "lfilter/lfilter.hpp"
TEST_CASE("placeholder test_experiment") { REQUIRE(true); }
