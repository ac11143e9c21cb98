#include "doctest.h"
#include "helpers.hpp"

#include "mdam/hotdeck.hpp"

using namespace mdam;

namespace {

// keys a (binary) and c (three levels); x continuous to be donated.
CompletedDataset keyed(const std::string& csv) {
    static const auto s = test::schema_of({VariableSpec::binary("a"), VariableSpec::categorical("c", {"1", "2", "3"}),
                                           VariableSpec::continuous("x")});
    return CompletedDataset::from_table(test::table_of(s, csv));
}

}  // namespace

TEST_CASE("cells are numbered with the first key slowest") {
    const auto d = keyed("a,c,x,w\n0,1,1,1\n0,3,2,1\n1,2,3,1\n1,2,4,1\n");
    const auto idx = build_pools(d, {"a", "c"});
    CHECK(idx.pool_count() == 6);
    CHECK(idx.cell_of(std::vector<int>{1, 1}) == 4);
    CHECK(idx.levels_of(5) == std::vector<int>{1, 2});
    CHECK(idx.pool(0) == std::vector<std::size_t>{0});
    CHECK(idx.pool(2) == std::vector<std::size_t>{1});
    CHECK(idx.pool(4) == std::vector<std::size_t>{2, 3});
}

TEST_CASE("empty cells fall back to the nearest nonempty cell") {
    const auto d = keyed("a,c,x,w\n0,1,1,1\n0,3,2,1\n1,2,3,1\n1,2,4,1\n");
    const auto idx = build_pools(d, {"a", "c"});
    CHECK(idx.resolve(4) == 4);
    // (1,c=1): distance 1 to (0,c=1) [size 1] and to (1,c=2) [size 2]
    CHECK(idx.resolve(3) == 4);
    // (0,c=2): distance 1 to (0,c=1), (0,c=3) [size 1 each] and (1,c=2) [size 2]
    CHECK(idx.resolve(1) == 4);
    // (1,c=3): distance 1 to (0,c=3) [1] and (1,c=2) [2]
    CHECK(idx.resolve(5) == 4);
}

TEST_CASE("ties in distance and size go to the lower cell") {
    const auto d = keyed("a,c,x,w\n0,1,1,1\n1,3,2,1\n");
    const auto idx = build_pools(d, {"a", "c"});
    // (0,c=3) is at distance 1 from both (0,c=1)=0 and (1,c=3)=5, same size
    CHECK(idx.resolve(2) == 0);
}

TEST_CASE("continuous keys are rejected") {
    const auto d = keyed("a,c,x,w\n0,1,1,1\n");
    CHECK_THROWS(build_pools(d, {"x"}));
}

TEST_CASE("hot deck donates whole rows from the matching cell") {
    auto d = keyed("a,c,x,w\n0,1,10,1\n0,1,11,1\n1,2,50,1\n,,,1\n,,,1\n");
    d.impute(0, 3, 0.0);
    d.impute(1, 3, 1.0);
    d.impute(0, 4, 1.0);
    d.impute(1, 4, 2.0);
    d.set_weights({1, 1, 1, 1, 1});
    const auto idx = build_pools(d, {"a", "c"});
    Rng rng = make_stream(2, 2);
    hot_deck_fill(d, idx, rng);
    CHECK(d.complete());
    CHECK((d.value(2, 3) == 10.0 || d.value(2, 3) == 11.0));
    CHECK(d.value(2, 4) == 50.0);
}

TEST_CASE("donation is uniform within a pool") {
    const auto d = keyed("a,c,x,w\n0,1,1,1\n0,1,2,1\n0,1,3,1\n0,1,4,1\n");
    const auto idx = build_pools(d, {"a"});
    Rng rng = make_stream(3, 3);
    int counts[4] = {0, 0, 0, 0};
    for (int k = 0; k < 40000; ++k) ++counts[donate(idx, 0, rng)];
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.04));
}
