#include <doctest.h>

#include "mothpose/rng.hpp"
#include "mothpose/tensor.hpp"

using mothpose::BoundsError;
using mothpose::Rng;
using mothpose::ShapeError;
using mothpose::Tensor4;
using mothpose::tensor_new;

TEST_CASE("tensor_new fills the requested shape") {
    const Tensor4 z = tensor_new(1, 1, 2, 2, 0.0);
    CHECK(z.size() == 4);
    for (double v : z.flat()) CHECK(v == 0.0);

    const Tensor4 ones = tensor_new(2, 3, 4, 5, 1.0);
    CHECK(ones.size() == 2 * 3 * 4 * 5); // 120
    for (double v : ones.flat()) CHECK(v == 1.0);

    CHECK(tensor_new(1, 3, 224, 224).size() == 150528);
}

TEST_CASE("tensor rejects bad shapes") {
    CHECK_THROWS_AS(tensor_new(0, 1, 1, 1), ShapeError);
    CHECK_THROWS_AS(tensor_new(1, -2, 1, 1), ShapeError);
    // 2^31 * 2^31 elements overflows the volume cap long before memory.
    CHECK_THROWS_AS(tensor_new(1, 1, 1LL << 31, 1LL << 31), ShapeError);
}

TEST_CASE("get/set honor the row-major offset formula") {
    Tensor4 t(1, 2, 2, 2, 0.0);
    t.set(0, 0, 0, 0, 7.5);
    CHECK(t.at(0, 0, 0, 0) == 7.5);

    t.set(0, 1, 0, 1, 3.0);
    CHECK(t.offset(0, 1, 0, 1) == 5); // ((0*2+1)*2+0)*2+1
    CHECK(t.flat()[5] == 3.0);

    CHECK(Tensor4(3, 2, 4, 4).at(0, 0, 0, 0) == 0.0);
}

TEST_CASE("out-of-range indices throw") {
    Tensor4 t(1, 2, 3, 4);
    CHECK_THROWS_AS(t.at(1, 0, 0, 0), BoundsError);
    CHECK_THROWS_AS(t.at(0, 2, 0, 0), BoundsError);
    CHECK_THROWS_AS(t.at(0, 0, 3, 0), BoundsError);
    CHECK_THROWS_AS(t.at(0, 0, 0, -1), BoundsError);
    CHECK_NOTHROW(t.at(0, 1, 2, 3));
}

TEST_CASE("random get-after-set round trip leaves other elements alone") {
    Tensor4 t(2, 3, 5, 7, 0.0);
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const auto i = rng.uniform_int(0, t.n() - 1);
        const auto j = rng.uniform_int(0, t.c() - 1);
        const auto k = rng.uniform_int(0, t.h() - 1);
        const auto l = rng.uniform_int(0, t.w() - 1);
        const double v = rng.uniform(-100.0, 100.0);
        Tensor4 before = t;
        t.set(i, j, k, l, v);
        CHECK(t.at(i, j, k, l) == v);
        before.set(i, j, k, l, v);
        CHECK(t == before);
    }
}

TEST_CASE("index to offset map is a bijection") {
    const Tensor4 t(2, 3, 4, 5);
    std::vector<int> hits(static_cast<std::size_t>(t.size()), 0);
    for (std::int64_t i = 0; i < t.n(); ++i)
        for (std::int64_t j = 0; j < t.c(); ++j)
            for (std::int64_t k = 0; k < t.h(); ++k)
                for (std::int64_t l = 0; l < t.w(); ++l) {
                    const std::int64_t o = t.offset(i, j, k, l);
                    REQUIRE(o >= 0);
                    REQUIRE(o < t.size());
                    ++hits[static_cast<std::size_t>(o)];
                }
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("sample pointers address contiguous per-sample blocks") {
    Tensor4 t(3, 2, 2, 2);
    CHECK(t.sample_size() == 8);
    t.sample(1)[0] = 9.0;
    CHECK(t.at(1, 0, 0, 0) == 9.0);
    CHECK(t.sample(2) - t.sample(0) == 16);
}
