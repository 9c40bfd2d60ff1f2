#include <doctest.h>

#include <cmath>
#include <set>

#include "mothpose/rng.hpp"

using mothpose::Rng;

TEST_CASE("identical seeds give identical streams") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
}

TEST_CASE("uniform_int is inclusive on both ends") {
    Rng rng(11);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_int(-3, 3);
        REQUIRE(v >= -3);
        REQUIRE(v <= 3);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("gaussian matches requested moments statistically") {
    // Oracle: sample mean of N(mu, sigma) lies within 4*sigma/sqrt(N) of mu,
    // and the sample stddev within a few percent, for N = 2*10^5.
    Rng rng(99);
    const int n = 200000;
    const double mu = 1.5, sigma = 0.25;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian(mu, sigma);
        sum += g;
        sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - mu) < 4.0 * sigma / std::sqrt(double(n)));
    CHECK(std::abs(std::sqrt(var) - sigma) < 0.03 * sigma);
}

TEST_CASE("derived streams differ per index but are reproducible") {
    Rng a = Rng::derive(5, 0);
    Rng b = Rng::derive(5, 1);
    Rng a2 = Rng::derive(5, 0);
    CHECK(a.next_u64() != b.next_u64());
    CHECK(Rng::derive(5, 0).next_u64() == a2.next_u64());
}
