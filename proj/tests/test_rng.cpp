#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "evitram/rng.hpp"

using evitram::Rng;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(12345), b(12345);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("child streams depend only on seed and tag, not consumption") {
    Rng fresh(777);
    Rng consumed(777);
    for (int i = 0; i < 50; ++i) consumed.next_u64();

    Rng child_a = fresh.child(3);
    Rng child_b = consumed.child(3);
    for (int i = 0; i < 20; ++i) CHECK(child_a.next_u64() == child_b.next_u64());

    CHECK(fresh.derive_seed(0) != fresh.derive_seed(1));
    CHECK(Rng(1).derive_seed(5) != Rng(2).derive_seed(5));
}

TEST_CASE("uniform lands in [0,1) with the right mean") {
    Rng rng(99);
    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // 3 sigma for the mean of n uniforms: 3 * sqrt(1/12) / sqrt(n).
    const double bound = 3.0 * std::sqrt(1.0 / 12.0) / std::sqrt(n);
    CHECK(std::abs(sum / n - 0.5) < bound);
}

TEST_CASE("uniform(lo,hi) stays inside the interval") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.5, 4.0);
        CHECK(u >= -2.5);
        CHECK(u < 4.0);
    }
}

TEST_CASE("uniform_int covers the range with near-uniform frequencies") {
    Rng rng(11);
    const int n = 60000, k = 6;
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = rng.uniform_int(k);
        REQUIRE(v < static_cast<std::uint64_t>(k));
        ++counts[static_cast<size_t>(v)];
    }
    // 3 sigma binomial bound per category.
    const double p = 1.0 / k;
    const double bound = 3.0 * std::sqrt(n * p * (1 - p));
    for (int c = 0; c < k; ++c) CHECK(std::abs(counts[static_cast<size_t>(c)] - n * p) < bound);
}

TEST_CASE("normal has standard moments") {
    Rng rng(31);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("permutation is a bijection over 0..n-1") {
    Rng rng(8);
    const std::vector<int> p = rng.permutation(100);
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("permutations from different streams differ") {
    Rng a(1), b(2);
    CHECK(a.permutation(50) != b.permutation(50));
}

TEST_CASE("stream values are frozen") {
    // Regression anchors for the exact generator recurrence; any change to
    // the mixing constants or draw accounting trips these.
    Rng rng(42);
    CHECK(rng.next_u64() == 13679457532755275413ULL);
    CHECK(rng.next_u64() == 2949826092126892291ULL);
    CHECK(Rng(0).derive_seed(0) == 16294208416658607535ULL);
}
