#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evitrack/rng.hpp"

using namespace evitrack;

TEST_CASE("identical seeds give identical streams") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.gauss() == b.gauss());
    }
}

TEST_CASE("uniform stays in [0, 1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gauss moments") {
    Rng rng(42);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = rng.gauss();
        sum += g;
        sumsq += g * g;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("seed derivation separates streams") {
    auto s1 = derive_seed(0, "simulate", 1);
    auto s2 = derive_seed(0, "simulate", 2);
    auto s3 = derive_seed(0, "inference", 1);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(s2 != s3);
    // Root seed enters by XOR: flipping root flips the stream seed bitwise.
    CHECK((derive_seed(5, "simulate", 1) ^ derive_seed(0, "simulate", 1)) == 5);
    // Stable across calls.
    CHECK(derive_seed(0, "simulate", 1) == s1);
}
