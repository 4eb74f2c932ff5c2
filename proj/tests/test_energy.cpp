#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "declab/energy.hpp"
#include "declab/error.hpp"

using namespace declab;

namespace {

std::vector<IntVector> random_set(std::mt19937& rng, std::size_t n, std::size_t size, long long range) {
    std::uniform_int_distribution<long long> pick(-range, range);
    std::set<IntVector> s;
    while (s.size() < size) {
        IntVector v(n);
        for (auto& x : v) x = pick(rng);
        s.insert(v);
    }
    return {s.begin(), s.end()};
}

const std::vector<IntVector> parabola3{{1, 1}, {2, 4}, {3, 9}};

}  // namespace

TEST_CASE("brute force oracle values") {
    for (std::size_t k : {1, 2, 3}) CHECK(energy_bruteforce(std::vector<IntVector>{{5, -2}}, k) == 1);
    CHECK(energy_bruteforce(parabola3, 2) == 15);
    std::mt19937 rng(3);
    const auto s = random_set(rng, 2, 6, 3);
    for (std::size_t k : {1, 2, 3}) CHECK(energy_bruteforce(s, k) >= Count(std::pow(6.0, k)));
    CHECK_THROWS_AS(energy_bruteforce(random_set(rng, 1, 30, 100), 3), GuardError);
    CHECK_THROWS_AS(energy_bruteforce(std::vector<IntVector>{}, 2), ContractError);
}

TEST_CASE("hashed energy agrees with brute force on random sets") {
    std::mt19937 rng(20261014);
    std::uniform_int_distribution<std::size_t> dim(1, 3), size(1, 12), kk(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = dim(rng), m = size(rng), k = kk(rng);
        const auto s = random_set(rng, n, m, 6);
        const Count brute = energy_bruteforce(s, k);
        CHECK(energy_hashed(s, k).value == brute);
        EnergyOptions sharded;
        sharded.workers = 3;
        CHECK(energy_hashed(s, k, sharded).value == brute);
        if (m <= 8) CHECK(moment_integral_torus(s, k) == brute);
    }
}

TEST_CASE("arithmetic progression closed form") {
    for (long long N : {1, 2, 5, 17, 40}) {
        std::vector<IntVector> ap;
        for (long long l = 0; l < N; ++l) ap.push_back({l});
        CHECK(energy_hashed(ap, 2).value == Count((2 * N * N * N + N) / 3));
        CHECK(moment_integral_torus(ap, 1) == Count(N));
        CHECK(moment_integral_torus(ap, 2) == Count((2 * N * N * N + N) / 3));
    }
}

TEST_CASE("moment integral equals the hashed count") {
    CHECK(moment_integral_torus(parabola3, 2) == 15);
    std::mt19937 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_set(rng, 2, 20, 15);
        for (std::size_t k : {2, 3}) CHECK(moment_integral_torus(s, k) == energy_hashed(s, k).value);
    }
    // Multiplicities beyond 64 bits take the big-integer path: the answer is C(80, 40).
    Count binom = 1;
    for (int i = 0; i < 40; ++i) binom = binom * (80 - i) / (i + 1);
    CHECK(moment_integral_torus({{0}, {1}}, 40) == binom);
    CHECK_THROWS_AS(moment_integral_torus({{0, 0}, {1000000, 1000000}}, 4), GuardError);
}

TEST_CASE("symmetries and monotonicity") {
    std::mt19937 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_set(rng, 3, 10, 5);
        for (std::size_t k : {2, 3}) {
            const Count b = energy_hashed(s, k).value;
            auto shifted = s, permuted = s;
            for (auto& v : shifted) {
                v[0] += 100;
                v[2] -= 7;
            }
            for (auto& v : permuted) std::swap(v[0], v[2]);
            CHECK(energy_hashed(shifted, k).value == b);
            CHECK(energy_hashed(permuted, k).value == b);
            const std::vector<IntVector> sub(s.begin(), s.begin() + 6);
            CHECK(energy_hashed(sub, k).value <= b);
            CHECK(b >= Count(std::pow(10.0, k)));
        }
    }
}

TEST_CASE("real atoms quantize with an audit") {
    std::vector<Vector> pts;
    for (double l : {1.0, 2.0, 3.0}) pts.push_back((Vector(2) << l, l * l).finished());
    const auto r = energy_hashed(pts, 2);
    CHECK(r.value == 15);
    CHECK(r.scale == doctest::Approx(std::sqrt(10.0) / 100));
    CHECK(energy_bruteforce(pts, 2) == 15);

    // Irrational points on the parabola: only trivial solutions.
    std::vector<Vector> irr;
    for (int l = 1; l <= 6; ++l) {
        const double x = l * std::sqrt(2.0);
        irr.push_back((Vector(2) << x, x * x).finished());
    }
    CHECK(energy_hashed(irr, 2).value == energy_bruteforce(irr, 2, 1e-9));

    // A chain of nearly equal sums cannot be told apart at this scale.
    std::vector<Vector> chain;
    for (int l = 0; l < 6; ++l) chain.push_back((Vector(1) << 0.001 * l).finished());
    CHECK_THROWS_AS(energy_hashed(chain, 2, 0.001), CollisionError);
}

TEST_CASE("vinogradov energy") {
    for (std::size_t n : {1, 2, 3}) CHECK(vinogradov_energy(1, n, 3).value == 1);
    CHECK(vinogradov_energy(3, 2, 2).value == 15);
    CHECK(vinogradov_energy(10, 3, 2).value == energy_bruteforce(moment_curve_points(10, 3), 2));
    CHECK(vinogradov_energy(12, 2, 3).value == moment_integral_torus(moment_curve_points(12, 2), 3));
    EnergyOptions tight;
    tight.max_entries = 1000;
    CHECK_THROWS_AS(vinogradov_energy(100, 2, 3, tight), GuardError);
}
