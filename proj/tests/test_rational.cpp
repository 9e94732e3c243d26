#include <catch2/catch_amalgamated.hpp>

#include "occultist/matrix.hpp"

#include <random>

using namespace occultist;

namespace {

Rat rand_rat(std::mt19937& rng) {
    std::uniform_int_distribution<int> num(-9, 9);
    std::uniform_int_distribution<int> den(1, 6);
    return Rat(num(rng), den(rng));
}

RMat rand_mat(std::mt19937& rng, std::size_t n) {
    RMat m(n);
    for (auto& x : m.a) x = rand_rat(rng);
    return m;
}

// Oracle: naive polynomial product, coefficients low to high.
std::vector<Rat> poly_mul(const std::vector<Rat>& p, const std::vector<Rat>& q) {
    std::vector<Rat> r(p.size() + q.size() - 1, Rat(0));
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

}  // namespace

TEST_CASE("rational parsing round-trips and rejects bad input") {
    CHECK(parse_rat("3/4") == Rat(3, 4));
    CHECK(parse_rat("-6/8") == Rat(-3, 4));
    CHECK(parse_rat("17") == Rat(17));
    CHECK(rat_to_string(parse_rat("-6/8")) == "-3/4");
    CHECK(rat_to_string(parse_rat("5/1")) == "5");
    CHECK_THROWS_AS(parse_rat("1/0"), RationalParseError);
    CHECK_THROWS_AS(parse_rat("x"), RationalParseError);
    CHECK_THROWS_AS(parse_rat(""), RationalParseError);
}

TEST_CASE("canonical_line gives primitive integers with positive leading sign") {
    Vec v = {Rat(-2, 3), Rat(4, 3), Rat(0)};
    CHECK(canonical_line(v) == Vec{Rat(1), Rat(-2), Rat(0)});
    Vec w = {Rat(0), Rat(0), Rat(-5)};
    CHECK(canonical_line(w) == Vec{Rat(0), Rat(0), Rat(1)});
}

TEST_CASE("matrix inverse is exact and detects singularity") {
    std::mt19937 rng(20260823);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 2 + trial % 4;
        RMat m = rand_mat(rng, n);
        Rat d = mat_det(m);
        if (d == 0) {
            CHECK_THROWS_AS(mat_inverse(m), SingularMatrixError);
            continue;
        }
        CHECK(mat_mul(m, mat_inverse(m)) == RMat::identity(n));
    }
    RMat z(3);
    CHECK_THROWS_AS(mat_inverse(z), SingularMatrixError);
}

TEST_CASE("char_poly matches the linear-factor oracle on a diagonal matrix") {
    // (t-4)(t-1/2)(t-1/2), expanded by the naive polynomial product.
    RMat h(3);
    h.at(0, 0) = 4;
    h.at(1, 1) = Rat(1, 2);
    h.at(2, 2) = Rat(1, 2);
    auto expect = poly_mul(poly_mul({Rat(-4), Rat(1)}, {Rat(-1, 2), Rat(1)}),
                           {Rat(-1, 2), Rat(1)});
    CHECK(char_poly(h) == expect);
}

TEST_CASE("Cayley-Hamilton holds exactly on random matrices, d = 2..5") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 2 + trial % 4;
        RMat m = rand_mat(rng, n);
        auto p = char_poly(m);
        RMat acc(n);  // p(m)
        RMat pw = RMat::identity(n);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (std::size_t i = 0; i < n * n; ++i) acc.a[i] += p[k] * pw.a[i];
            if (k + 1 < p.size()) pw = mat_mul(pw, m);
        }
        CHECK(acc == RMat(n));
    }
}

TEST_CASE("mat_pow handles negative exponents") {
    RMat h(2);
    h.at(0, 0) = 2;
    h.at(1, 1) = Rat(1, 2);
    RMat r = mat_pow(h, -3);
    CHECK(r.at(0, 0) == Rat(1, 8));
    CHECK(r.at(1, 1) == Rat(8));
    CHECK(mat_pow(h, 0) == RMat::identity(2));
}

TEST_CASE("projective equality ignores scaling, including negative") {
    RMat a = RMat::identity(3);
    RMat b = RMat::identity(3);
    for (auto& x : b.a) x *= Rat(-7, 3);
    CHECK(projectively_equal(a, b));
    b.at(0, 1) = 1;
    CHECK_FALSE(projectively_equal(a, b));
}

TEST_CASE("kernel_of_rows solves homogeneous systems exactly") {
    std::vector<Vec> rows = {{Rat(1), Rat(1), Rat(1)}, {Rat(0), Rat(1), Rat(2)}};
    auto ker = kernel_of_rows(rows, 3);
    REQUIRE(ker.size() == 1);
    for (const auto& row : rows) CHECK(dot(row, ker[0]) == 0);
    CHECK(rank_of_rows(rows) == 2);
}
