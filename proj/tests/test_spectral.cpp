#include <catch2/catch_amalgamated.hpp>

#include "occultist/spectral.hpp"

using namespace occultist;

namespace {

RMat diag3(const Rat& a, const Rat& b, const Rat& c) {
    RMat m(3);
    m.at(0, 0) = a;
    m.at(1, 1) = b;
    m.at(2, 2) = c;
    return m;
}

}  // namespace

TEST_CASE("rational_roots factors a fully split polynomial with multiplicity") {
    // (t-4)(t-1/2)^2 = t^3 - 5t^2 + 17/4 t - 1
    std::vector<Rat> p = {Rat(-1), Rat(17, 4), Rat(-5), Rat(1)};
    std::size_t rest = 99;
    auto roots = rational_roots(p, rest);
    CHECK(rest == 0);
    REQUIRE(roots.size() == 2);
    bool saw4 = false, sawHalf = false;
    for (auto& [r, mult] : roots) {
        if (r == 4) { saw4 = true; CHECK(mult == 1); }
        if (r == Rat(1, 2)) { sawHalf = true; CHECK(mult == 2); }
    }
    CHECK(saw4);
    CHECK(sawHalf);
}

TEST_CASE("rational_roots reports the irreducible remainder") {
    // (t^2 - 2)(t - 3): only the root 3 is rational.
    std::vector<Rat> p = {Rat(6), Rat(-2), Rat(-3), Rat(1)};
    std::size_t rest = 0;
    auto roots = rational_roots(p, rest);
    CHECK(rest == 2);
    REQUIRE(roots.size() == 1);
    CHECK(roots[0].first == 3);
}

TEST_CASE("diag(4,1/2,1/2) is proximal, its inverse is not") {
    RMat h = diag3(4, Rat(1, 2), Rat(1, 2));
    auto rep = spectral_report(h);
    CHECK(rep.mode == SpectralReport::Mode::Exact);
    CHECK(rep.fully_split);
    CHECK(rep.proximal == Tri::True);
    CHECK(rep.attracting_point == Vec{Rat(1), Rat(0), Rat(0)});
    CHECK(rep.repelling_hyperplane == Vec{Rat(1), Rat(0), Rat(0)});
    CHECK(rep.biproximal == Tri::False);

    auto repinv = spectral_report(diag3(Rat(1, 4), 2, 2));
    CHECK(repinv.fully_split);
    CHECK(repinv.proximal == Tri::False);
}

TEST_CASE("diag(9,1,1/9) is biproximal with the expected flags") {
    RMat h = diag3(9, 1, Rat(1, 9));
    auto rep = spectral_report(h);
    CHECK(rep.proximal == Tri::True);
    CHECK(rep.biproximal == Tri::True);
    CHECK(rep.attracting_point == Vec{Rat(1), Rat(0), Rat(0)});
    // The repelling hyperplane is spanned by the two lower eigendirections,
    // i.e. the covector dual to e1.
    CHECK(rep.repelling_hyperplane == Vec{Rat(1), Rat(0), Rat(0)});
}

TEST_CASE("modulus tie between opposite eigenvalues is not proximal") {
    auto rep = spectral_report(diag3(3, -3, 1));
    CHECK(rep.fully_split);
    CHECK(rep.proximal == Tri::False);
}

TEST_CASE("non-split spectrum falls back to numeric mode") {
    // Rotation by 90 degrees plus a dominant axis: eigenvalues 5, ±i.
    RMat m(3);
    m.at(0, 1) = -1;
    m.at(1, 0) = 1;
    m.at(2, 2) = 5;
    auto rep = spectral_report(m);
    CHECK(rep.mode == SpectralReport::Mode::Numeric);
    CHECK_FALSE(rep.fully_split);
    CHECK(rep.proximal == Tri::True);

    // Pure rotation: top moduli coincide, verdict must stay indeterminate.
    RMat rot(2);
    rot.at(0, 1) = -1;
    rot.at(1, 0) = 1;
    auto rep2 = spectral_report(rot);
    CHECK(rep2.proximal == Tri::Indeterminate);
}

TEST_CASE("singular_log_ratio is nondecreasing under diagonal powers") {
    RMat h = diag3(4, 1, Rat(1, 4));
    double prev = 0.0;
    for (long k = 1; k <= 5; ++k) {
        double cur = singular_log_ratio(mat_pow(h, k));
        CHECK(cur >= prev);
        prev = cur;
    }
    // For diag(4,1,1/4): log(sigma1/sigma2) = log 4.
    CHECK(singular_log_ratio(h) == Catch::Approx(std::log(4.0)).epsilon(1e-9));
    CHECK(singular_log_ratio(RMat::identity(3)) == Catch::Approx(0.0).margin(1e-12));
}
