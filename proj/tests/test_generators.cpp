#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "qbsdej/errors.hpp"
#include "qbsdej/generator.hpp"
#include "qbsdej/numerics.hpp"

using namespace qbsdej;

namespace {
const MarkSpace kMarks({1.0}, std::vector<double>{0.3});
const MarkSpace kMixed({0.5, -2.0}, std::vector<double>{0.3, 0.2});

double inner(const MarkSpace& ms, double t, std::span<const double> v,
             std::span<const double> u) {
    return ms.inner(t, v, u);
}
}  // namespace

TEST_CASE("entropic driver values and subgradient") {
    GeneratorSpec g = entropic_generator(2.0, kMarks);
    std::vector<double> u0 = {0.0};
    CHECK(g(0.0, 0.0, 2.0, u0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g(0.0, 5.0, 2.0, u0) == g(0.0, -3.0, 2.0, u0));  // y-free
    CHECK_FALSE(g.depends_on_y);
    CHECK(g.convex_in_zu);
    CHECK(g.profile.gamma == doctest::Approx(0.5).epsilon(1e-15));

    // subgradient: mu = z / theta, v_j = expm1(u_j / theta)
    std::vector<double> u = {0.8}, v(1);
    const double mu = g.subgradient(0.3, 1.1, u, v);
    CHECK(mu == doctest::Approx(0.55).epsilon(1e-14));
    CHECK(v[0] == doctest::Approx(std::expm1(0.4)).epsilon(1e-14));

    // Fenchel-Young is an equality at the subgradient
    const double lhs = g(0.3, 0.0, 1.1, u) + legendre_transform(g, 0.3, mu, v);
    CHECK(lhs == doctest::Approx(mu * 1.1 + inner(kMarks, 0.3, v, u)).epsilon(1e-12));

    CHECK_THROWS_AS(entropic_generator(0.0, kMarks), std::invalid_argument);
    CHECK_THROWS_AS(entropic_generator(-1.0, kMarks), std::invalid_argument);
}

TEST_CASE("linear driver values and rejection of deep jump slopes") {
    GeneratorSpec g = linear_generator(0.5, 1.0, kMarks);
    std::vector<double> u0 = {0.0};
    CHECK(g(0.0, 0.0, 2.0, u0) == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> u1 = {1.0};
    CHECK(g(0.0, 0.0, 0.0, u1) == doctest::Approx(0.3).epsilon(1e-14));  // b w chi u

    // chi = 1 /\ |x| caps the large mark
    GeneratorSpec gm = linear_generator(0.0, 1.0, kMixed);
    std::vector<double> u2 = {1.0, 1.0};
    CHECK(gm(0.0, 0.0, 0.0, u2) == doctest::Approx(0.3 * 0.5 + 0.2 * 1.0).epsilon(1e-14));

    CHECK(g.profile.royer.has_value());
    CHECK(g.profile.royer->c1 == 0.0);
    CHECK(g.profile.royer->c2 == 1.0);
    CHECK_THROWS_AS(linear_generator(0.0, -1.0, kMarks), std::invalid_argument);
    CHECK_THROWS_AS(linear_generator(0.0, -1.5, kMarks), std::invalid_argument);
}

TEST_CASE("royer driver values, homogeneity and subgradient") {
    GeneratorSpec g = royer_generator(1.0, -0.5, kMarks);
    std::vector<double> u0 = {0.0};
    CHECK(g(0.0, 0.0, -3.0, u0) == doctest::Approx(3.0).epsilon(1e-14));
    std::vector<double> up = {2.0};
    CHECK(g(0.0, 0.0, 0.0, up) == doctest::Approx(0.3 * 2.0).epsilon(1e-14));
    std::vector<double> dn = {-2.0};
    CHECK(g(0.0, 0.0, 0.0, dn) == doctest::Approx(0.5 * 0.3 * 2.0).epsilon(1e-14));
    CHECK(g.positively_homogeneous);

    // positive homogeneity
    std::vector<double> u = {1.3}, u3 = {3.9};
    CHECK(g(0.0, 0.0, -1.5, u) * 3.0 ==
          doctest::Approx(g(0.0, 0.0, -4.5, u3)).epsilon(1e-13));

    // Euler identity at the subgradient
    std::vector<double> v(1);
    const double mu = g.subgradient(0.0, -1.5, u, v);
    CHECK(g(0.0, 0.0, -1.5, u) ==
          doctest::Approx(mu * -1.5 + inner(kMarks, 0.0, v, u)).epsilon(1e-13));

    CHECK_THROWS_AS(royer_generator(0.0, 0.0, kMarks), std::invalid_argument);
    CHECK_THROWS_AS(royer_generator(1.0, -1.0, kMarks), std::invalid_argument);
    CHECK_THROWS_AS(royer_generator(1.0, 0.5, kMarks), std::invalid_argument);
}

TEST_CASE("closed-form conjugates") {
    // entropic: G = theta mu^2 / 2 + theta sum w ((1+v) ln(1+v) - v)
    GeneratorSpec ge = entropic_generator(2.0, kMarks);
    std::vector<double> v0 = {0.0};
    CHECK(legendre_transform(ge, 0.0, 1.0, v0) == doctest::Approx(1.0).epsilon(1e-13));
    std::vector<double> v1 = {1.0};
    CHECK(legendre_transform(ge, 0.0, 0.0, v1) ==
          doctest::Approx(2.0 * 0.3 * 0.3862943611198906).epsilon(1e-12));
    // below the barrier the conjugate is infinite
    std::vector<double> vbad = {-1.5};
    CHECK(std::isinf(legendre_transform(ge, 0.0, 0.0, vbad)));
    // at the barrier v = -1 it closes with (1+v)ln(1+v) -> 0
    std::vector<double> vedge = {-1.0};
    CHECK(legendre_transform(ge, 0.0, 0.0, vedge) ==
          doctest::Approx(2.0 * 0.3 * 1.0).epsilon(1e-12));

    // linear: indicator of the single dual point (a, b chi)
    GeneratorSpec gl = linear_generator(0.7, 0.4, kMarks);
    std::vector<double> vmatch = {0.4};
    CHECK(legendre_transform(gl, 0.0, 0.7, vmatch) == doctest::Approx(0.0));
    std::vector<double> voff = {0.4};
    CHECK(std::isinf(legendre_transform(gl, 0.0, 0.8, voff)));

    // royer: indicator of the box |mu| <= eta, c1 chi <= v <= eta chi
    GeneratorSpec gr = royer_generator(1.2, -0.5, kMarks);
    std::vector<double> vin = {0.3};
    CHECK(legendre_transform(gr, 0.0, 1.0, vin) == doctest::Approx(0.0));
    std::vector<double> vlow = {-0.7};
    CHECK(std::isinf(legendre_transform(gr, 0.0, 0.0, vlow)));
    CHECK(std::isinf(legendre_transform(gr, 0.0, 1.3, vin)));
}

TEST_CASE("Fenchel-Young inequality on random samples") {
    GeneratorSpec g = entropic_generator(1.3, kMixed);
    SeededRng rng(404);
    for (int i = 0; i < 1000; ++i) {
        const double z = rng.uniform(-3.0, 3.0);
        std::vector<double> u = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double mu = rng.uniform(-2.0, 2.0);
        std::vector<double> v = {rng.uniform(-0.95, 3.0), rng.uniform(-0.95, 3.0)};
        const double G = legendre_transform(g, 0.4, mu, v);
        const double pairing = mu * z + inner(kMixed, 0.4, v, u);
        CHECK(g(0.4, 0.0, z, u) + G >= pairing - 1e-9);
    }
}

TEST_CASE("numeric conjugate agrees with the entropic closed form") {
    GeneratorSpec g = entropic_generator(1.0, kMarks);
    GeneratorSpec masked = g;
    masked.builtin = GeneratorSpec::Builtin::none;  // force the ascent path
    masked.subgradient = nullptr;

    for (double mu : {-0.5, 0.0, 0.8}) {
        for (double vj : {-0.4, 0.0, 0.5}) {
            std::vector<double> v = {vj};
            const double exact = legendre_transform(g, 0.0, mu, v);
            const double numeric = legendre_transform(masked, 0.0, mu, v);
            CHECK(numeric == doctest::Approx(exact).epsilon(1e-5));
        }
    }

    // unbounded direction detected: conjugate of a linear driver off its point
    GeneratorSpec lin = linear_generator(0.2, 0.0, kMarks);
    lin.builtin = GeneratorSpec::Builtin::none;
    std::vector<double> v0 = {0.0};
    CHECK(std::isinf(legendre_transform(lin, 0.0, 1.0, v0)));
}

TEST_CASE("assumption validation") {
    GeneratorSpec g = entropic_generator(0.8, kMixed);
    ValidationReport rep = validate_assumptions(g, g.profile, 400, 11);
    CHECK(rep.growth.checked);
    CHECK(rep.convexity.checked);
    CHECK(rep.all_passed());

    GeneratorSpec lin = linear_generator(0.5, 0.3, kMixed);
    ValidationReport rl = validate_assumptions(lin, lin.profile, 400, 12);
    CHECK(rl.royer.checked);
    CHECK(rl.all_passed());

    GeneratorSpec roy = royer_generator(0.9, -0.4, kMixed);
    ValidationReport rr = validate_assumptions(roy, roy.profile, 400, 13);
    CHECK(rr.all_passed());

    // cubic growth cannot satisfy a quadratic certificate
    GeneratorSpec cubic;
    cubic.name = "cubic";
    cubic.marks = kMarks;
    cubic.evaluate = [](double, double, double z, std::span<const double>) {
        return std::fabs(z * z * z);
    };
    cubic.profile.gamma = 0.5;
    ValidationReport rc = validate_assumptions(cubic, cubic.profile, 400, 14);
    CHECK_FALSE(rc.growth.passed);
    CHECK(rc.growth.max_violation > 0.0);

    // a false Lipschitz-in-y declaration is caught
    GeneratorSpec ydep;
    ydep.name = "ydep";
    ydep.marks = kMarks;
    ydep.depends_on_y = true;
    ydep.evaluate = [](double, double y, double, std::span<const double>) { return 3.0 * y; };
    AssumptionProfile p;
    p.lipschitz_y = 1.0;  // true constant is 3
    p.m = 0.0;
    p.beta = 3.0;
    p.gamma = 1.0;
    ValidationReport ry = validate_assumptions(ydep, p, 400, 15);
    CHECK(ry.lipschitz_y.checked);
    CHECK_FALSE(ry.lipschitz_y.passed);
}
