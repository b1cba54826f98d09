#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "finsler/jet.hpp"

using namespace finsler;
using Catch::Approx;

namespace {

double dotp(const std::vector<double>& a, const std::vector<double>& b) {
    double r = 0.0;
    for (size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
    return r;
}

double rel_diff(double a, double b) {
    return std::abs(a - b) / (std::max(std::abs(a), std::abs(b)) + 1e-30);
}

// Richardson-extrapolated central differences, the independent oracle for jets.
// Step 1e-4 for the first two orders; the third difference quotient sits on a
// roundoff floor of eps/h^3, so it gets a wider step.
double central_diff(const std::function<double(double)>& f, double x, int order) {
    const double h = order < 3 ? 1e-4 : 5e-3;
    auto d = [&](double step) {
        switch (order) {
            case 1: return (f(x + step) - f(x - step)) / (2 * step);
            case 2: return (f(x + step) - 2 * f(x) + f(x - step)) / (step * step);
            default:
                return (f(x + 2 * step) - 2 * f(x + step) + 2 * f(x - step) - f(x - 2 * step)) /
                       (2 * step * step * step);
        }
    };
    const double coarse = d(h), fine = d(h / 2);
    return (4.0 * fine - coarse) / 3.0;
}

} // namespace

TEST_CASE("jet multiplication matches hand values", "[jet]") {
    // f(t) = t, g(t) = t at t0 = 1, order 2: product is t^2
    DJet f = DJet::variable(1.0, 2);
    DJet g = DJet::variable(1.0, 2);
    DJet p = f * g;
    CHECK(p.coefficient(0) == Approx(1.0));
    CHECK(p.coefficient(1) == Approx(2.0));
    CHECK(p.coefficient(2) == Approx(2.0));
}

TEST_CASE("jet division of 1 by 1+t gives alternating factorials", "[jet]") {
    DJet one = DJet::constant(1.0, 3);
    DJet d = one / (DJet::variable(0.0, 3) + 1.0);
    CHECK(d.coefficient(0) == Approx(1.0));
    CHECK(d.coefficient(1) == Approx(-1.0));
    CHECK(d.coefficient(2) == Approx(2.0));
    CHECK(d.coefficient(3) == Approx(-6.0));
}

TEST_CASE("adding the zero jet is the identity", "[jet]") {
    DJet a = DJet::variable(2.5, 4);
    a.coefficient(2) = -0.75;
    DJet z(4);
    DJet sum = a + z;
    for (int k = 0; k <= 4; ++k) CHECK(sum.coefficient(k) == a.coefficient(k));
}

TEST_CASE("jet elementary functions", "[jet]") {
    SECTION("exp of t at 0") {
        DJet e = exp(DJet::variable(0.0, 3));
        for (int k = 0; k <= 3; ++k) CHECK(e.coefficient(k) == Approx(1.0));
    }
    SECTION("sqrt of the constant 4") {
        DJet s = sqrt(DJet::constant(4.0, 3));
        CHECK(s.coefficient(0) == Approx(2.0));
        CHECK(s.coefficient(1) == 0.0);
        CHECK(s.coefficient(2) == 0.0);
    }
    SECTION("log of 1+t at 0") {
        DJet l = log(DJet::variable(0.0, 2) + 1.0);
        CHECK(l.coefficient(0) == Approx(0.0));
        CHECK(l.coefficient(1) == Approx(1.0));
        CHECK(l.coefficient(2) == Approx(-1.0));
    }
    SECTION("pow matches exp(r log)") {
        DJet x = DJet::variable(1.7, 4);
        x.coefficient(2) = 0.3;
        DJet direct = pow(x, 0.37);
        DJet viaexp = exp(0.37 * log(x));
        for (int k = 0; k <= 4; ++k)
            CHECK(direct.coefficient(k) == Approx(viaexp.coefficient(k)).margin(1e-12));
    }
    SECTION("domain errors") {
        CHECK_THROWS_AS(log(DJet::constant(-1.0, 2)), DomainError);
        CHECK_THROWS_AS(sqrt(DJet::constant(-4.0, 2)), DomainError);
        CHECK_THROWS_AS(DJet::constant(1.0, 2) / DJet::constant(0.0, 2), SingularJetError);
    }
    SECTION("order mismatch rejected") {
        CHECK_THROWS_AS(DJet::constant(1.0, 2) + DJet::constant(1.0, 3), DomainError);
    }
}

TEST_CASE("polynomial jets are integer-exact", "[jet]") {
    // f(t) = (2 + t)^3 at t0 = 0: derivatives 8, 12, 12, 6, 0
    DJet t = DJet::variable(2.0, 4);
    DJet f = t * t * t;
    CHECK(f.coefficient(0) == 8.0);
    CHECK(f.coefficient(1) == 12.0);
    CHECK(f.coefficient(2) == 12.0);
    CHECK(f.coefficient(3) == 6.0);
    CHECK(f.coefficient(4) == 0.0);
}

TEST_CASE("directional derivatives of a quadratic form", "[jet]") {
    JetField f = [](std::span<const DJet> z) {
        DJet acc = z[0] * z[0];
        for (size_t i = 1; i < z.size(); ++i) acc = acc + z[i] * z[i];
        return acc;
    };
    std::vector<double> y{1.0, -2.0, 0.5};
    std::vector<double> v{0.3, 0.7, -1.1};
    auto d = directional_derivatives(f, y, v, 2);
    CHECK(d[0] == Approx(dotp(y, y)).epsilon(1e-14));
    CHECK(d[1] == Approx(2 * dotp(y, v)).epsilon(1e-14));
    CHECK(d[2] == Approx(2 * dotp(v, v)).epsilon(1e-14));
}

TEST_CASE("zero direction has vanishing higher derivatives", "[jet]") {
    JetField f = [](std::span<const DJet> z) { return exp(z[0]) * z[1]; };
    std::vector<double> p{0.4, 1.2};
    std::vector<double> zero{0.0, 0.0};
    auto d = directional_derivatives(f, p, zero, 3);
    CHECK(d[0] == Approx(std::exp(0.4) * 1.2));
    for (int k = 1; k <= 3; ++k) CHECK(d[static_cast<size_t>(k)] == 0.0);
}

TEST_CASE("jets agree with Richardson central differences", "[jet]") {
    auto cases = std::vector<std::function<double(double)>>{
        [](double t) { return std::exp(t) * std::sqrt(1 + t * t); },
        [](double t) { return std::log(2 + t) / (1 + t * t); },
        [](double t) { return std::pow(1.5 + t, 0.7); },
    };
    auto jets = std::vector<std::function<DJet(DJet)>>{
        [](DJet t) { return exp(t) * sqrt(1.0 + t * t); },
        [](DJet t) { return log(2.0 + t) / (1.0 + t * t); },
        [](DJet t) { return pow(1.5 + t, 0.7); },
    };
    for (size_t c = 0; c < cases.size(); ++c) {
        for (double x : {-0.3, 0.1, 0.8}) {
            DJet j = jets[c](DJet::variable(x, 3));
            for (int order = 1; order <= 3; ++order) {
                const double fd = central_diff(cases[c], x, order);
                CHECK(j.coefficient(order) == Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("chain-rule consistency under composition", "[jet]") {
    // directional derivatives of f(g(t)) equal compose(f-derivs at g, g-jet)
    auto g = [](DJet t) { return 1.0 + t * t / (2.0 + t); };
    auto f = [](DJet u) { return exp(u) / (1.0 + u * u); };
    for (double t0 : {-0.4, 0.2, 1.1}) {
        DJet gj = g(DJet::variable(t0, 3));
        DJet fj_at_g = f(DJet::variable(gj.value(), 3));
        DJet composed = compose(fj_at_g, gj);
        DJet direct = f(g(DJet::variable(t0, 3)));
        for (int k = 0; k <= 3; ++k)
            CHECK(composed.coefficient(k) == Approx(direct.coefficient(k)).epsilon(1e-12));
    }
}

TEST_CASE("mixed partials by polarization", "[jet]") {
    SECTION("y1 y2 y3 has unit mixed third partial") {
        JetField f = [](std::span<const DJet> z) { return z[0] * z[1] * z[2]; };
        std::vector<double> p{0.3, -0.9, 2.2};
        std::vector<std::vector<double>> dirs{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        CHECK(mixed_partial(f, p, dirs) == Approx(1.0).margin(1e-12));
    }
    SECTION("(y1)^3 has repeated third partial 6") {
        JetField f = [](std::span<const DJet> z) { return z[0] * z[0] * z[0]; };
        std::vector<double> p{0.7};
        std::vector<std::vector<double>> dirs{{1.0}, {1.0}, {1.0}};
        CHECK(mixed_partial(f, p, dirs) == Approx(6.0).margin(1e-12));
    }
    SECTION("symmetric under direction permutation") {
        JetField f = [](std::span<const DJet> z) {
            return exp(z[0] * 0.3) * z[1] * z[1] / (2.0 + z[2]);
        };
        std::vector<double> p{0.4, 1.1, -0.2};
        std::vector<std::vector<double>> d1{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        std::vector<std::vector<double>> d2{{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
        const double a = mixed_partial(f, p, d1);
        const double b = mixed_partial(f, p, d2);
        CHECK(rel_diff(a, b) <= 1e-10);
    }
}
