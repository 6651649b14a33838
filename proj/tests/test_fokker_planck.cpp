#include <doctest.h>

#include <cmath>

#include "bandedge/fokker_planck.hpp"

using namespace bandedge;

namespace {

AnomalyExpansion parabolic_expansion(double eps_x, double m2) {
    AnomalyExpansion e;
    ExpansionTerm t1;
    t1.eta = Rational(1, 3);
    t1.rand_coeff = Mat2{0, 0, 1, 0};
    t1.xi_m2 = m2;
    ExpansionTerm tK;
    tK.eta = Rational(2, 3);
    tK.mean = Mat2{0, 1, eps_x, 0};
    e.terms = {t1, tK};
    return e;
}

// max |p rho' + q~ rho - C| / (1 + |C|) off the guard band, 5-point stencils
double ode_residual(const TrigPoly4& p, const TrigPoly4& q, const Groundstate& g) {
    const TrigPoly4 qt = p.derivative() - q;
    const int n = static_cast<int>(g.grid.size());
    const double h = kPi / n;
    double worst = 0.0;
    auto rho = [&](int i) { return g.rho[((i % n) + n) % n]; };
    for (int i = 0; i < n; ++i) {
        bool skip = false;
        for (int m = -2; m <= 2; ++m) {
            const double t = g.grid[((i + m) % n + n) % n];
            for (const double z : fp_detail::find_zeros(p))
                if (std::abs(std::remainder(t - z, kPi)) < g.guard + 2.5 * h) skip = true;
            // skip the support boundary of split densities as well
            if (g.C == 0.0 && rho(i + m) < 1e-14) skip = true;
        }
        if (skip) continue;
        const double drho = (-rho(i + 2) + 8 * rho(i + 1) - 8 * rho(i - 1) + rho(i - 2)) / (12 * h);
        const double t = g.grid[i];
        worst = std::max(worst, std::abs(p(t) * drho + qt(t) * g.rho[i] - g.C) / (1.0 + std::abs(g.C)));
    }
    return worst;
}

double weak_form_residual(const TrigPoly4& p, const TrigPoly4& q, const Groundstate& g) {
    // for 16 smooth test functions phi: integral of (p phi'' + q phi') rho
    double worst = 0.0;
    for (int k = 1; k <= 8; ++k) {
        for (int which = 0; which < 2; ++which) {
            auto phi1 = [&](double t) { return which ? 2.0 * k * std::cos(2 * k * t) : -2.0 * k * std::sin(2 * k * t); };
            auto phi2 = [&](double t) {
                return which ? -4.0 * k * k * std::sin(2 * k * t) : -4.0 * k * k * std::cos(2 * k * t);
            };
            const double v =
                expectation(g, [&](double t) { return p(t) * phi2(t) + q(t) * phi1(t); });
            worst = std::max(worst, std::abs(v));
        }
    }
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("fokker_planck");

TEST_CASE("drift and diffusion polynomials of the parabolic normal form") {
    const double m2 = 1.0 / 3.0;
    for (double eps_x : {-1.0, 0.0, 0.7}) {
        auto co = fp_coefficients(parabolic_expansion(eps_x, m2));
        CHECK(!co.degenerate);
        // p = m2 cos^4 = m2 (3 + 4 cos 2t + cos 4t)/8
        CHECK(co.p.c0 == doctest::Approx(3.0 * m2 / 8).epsilon(1e-14));
        CHECK(co.p.c2 == doctest::Approx(m2 / 2).epsilon(1e-14));
        CHECK(co.p.s2 == doctest::Approx(0.0));
        CHECK(co.p.c4 == doctest::Approx(m2 / 8).epsilon(1e-14));
        // q = eps_x - 1 + (eps_x + 1) cos 2t - 2 m2 cos^3 sin
        CHECK(co.q.c0 == doctest::Approx(eps_x - 1.0).epsilon(1e-14));
        CHECK(co.q.c2 == doctest::Approx(eps_x + 1.0).epsilon(1e-14));
        CHECK(co.q.s2 == doctest::Approx(-m2 / 2).epsilon(1e-14));
        CHECK(co.q.s4 == doctest::Approx(-m2 / 4).epsilon(1e-14));
        for (double t : {0.3, 1.1, 2.9})
            CHECK(co.q(t) == doctest::Approx(eps_x - 1 + (eps_x + 1) * std::cos(2 * t) -
                                             2 * m2 * std::pow(std::cos(t), 3) * std::sin(t)));
    }
}

TEST_CASE("rotation-generator noise gives the flat coefficients") {
    AnomalyExpansion e;
    ExpansionTerm t1;
    t1.eta = Rational(1);
    t1.rand_coeff = Mat2{0, 1, -1, 0};
    t1.xi_m2 = 1.0;
    e.terms = {t1};
    ensure_K_term(e);
    auto co = fp_coefficients(e);
    CHECK(co.p.c0 == doctest::Approx(1.0));
    CHECK(std::abs(co.p.c2) + std::abs(co.p.s2) + std::abs(co.p.c4) + std::abs(co.p.s4) < 1e-14);
    CHECK(co.q.max_abs_coeff() < 1e-14);
}

TEST_CASE("zero expansion is degenerate, first order is rejected") {
    AnomalyExpansion zero;
    ExpansionTerm t;
    t.eta = Rational(1);
    zero.terms = {t};
    ensure_K_term(zero);
    auto co = fp_coefficients(zero);
    CHECK(co.degenerate);
    CHECK(co.p.max_abs_coeff() < 1e-14);
    CHECK(co.q.max_abs_coeff() < 1e-14);

    AnomalyExpansion first;
    ExpansionTerm drift;
    drift.eta = Rational(1);
    drift.mean = Mat2{0, 1, -1, 0};
    first.terms = {drift};
    ensure_K_term(first);
    CHECK_THROWS_AS(fp_coefficients(first), std::domain_error);
}

TEST_CASE("groundstate classification tags") {
    // regular
    auto reg = classify_groundstate(TrigPoly4{1, 0, 0, 0, 0}, TrigPoly4{});
    CHECK(reg.tag == GroundstateCase::Regular);

    // parabolic normal form: quartic zero at pi/2 with q(pi/2) = -2
    auto co = fp_coefficients(parabolic_expansion(0.0, 1.0 / 3.0));
    auto par = classify_groundstate(co.p, co.q);
    CHECK(par.tag == GroundstateCase::SingleZero);
    REQUIRE(par.zeros.size() == 1);
    CHECK(par.zeros[0].order == 4);
    CHECK(par.zeros[0].theta == doctest::Approx(kPi / 2).epsilon(1e-9));
    CHECK(par.zeros[0].q_tilde == doctest::Approx(2.0));

    // split support: p = sin^2 2t, q = cos 2t
    TrigPoly4 psin{0.5, 0, 0, -0.5, 0};
    TrigPoly4 qcos{0, 1, 0, 0, 0};
    auto split = classify_groundstate(psin, qcos);
    CHECK(split.tag == GroundstateCase::SplitSupport);
    REQUIRE(split.zeros.size() == 2);
    CHECK(split.zeros[0].q_tilde == doctest::Approx(-1.0));
    CHECK(split.zeros[1].q_tilde == doctest::Approx(1.0));

    // same-sign zeros
    TrigPoly4 qshift{2, 1, 0, 0, 0};
    auto same = classify_groundstate(psin, qshift);
    CHECK(same.tag == GroundstateCase::TwoZerosSameSign);

    // not nonnegative
    CHECK_THROWS_AS(classify_groundstate(TrigPoly4{0, 1, 0, 0, 0}, TrigPoly4{}), std::domain_error);
}

TEST_CASE("uniform groundstate for flat diffusion") {
    auto g = groundstate(TrigPoly4{1, 0, 0, 0, 0}, TrigPoly4{}, 512);
    CHECK(g.kind == Groundstate::Kind::Density);
    CHECK(g.C == doctest::Approx(0.0));
    for (double v : g.rho) CHECK(v == doctest::Approx(1.0 / kPi).epsilon(1e-10));
    CHECK(expectation(g, [](double t) { return std::cos(2 * t); }) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("regular groundstate with drift satisfies the reduced ODE") {
    TrigPoly4 p{1.0, 0.5, 0, 0, 0};
    TrigPoly4 q{0.8, 0, 0.3, 0, 0};
    auto g = groundstate(p, q, 4096);
    double mass = 0;
    for (double v : g.rho) {
        CHECK(v >= -1e-12);
        mass += v * kPi / g.rho.size();
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(ode_residual(p, q, g) < 1e-7);
    CHECK(weak_form_residual(p, q, g) < 1e-5);
}

TEST_CASE("parabolic groundstate: boundary value, residual, weak form") {
    auto co = fp_coefficients(parabolic_expansion(0.0, 1.0 / 3.0));
    auto g = groundstate(co.p, co.q, 4096);
    CHECK(g.kind == Groundstate::Kind::Density);
    CHECK(g.case_tag == GroundstateCase::SingleZero);

    double mass = 0;
    for (double v : g.rho) {
        CHECK(v >= -1e-12);
        mass += v * kPi / g.rho.size();
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));

    // rho(pi/2) = C / q~(pi/2) = C / 2
    const std::size_t mid = g.rho.size() / 2;
    CHECK(g.grid[mid] == doctest::Approx(kPi / 2));
    CHECK(g.rho[mid] == doctest::Approx(g.C / 2.0).epsilon(1e-6));

    CHECK(ode_residual(co.p, co.q, g) < 1e-6);
    CHECK(weak_form_residual(co.p, co.q, g) < 1e-5);

    // the same machinery at eps != 0
    for (double eps_x : {-1.0, 1.0}) {
        auto co2 = fp_coefficients(parabolic_expansion(eps_x, 1.0 / 3.0));
        auto g2 = groundstate(co2.p, co2.q, 4096);
        CHECK(ode_residual(co2.p, co2.q, g2) < 1e-6);
        CHECK(weak_form_residual(co2.p, co2.q, g2) < 1e-5);
    }
}

TEST_CASE("split-support groundstate vanishes outside the trapped arc") {
    TrigPoly4 p{0.5, 0, 0, -0.5, 0};  // sin^2 2t, zeros at 0 and pi/2
    TrigPoly4 q{0, 1, 0, 0, 0};       // cos 2t
    auto g = groundstate(p, q, 4096);
    CHECK(g.case_tag == GroundstateCase::SplitSupport);
    CHECK(g.C == 0.0);
    double mass = 0, outside = 0;
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
        CHECK(g.rho[i] >= -1e-12);
        mass += g.rho[i] * kPi / g.rho.size();
        if (g.grid[i] > kPi / 2 + 1e-9) outside = std::max(outside, g.rho[i]);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(outside == 0.0);
    // continuous at the endpoints: the limit from inside vanishes
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
        const double d0 = std::abs(std::remainder(g.grid[i], kPi));
        const double d1 = std::abs(g.grid[i] - kPi / 2);
        if (d0 < 0.008 || d1 < 0.008) CHECK(std::abs(g.rho[i]) < 1e-6);
    }
    CHECK(ode_residual(p, q, g) < 1e-6);
    CHECK(weak_form_residual(p, q, g) < 1e-5);
}

TEST_CASE("two zeros of equal drift sign") {
    TrigPoly4 p{0.5, 0, 0, -0.5, 0};
    TrigPoly4 q{2, 1, 0, 0, 0};  // q~ < 0 at both zeros
    auto g = groundstate(p, q, 4096);
    CHECK(g.case_tag == GroundstateCase::TwoZerosSameSign);
    double mass = 0;
    for (double v : g.rho) {
        CHECK(v >= -1e-12);
        mass += v * kPi / g.rho.size();
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(ode_residual(p, q, g) < 1e-6);
    CHECK(weak_form_residual(p, q, g) < 2e-5);
}

TEST_CASE("hyperbolic second-order normal form yields the stable Dirac peak") {
    auto m = anderson_model(0.0);
    auto edge = edge_data(m.background, m.disorder, 2.0);
    auto second = hyperbolic_to_second_order(build_edge_expansion(edge, Rational(1), +1.0, Rational(1, 2)));
    auto co = fp_coefficients(second);
    auto cls = classify_groundstate(co.p, co.q);
    CHECK(cls.tag == GroundstateCase::Dirac);
    REQUIRE(cls.theta_hat.has_value());
    CHECK(*cls.theta_hat == doctest::Approx(kPi / 2).epsilon(1e-9));
    auto g = groundstate(co.p, co.q);
    CHECK(g.kind == Groundstate::Kind::Dirac);
    CHECK(expectation(g, [](double t) { return std::cos(2 * t); }) == doctest::Approx(-1.0));
}

TEST_CASE("situation (I) has no normalizable groundstate") {
    // p = sin^2 t: order-2 zero at 0; q with q(0) = 0 and dq~(0) = 2 - dq(0) > 0
    TrigPoly4 p{0.5, -0.5, 0, 0, 0};
    TrigPoly4 q{0, 0, 0.5, 0, 0};  // 0.5 sin 2t
    auto cls = classify_groundstate(p, q);
    CHECK(cls.tag == GroundstateCase::SituationI);
    CHECK_THROWS_AS(groundstate(p, q), std::domain_error);
}

TEST_CASE("parabolic theory coefficients") {
    const double m2 = 1.0 / 3.0;
    auto th0 = parabolic_theory(0.0, m2);
    CHECK(th0.B > 0.0);
    CHECK(std::isfinite(th0.A));
    // scaling sanity: doubling m2 keeps the construction consistent
    auto th2 = parabolic_theory(0.0, 2 * m2);
    CHECK(th2.B > th0.B);
    CHECK(ode_residual(th2.p, th2.q, th2.rho) < 1e-6);

    auto thp = parabolic_theory(0.5, m2);
    CHECK(thp.B > 0.0);
    CHECK(std::isfinite(thp.A));

    CHECK_THROWS_AS(parabolic_theory(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("parabolic theory agrees with the assembled perturbative values") {
    const double m2 = 1.0 / 3.0;
    for (double eps_x : {-1.0, 0.0, 1.0}) {
        auto th = parabolic_theory(eps_x, m2);
        auto e = parabolic_expansion(eps_x, m2);
        const Complex i2{expectation(th.rho, [](double t) { return std::cos(2 * t); }),
                         expectation(th.rho, [](double t) { return std::sin(2 * t); })};
        const Complex i4{expectation(th.rho, [](double t) { return std::cos(4 * t); }),
                         expectation(th.rho, [](double t) { return std::sin(4 * t); })};
        const double lambda = 1e-6;
        auto pv = perturbative_values(e, i2, i4, lambda);
        const double l23 = std::pow(lambda, 2.0 / 3.0);
        CHECK(pv.gamma / l23 == doctest::Approx(th.B).epsilon(1e-2));
        CHECK(pv.rotation / l23 == doctest::Approx(-th.A).epsilon(1e-2));
    }
}

TEST_SUITE_END();
