#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "bandedge/singular_ode.hpp"
#include "bandedge/trigpoly.hpp"

using namespace bandedge;

namespace {

// max |p y' + q y - r| / (1 + |r|) with y' from 5-point stencils, excluding
// the guard band and a small margin next to it and to the interval ends
double residual(const ODEProblem& prob, const ODESolution& sol) {
    const double h = sol.x[1] - sol.x[0];
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < sol.x.size(); ++i) {
        bool skip = false;
        for (int m = -2; m <= 2; ++m) {
            const double x = sol.x[i + m];
            if (prob.x_hat && std::abs(x - *prob.x_hat) < sol.guard + 2.5 * h) skip = true;
            if (std::isnan(sol.y[i + m])) skip = true;
        }
        if (skip) continue;
        const double yp = (-sol.y[i + 2] + 8 * sol.y[i + 1] - 8 * sol.y[i - 1] + sol.y[i - 2]) / (12 * h);
        const double x = sol.x[i];
        const double res = std::abs(prob.p(x) * yp + prob.q(x) * sol.y[i] - prob.r(x)) / (1.0 + std::abs(prob.r(x)));
        worst = std::max(worst, res);
    }
    return worst;
}

SmoothFn fn(std::function<double(double, int)> f) { return SmoothFn{std::move(f)}; }

const SmoothFn one = SmoothFn::constant(1.0);
const SmoothFn zero_fn = SmoothFn::constant(0.0);

SmoothFn cosine() {
    return fn([](double x, int k) {
        switch (k % 4) {
            case 0: return std::cos(x);
            case 1: return -std::sin(x);
            case 2: return -std::cos(x);
            default: return std::sin(x);
        }
    });
}

SmoothFn sine() {
    return fn([](double x, int k) {
        switch (k % 4) {
            case 0: return std::sin(x);
            case 1: return std::cos(x);
            case 2: return -std::sin(x);
            default: return -std::cos(x);
        }
    });
}

SmoothFn poly1(double a0, double a1) {  // a0 + a1 x
    return fn([a0, a1](double x, int k) { return k == 0 ? a0 + a1 * x : (k == 1 ? a1 : 0.0); });
}

double max_abs_err(const ODESolution& sol, const std::function<double(double)>& exact,
                   const std::function<bool(double)>& where, bool relative = true) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.x.size(); ++i) {
        if (!where(sol.x[i]) || std::isnan(sol.y[i])) continue;
        const double ex = exact(sol.x[i]);
        double err = std::abs(sol.y[i] - ex);
        if (relative) err /= std::max(1e-12, std::abs(ex));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("singular_ode");

TEST_CASE("zero_order on trig polynomials and constants") {
    // cos^4 = (3 + 4 cos 2t + cos 4t)/8, quartic zero at pi/2
    TrigPoly4 cos4{3.0 / 8.0, 0.5, 0.0, 1.0 / 8.0, 0.0};
    CHECK(zero_order(SmoothFn::from_trigpoly(cos4), kPi / 2) == 4);
    TrigPoly4 sin2t{0.0, 0.0, 1.0, 0.0, 0.0};
    CHECK(zero_order(SmoothFn::from_trigpoly(sin2t), 0.0) == 1);
    CHECK(zero_order(one, 0.37) == 0);
    CHECK_THROWS_AS(zero_order(SmoothFn::monomial(1.0, 0.0, 7), 0.0), std::domain_error);
}

TEST_CASE("no C1 solution when r vanishes slower than p and q") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 2), SmoothFn::monomial(1, 0, 1), one, -1, 1, 0.0};
    CHECK_THROWS_AS(classify(prob), std::domain_error);
}

// ------ manufactured library spanning cases (i) through (vii) ------

TEST_CASE("(i) regular: p=1, q=0, r=cos on (0,1)") {
    ODEProblem prob{one, zero_fn, cosine(), 0.0, 1.0, std::nullopt};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::Regular);
    CHECK(lab.free_params_left + lab.free_params_right == 1);
    double c = 0.5;
    auto sol = solve(prob, Side::Both, std::array{c}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [&](double x) { return c + std::sin(x); }, [](double) { return true; }) < 1e-9);
}

TEST_CASE("(i) regular with a common zero: p=q=r=x on (-1,1)") {
    auto id = SmoothFn::monomial(1, 0, 1);
    ODEProblem prob{id, id, id, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::Regular);
    CHECK(lab.lp == 1);
    CHECK(lab.lq == 1);
    double ya = 0.2;  // y' + y = 1 effectively: y = 1 + (ya - 1) e^{-(x+1)}
    auto sol = solve(prob, Side::Both, std::array{ya}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [&](double x) { return 1.0 + (ya - 1.0) * std::exp(-(x + 1.0)); },
                      [](double) { return true; }) < 1e-8);
}

TEST_CASE("(ii) p=x, q=1, r=1: unique solution y == 1") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 1), one, one, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::UniqueOrder1);
    CHECK(lab.free_params_left == 0);
    CHECK(lab.free_params_right == 0);
    CHECK(lab.discriminant == doctest::Approx(1.0));
    REQUIRE(lab.boundary_value.has_value());
    CHECK(*lab.boundary_value == doctest::Approx(1.0));
    auto sol = solve(prob, Side::Both, {}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [](double) { return 1.0; }, [](double) { return true; }) < 1e-10);
}

TEST_CASE("(ii) p=x, q=1+x, r=1: unique, closed form (1-e^{-x})/x") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 1), poly1(1, 1), one, -0.9, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::UniqueOrder1);
    auto sol = solve(prob, Side::Both, {}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    auto exact = [](double x) { return std::abs(x) < 1e-7 ? 1.0 - x / 2 : (1.0 - std::exp(-x)) / x; };
    CHECK(max_abs_err(sol, exact, [&](double x) { return std::abs(x) > sol.guard; }) < 1e-8);
}

TEST_CASE("(iii) p=-x, q=1, r=1: two-parameter family 1 + c x") {
    ODEProblem prob{SmoothFn::monomial(-1, 0, 1), one, one, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::TwoParamOrder1);
    CHECK(lab.free_params_left == 1);
    CHECK(lab.free_params_right == 1);
    CHECK(lab.discriminant == doctest::Approx(-1.0));
    // parameters are the boundary values y(-1) and y(1)
    const double yl = 0.3, yr = 1.4;  // => y = 1 + 0.7 x (left), 1 + 0.4 x (right)
    auto sol = solve(prob, Side::Both, std::array{yl, yr}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [&](double x) { return x < 0 ? 1.0 + 0.7 * x : 1.0 + 0.4 * x; },
                      [](double) { return true; }) < 1e-8);
}

TEST_CASE("(iii) trig instance p=-sin, q=cos, r=cos") {
    ODEProblem prob{fn([](double x, int k) { return -sine()(x, k); }), cosine(), cosine(), -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::TwoParamOrder1);
    const double yl = 0.25, yr = 1.0;
    auto sol = solve(prob, Side::Both, std::array{yl, yr}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    // family y = 1 + c sin x per side, matched to the boundary parameters
    const double cl = (yl - 1.0) / std::sin(-1.0), cr = (yr - 1.0) / std::sin(1.0);
    CHECK(max_abs_err(sol, [&](double x) { return 1.0 + (x < 0 ? cl : cr) * std::sin(x); },
                      [](double) { return true; }) < 1e-8);
}

TEST_CASE("(iv) p=x^2, q=1, r=0: zero on the right, c e^{1/x} on the left") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 2), one, zero_fn, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::EvenUniqueRight);
    CHECK(lab.free_params_left == 1);
    CHECK(lab.free_params_right == 0);

    auto right = solve(prob, Side::Right, {}, 801);
    for (std::size_t i = 0; i < right.x.size(); ++i)
        if (right.x[i] > 0 && !std::isnan(right.y[i])) CHECK(std::abs(right.y[i]) < 1e-10);

    const double c = 0.8;
    auto left = solve(prob, Side::Left, std::array{c * std::exp(-1.0)}, 801);
    CHECK(residual(prob, left) < 1e-7);
    CHECK(max_abs_err(left, [&](double x) { return c * std::exp(1.0 / x); }, [](double x) { return x <= -0.1; }) <
          1e-8);

    // a free parameter on the unique side is refused
    CHECK_THROWS_AS(solve(prob, Side::Right, std::array{1.0}, 801), std::domain_error);
}

TEST_CASE("(iv) inhomogeneous p=x^2, q=1, r=x^2") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 2), one, SmoothFn::monomial(1, 0, 2), -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::EvenUniqueRight);
    REQUIRE(lab.boundary_value.has_value());
    CHECK(*lab.boundary_value == doctest::Approx(0.0));
    auto sol = solve(prob, Side::Both, std::array{0.5}, 801);
    CHECK(residual(prob, sol) < 1e-7);
}

TEST_CASE("(v) p=-x^2, q=1, r=0: mirror of (iv)") {
    ODEProblem prob{SmoothFn::monomial(-1, 0, 2), one, zero_fn, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::EvenUniqueLeft);
    CHECK(lab.free_params_left == 0);
    CHECK(lab.free_params_right == 1);
    auto uleft = solve(prob, Side::Left, {}, 801);
    for (std::size_t k = 0; k < uleft.x.size(); ++k)
        if (uleft.x[k] < 0 && !std::isnan(uleft.y[k])) CHECK(std::abs(uleft.y[k]) < 1e-10);

    const double c = 1.3;
    auto sol = solve(prob, Side::Right, std::array{c * std::exp(-1.0)}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [&](double x) { return c * std::exp(-1.0 / x); }, [](double x) { return x >= 0.1; }) <
          1e-8);
}

TEST_CASE("(vi) p=x^3, q=1: unique on both sides") {
    ODEProblem prob{SmoothFn::monomial(1, 0, 3), one, SmoothFn::monomial(1, 0, 3), -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::OddUnique);
    CHECK(lab.free_params_left == 0);
    CHECK(lab.free_params_right == 0);
    auto sol = solve(prob, Side::Both, {}, 801);
    CHECK(residual(prob, sol) < 1e-7);

    ODEProblem hom{SmoothFn::monomial(1, 0, 3), one, zero_fn, -1.0, 1.0, 0.0};
    auto sh = solve(hom, Side::Both, {}, 801);
    for (std::size_t k = 0; k < sh.x.size(); ++k)
        if (!std::isnan(sh.y[k])) CHECK(std::abs(sh.y[k]) < 1e-10);
}

TEST_CASE("(vii) p=-x^3, q=1, r=0: one parameter per side") {
    ODEProblem prob{SmoothFn::monomial(-1, 0, 3), one, zero_fn, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::OddTwoParam);
    CHECK(lab.free_params_left == 1);
    CHECK(lab.free_params_right == 1);
    const double cl = 0.6, cr = -0.9;
    auto sol = solve(prob, Side::Both, std::array{cl * std::exp(-0.5), cr * std::exp(-0.5)}, 801);
    CHECK(residual(prob, sol) < 1e-7);
    CHECK(max_abs_err(sol, [&](double x) { return (x < 0 ? cl : cr) * std::exp(-1.0 / (2 * x * x)); },
                      [](double x) { return std::abs(x) >= 0.3; }) < 1e-8);
}

TEST_CASE("(iv) with vanishing q: p=x^3, q=x, r=x") {
    auto id = SmoothFn::monomial(1, 0, 1);
    ODEProblem prob{SmoothFn::monomial(1, 0, 3), id, id, -1.0, 1.0, 0.0};
    auto lab = classify(prob);
    CHECK(lab.ode_case == ODECase::EvenUniqueRight);
    CHECK(lab.lp == 3);
    CHECK(lab.lq == 1);
    CHECK(lab.discriminant == doctest::Approx(2.0));
    REQUIRE(lab.boundary_value.has_value());
    CHECK(*lab.boundary_value == doctest::Approx(1.0));
    auto sol = solve(prob, Side::Right, {}, 801);
    CHECK(max_abs_err(sol, [](double) { return 1.0; }, [](double x) { return x > 0; }) < 1e-8);
    auto both = solve(prob, Side::Both, std::array{1.0 + 0.4 * std::exp(-1.0)}, 801);
    CHECK(residual(prob, both) < 1e-7);
    // after dividing by q this is the x^2 problem: left family y = 1 + c e^{1/x}
    CHECK(max_abs_err(both, [&](double x) { return x < 0 ? 1.0 + 0.4 * std::exp(1.0 / x) : 1.0; },
                      [](double x) { return std::abs(x) >= 0.3; }) < 1e-8);
}

TEST_CASE("boundary value is attained whenever a continuous solution exists") {
    ODEProblem p1{SmoothFn::monomial(1, 0, 1), one, one, -1.0, 1.0, 0.0};            // (ii), bv = 1
    ODEProblem p2{SmoothFn::monomial(1, 0, 2), one, poly1(2, 1), -1.0, 1.0, 0.0};    // (iv), bv = 2
    ODEProblem p3{SmoothFn::monomial(-1, 0, 1), one, poly1(-3, 0), -1.0, 1.0, 0.0};  // (iii), bv = -3
    for (const auto& prob : {p1, p2, p3}) {
        auto lab = classify(prob);
        REQUIRE(lab.boundary_value.has_value());
        std::vector<double> params;
        for (int k = 0; k < lab.free_params_left + lab.free_params_right; ++k) params.push_back(*lab.boundary_value);
        auto sol = solve(prob, Side::Both, params, 2001);
        // value at x_hat itself (a grid node here) is the r/q limit
        std::size_t i0 = 0;
        for (std::size_t i = 0; i < sol.x.size(); ++i)
            if (std::abs(sol.x[i]) < std::abs(sol.x[i0])) i0 = i;
        CHECK(std::abs(sol.y[i0] - *lab.boundary_value) < 1e-9);
        // and the sampled solution is continuous through the guard band
        const auto taylor = boundary_taylor(prob, *lab.boundary_value);
        for (std::size_t i = 0; i < sol.x.size(); ++i)
            if (std::abs(sol.x[i]) < 3.0 * sol.guard && !std::isnan(sol.y[i]))
                CHECK(std::abs(sol.y[i] - eval_taylor(taylor, sol.x[i])) < 1e-5);
    }
}

TEST_SUITE_END();
