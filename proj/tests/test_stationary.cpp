#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polykin/stationary.hpp"

using namespace polykin;

namespace {

GridSpec strip(double L = 4.0, int n_theta = 32, double dx2 = 0.125) {
    GridSpec g;
    g.n_x1 = 4;
    g.x2_max = L;
    g.n_x2 = static_cast<int>(std::lround(L / dx2)) + 1;
    g.n_theta = n_theta;
    g.dt = g.dx2();
    return g;
}

StationaryProblem problem(BoundaryKind kind, double L = 4.0) {
    StationaryProblem p;
    p.kind = kind;
    p.grid = strip(L);
    return p;
}

ReducedField constant(const GridSpec& g, double v) {
    ReducedField r(g);
    std::fill(r.values.begin(), r.values.end(), v);
    return r;
}

double sup_gap(const ReducedField& a, const ReducedField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

constexpr double kTol = 1e-7;

}  // namespace

TEST_CASE("wall data per kind") {
    const auto p = problem(BoundaryKind::Plus);
    const GridSpec& g = p.grid;
    const auto w = p.wall_data();
    CHECK(w[0] == 0.0);  // theta = -pi
    CHECK(w[g.k_minus_half_pi()] == 0.5);
    CHECK(w[g.k_minus_half_pi() + 1] == 1.0);
    CHECK(w[g.k_zero()] == 1.0);
    CHECK(w[g.k_zero() + 1] == 0.0);  // theta > 0 is not on the wall arc
    auto m = p;
    m.kind = BoundaryKind::Minus;
    const auto wm = m.wall_data();
    for (int k = 0; k <= g.k_zero(); ++k) CHECK(wm[k] + w[k] == doctest::Approx(1.0));
    CHECK(p.far_value() == 0.5);
    CHECK(problem(BoundaryKind::Zero).far_value() == 0.0);
    CHECK(problem(BoundaryKind::One).far_value() == 1.0);
    CHECK(parse_boundary_kind("minus") == BoundaryKind::Minus);
    CHECK_THROWS_AS(parse_boundary_kind("left"), std::invalid_argument);
}

TEST_CASE("constant data are steady") {
    auto o = problem(BoundaryKind::One);
    o.initial = 1.0;
    const auto one = solve_stationary(o, kTol);
    double dev = 0.0;
    for (double v : one.psi.values) dev = std::max(dev, std::abs(v - 1.0));
    CHECK(dev <= 1e-12);
    o.initial = 0.0;
    dev = 0.0;
    for (double v : solve_stationary(o, kTol).psi.values) dev = std::max(dev, std::abs(v - 1.0));
    CHECK(dev <= 10 * kTol);
    auto z = problem(BoundaryKind::Zero);
    z.initial = 1.0;  // starts away from the answer
    const auto zero = solve_stationary(z, kTol);
    double m = 0.0;
    for (double v : zero.psi.values) m = std::max(m, std::abs(v));
    CHECK(m <= 10 * kTol);
    CHECK_THROWS_AS(solve_stationary(z, 0.0), std::invalid_argument);
}

TEST_CASE("plus problem: bounds, symmetry, residual, uniqueness") {
    auto p = problem(BoundaryKind::Plus);
    const auto a = solve_stationary(p, kTol);
    p.initial = 1.0;
    const auto b = solve_stationary(p, kTol);

    double lo = 1.0, hi = 0.0;
    for (double v : a.psi.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(sup_gap(a.psi, b.psi) <= 2 * kTol);
    CHECK(a.residual <= 10 * kTol);
    CHECK(check_symmetry(a.psi) <= 0.02);
    CHECK(check_symmetry(a.psi) <= 10 * kTol);  // the discrete scheme keeps the mirror exactly
    CHECK(farfield_limit(a.psi) <= 0.02);

    // the minus problem is the mirror image
    auto m = problem(BoundaryKind::Minus);
    const auto c = solve_stationary(m, kTol);
    const GridSpec& g = a.psi.grid;
    double mirror = 0.0;
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k)
            mirror = std::max(mirror, std::abs(c.psi.at(j, k) - a.psi.at(j, mirror_index(g, k))));
    CHECK(mirror <= 10 * kTol);

    // off the wall the value is a genuine average, not the boundary data
    CHECK(a.psi.at(1, g.k_zero()) > 0.5);
    CHECK(a.psi.at(1, 0) < 0.5);
}

TEST_CASE("mirror index lands on pi - theta") {
    const GridSpec g = strip(4.0, 48);
    for (int k = 0; k < g.n_theta; ++k) {
        const int m = mirror_index(g, k);
        CHECK(std::abs(wrap_angle(kPi - g.theta(k)) - g.theta(m)) < 1e-12);
        CHECK(mirror_index(g, m) == k);
    }
}

TEST_CASE("symmetry check controls") {
    const GridSpec g = strip();
    CHECK(check_symmetry(constant(g, 0.5)) == 0.0);
    CHECK(check_symmetry(constant(g, 0.0)) == 1.0);
    CHECK(farfield_limit(constant(g, 0.5)) == 0.0);
}

TEST_CASE("far-field defect shrinks as the strip grows") {
    // reflecting top, so the value at x2 = L is not imposed
    double prev = INFINITY;
    for (double L : {1.0, 2.0, 4.0}) {
        auto p = problem(BoundaryKind::Plus, L);
        p.top = TopClosure::Clamp;
        const double d = farfield_limit(solve_stationary(p, kTol).psi);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev <= 0.02);
}

TEST_CASE("transient converges to the steady field") {
    const auto p = problem(BoundaryKind::Plus);
    const auto steady = solve_stationary(p, kTol);
    ReducedAdjointSolver s(p.grid, p.adjoint_params(), std::vector<double>(p.grid.reduced_size(), 0.0));
    double prev = INFINITY;
    for (double t : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
        s.advance_to(t);
        ReducedField r(p.grid);
        r.values = s.field().values;
        const double d = sup_gap(r, steady.psi);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("supersolution envelope") {
    SupersolutionParams s;
    const auto zero = solve_stationary(problem(BoundaryKind::Zero), kTol).psi;
    CHECK(supersolution_domination(zero, s).max_violation <= 1e-9);

    // negative control: psi = 1 sits above the envelope near x2 = delta
    const GridSpec& g = zero.grid;
    const auto rep = supersolution_domination(constant(g, 1.0), s);
    const double expected = 1.0 + s.lambda + s.lambda * s.lambda / 8.0 - s.eta;
    CHECK(rep.max_violation == doctest::Approx(std::exp(-s.lambda * (g.x2(1) - s.delta)) *
                                                    (1.0 + s.lambda + s.lambda * s.lambda / 8.0) - s.eta)
                                   .epsilon(1e-12));
    CHECK(rep.max_violation == doctest::Approx(expected).epsilon(0.01));
    CHECK(rep.worst_theta == doctest::Approx(-kPi / 2));

    // shrinking lambda and eta squeezes the envelope at x2 = delta to 0
    double prev = INFINITY;
    for (double lam : {0.1, 0.05, 0.02, 0.01}) {
        SupersolutionParams t = s;
        t.lambda = lam;
        t.eta = lam + lam * lam / 8.0;
        double env = INFINITY;
        for (int k = 0; k < g.n_theta; ++k)
            env = std::min(env, 1.0 + t.eta - stationary_supersol_F(0.0, g.theta(k), t));
        CHECK(env >= -1e-14);
        double top = 0.0;
        for (int k = 0; k < g.n_theta; ++k)
            top = std::max(top, 1.0 + t.eta - stationary_supersol_F(0.0, g.theta(k), t));
        CHECK(top < prev);
        prev = top;
        CHECK(supersolution_domination(zero, t).max_violation <= 1e-9);
    }
    CHECK(prev < 0.05);
}

TEST_CASE("trapped mass prediction") {
    const auto plus = solve_stationary(problem(BoundaryKind::Plus), kTol).psi;
    const auto minus = solve_stationary(problem(BoundaryKind::Minus), kTol).psi;
    const GridSpec& g = plus.grid;
    const double sym = check_symmetry(plus);

    ReducedState far;
    far.rho1 = ReducedField(g);
    for (int k = 0; k < g.n_theta; ++k) far.rho1.at(g.n_x2 - 1, k) = 1.0;
    const double mass = far.total();
    auto [p, m] = trapped_mass_prediction(far, plus, minus);
    CHECK(p == doctest::Approx(0.5 * mass).epsilon(0.02));
    CHECK(m == doctest::Approx(0.5 * mass).epsilon(0.02));

    ReducedState wall;
    wall.rho1 = ReducedField(g);
    wall.trapped_plus = 0.7;
    wall.trapped_minus = 0.3;
    std::tie(p, m) = trapped_mass_prediction(wall, plus, minus);
    CHECK(p == doctest::Approx(0.7));
    CHECK(m == doctest::Approx(0.3));

    // a spread-out start still splits all its mass
    ReducedState spread;
    spread.rho1 = ReducedField(g);
    for (int j = 1; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k)
            spread.rho1.at(j, k) = std::exp(-g.x2(j)) * (1.2 + std::sin(g.theta(k)) + 0.5 * std::cos(g.theta(k)));
    std::tie(p, m) = trapped_mass_prediction(spread, plus, minus);
    CHECK(std::abs(p + m - spread.total()) <= 2 * sym * spread.total() + 1e-12);
    CHECK(p > m);  // the cos term leans right, toward the plus arc

    GridSpec other = g;
    other.n_theta = 16;
    ReducedState bad;
    bad.rho1 = ReducedField(other);
    CHECK_THROWS_AS(trapped_mass_prediction(bad, plus, minus), std::invalid_argument);
}
