#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "polykin/kinetic.hpp"

using namespace polykin;

namespace {

GridSpec small_grid() {
    GridSpec g;
    g.x1_min = -2.0;
    g.x1_max = 2.0;
    g.n_x1 = 16;
    g.x2_max = 3.0;
    g.n_x2 = 13;
    g.n_theta = 16;
    g.dt = 0.125;
    return g;
}

double total_mass(const KineticState& s) {
    return integrate_field(s.f) + line_mass(s.boundary.rho_plus, s.f.grid) +
           line_mass(s.boundary.rho_minus, s.f.grid) + s.escaped;
}

double wall_row_mass(const PhaseField& f) {
    double m = 0.0;
    for (int i = 0; i < f.grid.n_x1; ++i)
        for (int k = 0; k <= f.grid.k_zero(); ++k) m += f.at(i, 0, k);
    return m;
}

}  // namespace

TEST_CASE("init_state examples") {
    GridSpec g = small_grid();
    InitialCondition ic;
    ic.center = {0.3, 1.1, 0.7};
    KineticState s = init_state(ic, g);
    CHECK(std::abs(s.ledger.total - 1.0) < 1e-12);
    CHECK(*std::min_element(s.f.values.begin(), s.f.values.end()) >= 0.0);
    CHECK(wall_row_mass(s.f) == 0.0);

    InitialCondition wall;
    wall.center = {0.0, 0.0, 0.0};
    KineticState w = init_state(wall, g);
    CHECK(integrate_field(w.f) == 0.0);
    CHECK(line_mass(w.boundary.rho_plus, g) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(line_mass(w.boundary.rho_minus, g) == 0.0);
    wall.center.theta = -kPi;
    CHECK(line_mass(init_state(wall, g).boundary.rho_minus, g) == doctest::Approx(1.0).epsilon(1e-12));
    wall.center.theta = 0.4;
    CHECK_THROWS_AS(init_state(wall, g), std::invalid_argument);

    InitialCondition tab;
    tab.kind = InitialCondition::Kind::Table;
    tab.table.assign(g.phase_size(), 1.0);
    tab.table[5] = -1e-3;
    CHECK_THROWS_AS(init_state(tab, g), std::invalid_argument);
    tab.table[5] = 1.0;
    KineticState t = init_state(tab, g);
    CHECK(t.ledger.total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wall_row_mass(t.f) == 0.0);
    CHECK(line_mass(t.boundary.rho_plus, g) > 0.0);
}

TEST_CASE("transport along theta = 0 is a pure x1 shift") {
    GridSpec g = small_grid();
    PhaseField f(g);
    f.at(3, 5, g.k_zero()) = 2.0;
    OutflowRecords out(g);
    PhaseField n = transport_substep(f, g.dx1() * 0.999999999999, out);
    CHECK(out.total() == 0.0);
    CHECK(n.at(4, 5, g.k_zero()) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(integrate_field(n) == doctest::Approx(integrate_field(f)).epsilon(1e-14));
}

TEST_CASE("straight-down column reaches the wall after its height") {
    GridSpec g = small_grid();
    g.dt = g.dx2();
    const int kd = g.k_minus_half_pi();
    const int h = 6;
    PhaseField f(g);
    f.at(2, h, kd) = 1.0;
    OutflowRecords out(g);
    for (int step = 1; step <= h; ++step) {
        f = transport_substep(f, g.dt, out);
        sweep_wall_row(f, out);
        if (step < h) CHECK(out.total() == 0.0);
    }
    CHECK(out.total() == doctest::Approx(g.cell_volume()).epsilon(1e-12));
    CHECK(integrate_field(f) < 1e-15);
}

TEST_CASE("transport error on a Fourier mode is second order") {
    // f = 1 + 0.5 sin(2 pi x1 / L) on the theta = 0 slice, shifted by half a cell.
    auto err = [](int n) {
        GridSpec g = small_grid();
        g.n_x1 = n;
        g.x2_max = 4.0 * g.dx1() * (g.n_x2 - 1);
        const double L = g.x1_max - g.x1_min;
        PhaseField f(g);
        for (int i = 0; i < n; ++i) f.at(i, 4, g.k_zero()) = 1.0 + 0.5 * std::sin(2 * kPi * g.x1(i) / L);
        const double dt = 0.5 * g.dx1();
        OutflowRecords out(g);
        PhaseField m = transport_substep(f, dt, out);
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            double exact = 1.0 + 0.5 * std::sin(2 * kPi * (g.x1(i) - dt) / L);
            e = std::max(e, std::abs(m.at(i, 4, g.k_zero()) - exact));
        }
        return e;
    };
    double e1 = err(32), e2 = err(64);
    CHECK(e1 < 0.01);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("absorb_boundary classification") {
    GridSpec g = small_grid();
    BoundaryDensityPair b(g);
    const int k_quarter = g.n_theta / 8 * 7 - g.n_theta / 2;  // theta = -pi/4
    const int k_three_quarter = g.n_theta / 8;                // theta = -3pi/4
    CHECK(g.theta(k_quarter) == doctest::Approx(-kPi / 4));
    CHECK(g.theta(k_three_quarter) == doctest::Approx(-3 * kPi / 4));

    OutflowRecords out(g);
    out.at(3, k_quarter) = 0.8;
    BoundaryDensityPair r = absorb_boundary(out, b, g);
    CHECK(line_mass(r.rho_plus, g) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(line_mass(r.rho_minus, g) == 0.0);

    OutflowRecords out2(g);
    out2.at(3, k_three_quarter) = 0.8;
    r = absorb_boundary(out2, b, g);
    CHECK(line_mass(r.rho_minus, g) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(line_mass(r.rho_plus, g) == 0.0);

    // mirror pattern theta <-> -pi - theta, including the -pi/2 node itself
    OutflowRecords sym(g);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k <= g.k_zero(); ++k) {
        int mirror = g.k_zero() - k;
        if (mirror < k) break;
        double m = u(rng);
        sym.at(1, k) = m;
        sym.at(1, mirror) = m;
    }
    r = absorb_boundary(sym, b, g);
    CHECK(line_mass(r.rho_plus, g) == doctest::Approx(line_mass(r.rho_minus, g)).epsilon(1e-14));
    CHECK(line_mass(r.rho_plus, g) + line_mass(r.rho_minus, g) == doctest::Approx(sym.total()).epsilon(1e-14));
}

TEST_CASE("theta diffusion") {
    GridSpec g = small_grid();
    const double dt = 0.05, D = 1.3;
    PhaseField c(g);
    for (double& v : c.values) v = 0.7;
    PhaseField cn = theta_diffusion_substep(c, dt, D);
    for (double v : cn.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));

    // cos(m theta) is an eigenvector of the cyclic second difference with
    // eigenvalue -(4 / dtheta^2) sin^2(m dtheta / 2)
    for (int m : {1, 3, 5}) {
        PhaseField f(g);
        for (int k = 0; k < g.n_theta; ++k) f.at(2, 3, k) = std::cos(m * g.theta(k)) + 2.0;
        PhaseField n = theta_diffusion_substep(f, dt, D);
        const double lam = 4.0 / (g.dtheta() * g.dtheta()) * std::pow(std::sin(m * g.dtheta() / 2), 2);
        const double factor = 1.0 / (1.0 + D * lam * dt);
        for (int k = 0; k < g.n_theta; ++k)
            CHECK(n.at(2, 3, k) - 2.0 == doctest::Approx(factor * std::cos(m * g.theta(k))).epsilon(1e-12).scale(1.0));
    }

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PhaseField r(g);
    for (double& v : r.values) v = u(rng) < 0.3 ? 0.0 : u(rng);
    PhaseField rn = theta_diffusion_substep(r, dt, D);
    for (int i = 0; i < g.n_x1; ++i)
        for (int j = 0; j < g.n_x2; ++j) {
            double before = 0.0, after = 0.0;
            for (int k = 0; k < g.n_theta; ++k) {
                before += r.at(i, j, k);
                after += rn.at(i, j, k);
                CHECK(rn.at(i, j, k) >= 0.0);
            }
            CHECK(std::abs(before - after) <= 1e-13 * std::max(1.0, before));
        }
}

TEST_CASE("transport_rho_pm shifts by the elapsed time") {
    GridSpec g = small_grid();
    g.x1_min = -4.125;
    g.x1_max = 4.125;
    g.n_x1 = 33;
    BoundaryDensityPair b(g);
    for (int i = 0; i < g.n_x1; ++i) {
        double x = g.x1(i);
        b.rho_plus[i] = std::exp(-x * x / 0.18);
        b.rho_minus[i] = std::exp(-x * x / 0.18);
    }
    BoundaryDensityPair r = transport_rho_pm(b, g, 1.0);
    auto centroid = [&](const std::vector<double>& rho) {
        double m = 0.0, c = 0.0;
        for (int i = 0; i < g.n_x1; ++i) {
            m += rho[i];
            c += rho[i] * g.x1(i);
        }
        return c / m;
    };
    CHECK(centroid(r.rho_plus) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(centroid(r.rho_minus) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(line_mass(r.rho_plus, g) == doctest::Approx(line_mass(b.rho_plus, g)).epsilon(1e-12));
    int peak = static_cast<int>(std::max_element(r.rho_plus.begin(), r.rho_plus.end()) - r.rho_plus.begin());
    CHECK(g.x1(peak) == doctest::Approx(1.0));

    BoundaryDensityPair z(g);
    BoundaryDensityPair zr = transport_rho_pm(z, g, 0.3);
    for (double v : zr.rho_plus) CHECK(v == 0.0);
}

TEST_CASE("advance: fixed point, conservation, monotone trapping") {
    GridSpec g = small_grid();
    g.x2_max = 8.0;
    g.n_x2 = 33;
    g.dt = 0.2;
    KineticState zero;
    zero.f = PhaseField(g);
    zero.boundary = BoundaryDensityPair(g);
    KineticState zn = advance(zero, g.dt);
    CHECK(zn.ledger.total == 0.0);

    InitialCondition ic;
    ic.center = {0.0, 1.0, 0.5};
    KineticState s = init_state(ic, g);
    double prev_interior = s.ledger.interior;
    double worst_step = 0.0;
    bool monotone = true, positive = true, wall_clean = true;
    for (int n = 0; n < 1000; ++n) {
        double before = total_mass(s);
        s = advance(s, g.dt);
        worst_step = std::max(worst_step, std::abs(total_mass(s) - before));
        if (s.ledger.interior > prev_interior) monotone = false;
        prev_interior = s.ledger.interior;
        for (double v : s.f.values) positive = positive && v >= 0.0;
        for (double v : s.boundary.rho_plus) positive = positive && v >= 0.0;
        wall_clean = wall_clean && wall_row_mass(s.f) == 0.0;
    }
    CHECK(std::abs(s.ledger.total - 1.0) <= 1e-6);
    CHECK(worst_step <= 1e-10);
    CHECK(monotone);
    CHECK(positive);
    CHECK(wall_clean);
    CHECK(s.ledger.total == s.ledger.interior + s.ledger.trapped_plus + s.ledger.trapped_minus + s.ledger.escaped_top);
}

TEST_CASE("reduced solver commutes with the x1 marginal") {
    GridSpec g = small_grid();
    InitialCondition ic;
    ic.kind = InitialCondition::Kind::Gaussian;
    ic.center = {0.2, 0.9, -0.6};
    ic.sigma_x1 = 0.5;
    ic.sigma_x2 = 0.3;
    ic.sigma_theta = 0.5;
    KineticState full = init_state(ic, g);
    ReducedState red = reduce(full);
    for (int n = 0; n < 40; ++n) {
        full = advance(full, g.dt);
        red = advance_reduced(red, g.dt);
    }
    ReducedState proj = reduce(full);
    double diff = 0.0;
    for (std::size_t i = 0; i < red.rho1.values.size(); ++i)
        diff = std::max(diff, std::abs(red.rho1.values[i] - proj.rho1.values[i]));
    CHECK(diff < 1e-12);
    CHECK(red.trapped_plus == doctest::Approx(proj.trapped_plus).epsilon(1e-12));
    CHECK(red.trapped_minus == doctest::Approx(proj.trapped_minus).epsilon(1e-12));
    CHECK(std::abs(red.total() - 1.0) < 1e-12);

    ReducedState zero;
    zero.rho1 = ReducedField(g);
    ReducedState zn = advance_reduced(zero, g.dt);
    CHECK(zn.total() == 0.0);
}

namespace {

TestFunction constant_phi(double c) {
    auto zero = [](double, double, double, double) { return 0.0; };
    return {[c](double, double, double, double) { return c; }, zero, zero, zero, zero};
}

std::vector<KineticState> run(const GridSpec& g, const InitialCondition& ic, double T) {
    std::vector<KineticState> traj{init_state(ic, g)};
    int steps = static_cast<int>(std::lround(T / g.dt));
    for (int n = 0; n < steps; ++n) traj.push_back(advance(traj.back(), g.dt));
    return traj;
}

}  // namespace

TEST_CASE("weak residual: constants and time-only test functions") {
    GridSpec g = small_grid();
    InitialCondition ic;
    ic.center = {0.0, 0.6, -1.0};
    auto traj = run(g, ic, 2.0);
    double drift = std::abs(traj.back().ledger.total - traj.back().escaped - 1.0);
    CHECK(std::abs(weak_residual(traj, constant_phi(1.0)) - drift) < 1e-12);

    // phi = h(t): the defect is the balance identity, exact up to trapezoid error in h'
    auto zero = [](double, double, double, double) { return 0.0; };
    TestFunction h{[](double t, double, double, double) { return t * t; },
                   [](double t, double, double, double) { return 2 * t; }, zero, zero, zero};
    const double mass = traj.back().ledger.total - traj.back().escaped;
    CHECK(weak_residual(traj, h) < 1e-10 + 4.0 * std::abs(mass - 1.0));
    std::vector<KineticState> bad = traj;
    bad[1].f.grid.n_theta += 2;
    CHECK_THROWS_AS(weak_residual(bad, h), std::invalid_argument);
}

TEST_CASE("weak residual of a generic test function converges under refinement") {
    // phi = a(t, x1) + x2 b(t, x1, x2, theta) is theta-independent on the wall
    const double L = 8.0, kx = 2 * kPi / L;
    TestFunction phi;
    phi.value = [=](double t, double x1, double x2, double th) {
        return std::cos(t) * (1 + 0.3 * std::sin(kx * x1)) +
               x2 * std::exp(-x2) * (0.5 * std::cos(th) + 0.2 * std::sin(2 * th)) * (1 + 0.5 * t);
    };
    phi.d_t = [=](double t, double x1, double x2, double th) {
        return -std::sin(t) * (1 + 0.3 * std::sin(kx * x1)) +
               x2 * std::exp(-x2) * (0.5 * std::cos(th) + 0.2 * std::sin(2 * th)) * 0.5;
    };
    phi.d_x1 = [=](double t, double x1, double, double) {
        return std::cos(t) * 0.3 * kx * std::cos(kx * x1);
    };
    phi.d_x2 = [=](double t, double, double x2, double th) {
        return (1 - x2) * std::exp(-x2) * (0.5 * std::cos(th) + 0.2 * std::sin(2 * th)) * (1 + 0.5 * t);
    };
    phi.d_thth = [=](double t, double, double x2, double th) {
        return x2 * std::exp(-x2) * (-0.5 * std::cos(th) - 0.8 * std::sin(2 * th)) * (1 + 0.5 * t);
    };
    InitialCondition ic;
    ic.kind = InitialCondition::Kind::Gaussian;
    ic.center = {0.0, 1.0, -0.4};
    ic.sigma_x1 = 0.6;
    ic.sigma_x2 = 0.3;
    ic.sigma_theta = 0.6;
    std::vector<double> defects;
    for (int level = 0; level < 3; ++level) {
        const int m = 1 << level;
        GridSpec g;
        g.x1_min = -L / 2;
        g.x1_max = L / 2;
        g.n_x1 = 16 * m;
        g.x2_max = 6.0;
        g.n_x2 = 16 * m + 1;
        g.n_theta = 16 * m;
        g.dt = 0.2 / m;
        defects.push_back(weak_residual(run(g, ic, 1.0), phi));
    }
    MESSAGE("weak defects " << defects[0] << " " << defects[1] << " " << defects[2]);
    double order = std::log2(defects[1] / defects[2]);
    CHECK(defects[2] < defects[1]);
    CHECK(defects[1] < defects[0]);
    CHECK(order >= 0.9);
}
