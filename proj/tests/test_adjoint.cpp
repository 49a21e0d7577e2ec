#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "polykin/adjoint.hpp"

using namespace polykin;

namespace {

GridSpec reduced_grid(int n_x2 = 33, int n_theta = 32, double x2_max = 4.0) {
    GridSpec g;
    g.n_x1 = 4;
    g.x2_max = x2_max;
    g.n_x2 = n_x2;
    g.n_theta = n_theta;
    g.dt = g.dx2();
    return g;
}

// (2/eps^2) int (u(theta + eps nu) - u(theta)) zeta(nu) dnu with zeta rebuilt from the
// bump formula and integrated adaptively.
double q_oracle(const std::function<double(double)>& u, double theta, double eps, const JumpKernel& z) {
    const double w = z.half_width, c = z.center;
    const double mass = oracle::integrate([](double s) { return bump(s); }, -1.0, 1.0, 1e-14);
    auto zeta = [&](double nu) { return (bump((nu - c) / w) + bump((nu + c) / w)) / (2.0 * w * mass); };
    const double u0 = u(theta);
    auto f = [&](double nu) { return (u(theta + eps * nu) - u0) * zeta(nu); };
    double s = oracle::integrate(f, -c - w, -c + w, 1e-14) + oracle::integrate(f, c - w, c + w, 1e-14);
    return 2.0 / (eps * eps) * s;
}

struct RandomSmooth {
    double a[4][3];
    double operator()(double x2, double th) const {
        double s = 0.0;
        for (int m = 0; m < 4; ++m)
            s += (a[m][0] * std::cos(m * th) + a[m][1] * std::sin(m * th)) * std::exp(-a[m][2] * x2);
        return s;
    }
};

RandomSmooth random_smooth(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), r(0.1, 1.5);
    RandomSmooth f;
    for (auto& row : f.a) {
        row[0] = u(rng);
        row[1] = u(rng);
        row[2] = r(rng);
    }
    return f;
}

double sup_on_grid(const GridSpec& g, const std::function<double(double, double)>& f) {
    double m = 0.0;
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) m = std::max(m, std::abs(f(g.x2(j), g.theta(k))));
    return m;
}

}  // namespace

TEST_CASE("jump kernel moments, symmetry, support") {
    JumpKernel z = make_zeta();
    CHECK(std::abs(z.moment(0) - 1.0) < 1e-12);
    CHECK(std::abs(z.moment(1)) < 1e-12);
    CHECK(std::abs(z.moment(2) - 1.0) < 1e-12);
    const std::size_t half = z.nu.size() / 2;
    REQUIRE(z.nu.size() == 2 * half);
    for (std::size_t i = 0; i < half; ++i) {
        CHECK(z.nu[i] == -z.nu[half + i]);
        CHECK(z.weight[i] == z.weight[half + i]);
    }
    for (std::size_t i = 0; i < z.nu.size(); ++i) {
        CHECK(z.weight[i] >= 0.0);
        if (z.weight[i] > 0.0) CHECK(std::abs(z.nu[i]) < 1.3);
    }
    CHECK(z.support() < 1.3);
    CHECK(z.center == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("Q^eps on callables converges to the second derivative at order 2") {
    JumpKernel z = make_zeta();
    auto one = [](double) { return 1.0; };
    CHECK(apply_Qeps(one, 0.3, 0.1, z) == 0.0);
    const double th = 0.7;
    auto sn = [](double t) { return std::sin(t); };
    auto c2 = [](double t) { return std::cos(2 * t); };
    double prev_s = 0.0, prev_c = 0.0;
    for (double eps : {0.1, 0.05, 0.025}) {
        double qs = apply_Qeps(sn, th, eps, z);
        double qc = apply_Qeps(c2, th, eps, z);
        CHECK(std::abs(qs - q_oracle(sn, th, eps, z)) < 1e-9);
        CHECK(std::abs(qc - q_oracle(c2, th, eps, z)) < 1e-9);
        double es = std::abs(qs + std::sin(th)), ec = std::abs(qc + 4 * std::cos(2 * th));
        if (prev_s > 0.0) {
            CHECK(prev_s / es == doctest::Approx(4.0).epsilon(0.05));
            CHECK(prev_c / ec == doctest::Approx(4.0).epsilon(0.05));
        }
        prev_s = es;
        prev_c = ec;
    }
}

TEST_CASE("Q^eps on the grid") {
    JumpKernel z = make_zeta();
    GridSpec g = reduced_grid(5, 512);
    AdjointField f(g, false);
    f.epsilon = 0.05;
    for (double& v : f.values) v = 2.5;
    AdjointField qc = apply_Qeps(f, z);
    for (double v : qc.values) CHECK(v == 0.0);
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) f.at(0, j, k) = std::sin(g.theta(k));
    AdjointField qs = apply_Qeps(f, z);
    double err = 0.0;
    for (int k = 0; k < g.n_theta; ++k)
        err = std::max(err, std::abs(qs.at(0, 2, k) - apply_Qeps([](double t) { return std::sin(t); }, g.theta(k), 0.05, z)));
    CHECK(err < 1e-4);
    CHECK_THROWS_AS(make_q_stencil(z, 3.0, 64), std::invalid_argument);
}

TEST_CASE("chi_kappa") {
    const double kap = 0.1;
    CHECK(chi_kappa(0.0, kap) == 1.0);
    CHECK(chi_kappa(-kPi, kap) == 0.0);
    CHECK(chi_kappa(-kPi / 2, kap) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(chi_kappa(-kPi / 2 + kap + 1e-9, kap) == 1.0);
    CHECK(chi_kappa(-kPi / 2 - kap - 1e-9, kap) == 0.0);
    double prev = -1.0;
    for (int i = 0; i <= 20000; ++i) {
        double v = chi_kappa(-kPi + kPi * i / 20000.0, kap);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK_THROWS_AS(chi_kappa(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("boundary_value_reduced") {
    auto g0 = [](double th) { return 0.3 + 0.5 * std::cos(th) + 0.2 * std::sin(3 * th); };
    for (double t : {0.0, 0.5, 10.0}) {
        CHECK(boundary_value_reduced(t, 0.0, 0.1, g0) == doctest::Approx(g0(0.0)).epsilon(1e-15));
        CHECK(boundary_value_reduced(t, -kPi, 0.1, g0) == doctest::Approx(g0(-kPi)).epsilon(1e-15));
    }
    const double th = -1.2;
    const double chi = chi_kappa(th, 0.1);
    const double limit = chi * g0(0.0) + (1 - chi) * g0(-kPi);
    CHECK(boundary_value_reduced(200.0, th, 0.1, g0) == doctest::Approx(limit).epsilon(1e-15));
    const double transient = boundary_value_reduced(1.0, th, 0.1, g0) - limit;
    CHECK(transient == doctest::Approx(4.539992976e-5 * (g0(th) - limit)).epsilon(1e-9));
    CHECK_THROWS_AS(boundary_value_reduced(1.0, 0.5, 0.1, g0), std::domain_error);
}

TEST_CASE("reduced adjoint: constants, maximum principle, comparison") {
    GridSpec g = reduced_grid();
    AdjointParams p;
    p.epsilon = 0.1;
    p.kappa = 0.1;
    auto c = solve_adjoint_reduced(g, [](double, double) { return 0.37; }, p, {1.0});
    for (double v : c.back().values) CHECK(v == doctest::Approx(0.37).epsilon(1e-13));

    AdjointParams bad = p;
    bad.dt = p.epsilon * p.epsilon / 2;
    CHECK_THROWS_AS(ReducedAdjointSolver(g, bad, std::vector<double>(g.reduced_size(), 0.0)), std::invalid_argument);

    std::mt19937_64 rng(2024);
    int violations = 0;
    double worst_interior_excess = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        RandomSmooth f = random_smooth(rng);
        const double gs = sup_on_grid(g, f);
        ReducedAdjointSolver s(g, p, sample_reduced(g, f));
        double wall_sup = 0.0, interior_sup = 0.0;
        while (s.time() < 5.0 - 1e-12) {
            s.step();
            const AdjointField& a = s.field();
            if (a.sup() > 2 * gs + 1e-8) ++violations;
            for (int j = 0; j < g.n_x2; ++j)
                for (int k = 0; k < g.n_theta; ++k) {
                    double v = std::abs(a.at(0, j, k));
                    if (j == 0 && g.theta(k) <= 0.0) wall_sup = std::max(wall_sup, v);
                    else interior_sup = std::max(interior_sup, v);
                }
        }
        worst_interior_excess = std::max(worst_interior_excess, interior_sup - std::max(gs, wall_sup));
    }
    CHECK(violations == 0);
    MESSAGE("largest interior excess over max(|g|, wall) = " << worst_interior_excess);
    CHECK(worst_interior_excess < 1e-2);

    RandomSmooth f1 = random_smooth(rng);
    auto f2 = [&](double x2, double th) { return f1(x2, th) + 0.2 + 0.1 * std::cos(th) * std::exp(-x2); };
    auto a1 = solve_adjoint_reduced(g, f1, p, {2.0});
    auto a2 = solve_adjoint_reduced(g, f2, p, {2.0});
    double gap = 0.0;
    for (std::size_t i = 0; i < a1[0].values.size(); ++i) gap = std::min(gap, a2[0].values[i] - a1[0].values[i]);
    CHECK(gap >= -1e-6);
}

namespace {

SmoothData smooth_full(double amp, double freq, double L) {
    const double k = 2 * kPi * freq / L;
    SmoothData d;
    d.value = [=](double x1, double x2, double th) {
        return 0.4 + amp * std::sin(k * x1 + 0.3) * std::cos(th) * std::exp(-0.5 * x2) + 0.2 * std::sin(th) * std::exp(-x2);
    };
    d.d_x1 = [=](double x1, double x2, double th) {
        return amp * k * std::cos(k * x1 + 0.3) * std::cos(th) * std::exp(-0.5 * x2);
    };
    return d;
}

// RK4 along the boundary characteristic: an independent solve of
// (d_t - cos d_x1) psi = (chi g(x1 + t, 0, 0) + (1 - chi) g(x1 - t, 0, -pi) - psi) / kappa.
double boundary_rk4(double t, double x1, double th, double kappa, const SmoothData& g) {
    const double c = std::cos(th), chi = chi_kappa(th, kappa);
    const double X = x1 + t * c;  // position at time 0
    auto rhs = [&](double s, double psi) {
        const double xs = X - s * c;
        return (chi * g.value(xs + s, 0.0, 0.0) + (1 - chi) * g.value(xs - s, 0.0, -kPi) - psi) / kappa;
    };
    const int n = 20000;
    const double h = t / n;
    double psi = g.value(X, 0.0, th), s = 0.0;
    for (int i = 0; i < n; ++i) {
        double k1 = rhs(s, psi), k2 = rhs(s + h / 2, psi + h / 2 * k1), k3 = rhs(s + h / 2, psi + h / 2 * k2),
               k4 = rhs(s + h, psi + h * k3);
        psi += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        s += h;
    }
    return psi;
}

}  // namespace

TEST_CASE("boundary_value_full") {
    SmoothData d = smooth_full(0.5, 1.0, 8.0);
    for (double th : {-0.3, -1.2, -kPi / 2, -2.0, -2.9})
        for (double t : {0.05, 0.4, 1.5}) {
            QuadratureReport r = boundary_value_full_report(t, 0.7, th, 0.1, d);
            CHECK(r.panels >= 64);
            CHECK(r.value == doctest::Approx(boundary_rk4(t, 0.7, th, 0.1, d)).epsilon(1e-9));
        }
    // pure transport along the wall directions
    for (double t : {0.0, 0.3, 2.0}) {
        CHECK(boundary_value_full(t, 0.2, 0.0, 0.1, d) == doctest::Approx(d.value(0.2 + t, 0, 0)).epsilon(1e-14));
        CHECK(boundary_value_full(t, 0.2, -kPi, 0.1, d) == doctest::Approx(d.value(0.2 - t, 0, -kPi)).epsilon(1e-14));
    }
    // x1-independent data reduces to the reduced closed form
    SmoothData flat = smooth_full(0.0, 1.0, 8.0);
    flat.value = [](double, double x2, double th) { return std::cos(th) + 0.3 * std::sin(2 * th) + x2; };
    for (double th : {-0.5, -1.5, -2.5})
        CHECK(boundary_value_full(0.7, 1.1, th, 0.1, flat) ==
              doctest::Approx(boundary_value_reduced(0.7, th, 0.1, [&](double a) { return flat.value(0, 0, a); })).epsilon(1e-13));
    // bound on the defect, and its decay as kappa shrinks
    const double gsup = 0.4 + 0.5 + 0.2, dsup = 0.5 * 2 * kPi / 8.0;
    double prev = 1e9;
    for (double kap : {0.1, 0.05, 0.025}) {
        double worst = 0.0;
        for (int i = 0; i < 40; ++i)
            for (double th : {-0.2, -1.0, -kPi / 2, -2.2, -3.0}) {
                const double t = 0.5, x1 = -4.0 + 0.2 * i;
                const double chi = chi_kappa(th, kap);
                double defect = boundary_value_full(t, x1, th, kap, d) - chi * d.value(x1 + t, 0, 0) -
                                (1 - chi) * d.value(x1 - t, 0, -kPi);
                CHECK(std::abs(defect) <= 2 * std::exp(-t / kap) * gsup + 2 * kap * dsup + 1e-12);
                worst = std::max(worst, std::abs(defect));
            }
        CHECK(worst < prev);
        prev = worst;
    }
}

TEST_CASE("full adjoint solver") {
    GridSpec g;
    g.x1_min = -4;
    g.x1_max = 4;
    g.n_x1 = 16;
    g.x2_max = 4;
    g.n_x2 = 17;
    g.n_theta = 16;
    AdjointParams p;
    p.epsilon = 0.2;
    p.kappa = 0.1;
    SmoothData cst{[](double, double, double) { return -0.8; }, [](double, double, double) { return 0.0; }};
    auto c = solve_adjoint_full(g, cst, p, {0.5});
    for (double v : c.back().values) CHECK(v == doctest::Approx(-0.8).epsilon(1e-13));

    // x1-independent data: the full solver reproduces the reduced one
    auto flat = [](double x2, double th) { return std::cos(th) * std::exp(-x2) + 0.3 * std::sin(2 * th); };
    SmoothData fd{[&](double, double x2, double th) { return flat(x2, th); }, [](double, double, double) { return 0.0; }};
    auto full = solve_adjoint_full(g, fd, p, {0.6});
    auto red = solve_adjoint_reduced(g, flat, p, {0.6});
    double diff = 0.0;
    for (int i = 0; i < g.n_x1; ++i)
        for (int j = 0; j < g.n_x2; ++j)
            for (int k = 0; k < g.n_theta; ++k) diff = std::max(diff, std::abs(full[0].at(i, j, k) - red[0].at(0, j, k)));
    CHECK(diff < 1e-12);

    // maximum principle for x1-dependent data, and transport along theta = 0 / -pi at the wall
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    int violations = 0;
    for (int trial = 0; trial < 5; ++trial) {
        SmoothData d = smooth_full(u(rng), 1.0 + trial % 2, 8.0);
        const double gs = 0.4 + 0.8 + 0.2;
        const double ds = 0.8 * 2 * kPi * 2 / 8.0;
        FullAdjointSolver s(g, p, d);
        while (s.time() < 1.0 - 1e-12) {
            s.step();
            if (s.field().sup() > 3 * gs + 2 * p.kappa * ds + 1e-8) ++violations;
        }
        for (int i = 0; i < g.n_x1; ++i) {
            CHECK(s.field().at(i, 0, g.k_zero()) == doctest::Approx(d.value(g.x1(i) + s.time(), 0, 0)).epsilon(1e-12));
            CHECK(s.field().at(i, 0, 0) == doctest::Approx(d.value(g.x1(i) - s.time(), 0, -kPi)).epsilon(1e-12));
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("resolvent") {
    GridSpec g = reduced_grid(64, 64, 6.0);
    AdjointParams p;
    p.epsilon = 0.1;
    p.kappa = 0.1;
    ResolventResult c = resolvent(g, p, std::vector<double>(g.reduced_size(), 1.5), 0.5);
    for (double v : c.u.values) CHECK(v == doctest::Approx(1.5).epsilon(1e-10));

    std::mt19937_64 rng(31);
    RandomSmooth f = random_smooth(rng);
    std::vector<double> init = sample_reduced(g, f);
    ResolventResult r = resolvent(g, p, init, 0.5);
    const double gs = *std::max_element(init.begin(), init.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    MESSAGE("resolvent residual " << r.residual << " horizon " << r.horizon);
    CHECK(r.residual <= 1e-3 * std::abs(gs));
    const double gmin = *std::min_element(init.begin(), init.end());
    const double umin = *std::min_element(r.u.values.begin(), r.u.values.end());
    MESSAGE("min u - min g = " << umin - gmin);
    CHECK(umin >= gmin - 1e-3 * std::abs(gs));
    CHECK_THROWS_AS(resolvent(g, p, init, 0.5, 1e-12, 1.0), std::runtime_error);
}

TEST_CASE("duality with constants is conservation") {
    GridSpec g = reduced_grid(25, 24, 3.0);
    g.dt = 0.5 * g.dx2();
    InitialCondition ic;
    ic.kind = InitialCondition::Kind::Gaussian;
    ic.center = {0.0, 1.2, 0.4};
    ic.sigma_x1 = 10;
    ic.sigma_x2 = 0.3;
    ic.sigma_theta = 0.5;
    ReducedState f = init_reduced(ic, g);
    std::vector<double> times{0.0, 1.0, 3.0};
    std::vector<ReducedState> fw;
    for (double t : times) {
        while (f.time < t - 1e-12) f = advance_reduced(f, std::min(g.dt, t - f.time));
        fw.push_back(f);
    }
    AdjointParams p;
    p.epsilon = 0.2;
    p.kappa = 0.1;
    auto adj = solve_adjoint_reduced(g, [](double, double) { return 1.0; }, p, times);
    CHECK(duality_check(fw, adj) == doctest::Approx(fw.back().escaped).epsilon(1e-9).scale(1e-12));
    GridSpec other = g;
    other.n_theta = 16;
    auto wrong = solve_adjoint_reduced(other, [](double, double) { return 1.0; }, p, times);
    CHECK_THROWS_AS(duality_check(fw, wrong), std::invalid_argument);
}
