#include "polykin/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polykin {

namespace {

void check_cfl(const GridSpec& g, double dt, bool with_x1) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    double bound = with_x1 ? std::min(g.dx1(), g.dx2()) : g.dx2();
    if (dt > bound * (1.0 + 1e-12))
        throw std::invalid_argument("time step exceeds the transport bound min(dx1, dx2)");
}

// Cloud-in-cell split of `amount` placed at x1 over the two nearest cells.
// Calls put(i, part) for each share; mass leaving a non-periodic range goes to *lost.
template <class Put>
void deposit_x1(const GridSpec& g, double x1, double amount, double* lost, Put put) {
    const double c = (x1 - g.x1_min) / g.dx1() - 0.5;
    const double fl = std::floor(c);
    const double w = c - fl;
    const long i0 = static_cast<long>(fl);
    const long n = g.n_x1;
    auto place = [&](long i, double part) {
        if (part == 0.0) return;
        if (g.periodic_x1) {
            i %= n;
            if (i < 0) i += n;
            put(static_cast<int>(i), part);
        } else if (i < 0 || i >= n) {
            *lost += part;
        } else {
            put(static_cast<int>(i), part);
        }
    };
    place(i0, amount * (1.0 - w));
    place(i0 + 1, amount * w);
}

bool into_wall(const GridSpec& g, int k) { return g.theta(k) <= 1e-14; }

// Where outflow at angle node k ends up: +1 right-moving, -1 left-moving, 0 split.
int wall_side(const GridSpec& g, int k) {
    if (g.quarter_node() && k == g.k_minus_half_pi()) return 0;
    return g.theta(k) > -kPi / 2 ? 1 : -1;
}

void check_nonnegative(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(what);
}

double periodic_gap(double a, double b, double period) { return std::remainder(a - b, period); }

}  // namespace

double ReducedState::total() const {
    return integrate_field(rho1) + trapped_plus + trapped_minus + escaped;
}

double OutflowRecords::total() const {
    double s = escaped;
    for (double m : wall) s += m;
    return s;
}

void sweep_wall_row(PhaseField& f, OutflowRecords& out) {
    const GridSpec& g = f.grid;
    const double vol = g.cell_volume();
    for (int i1 = 0; i1 < g.n_x1; ++i1)
        for (int k = 0; k < g.n_theta; ++k) {
            if (!into_wall(g, k)) continue;
            double& v = f.at(i1, 0, k);
            out.at(i1, k) += v * vol;
            v = 0.0;
        }
}

PhaseField transport_substep(const PhaseField& f, double dt, OutflowRecords& out) {
    const GridSpec& g = f.grid;
    check_cfl(g, dt, true);
    if (out.n_x1 != g.n_x1 || out.n_theta != g.n_theta)
        throw std::invalid_argument("outflow records do not match the grid");
    PhaseField next(g);
    const double vol = g.cell_volume();
    const double dx2 = g.dx2();
    const double top = g.x2_max;
    for (int k = 0; k < g.n_theta; ++k) {
        const double c = std::cos(g.theta(k)), s = std::sin(g.theta(k));
        for (int i1 = 0; i1 < g.n_x1; ++i1)
            for (int j = 0; j < g.n_x2; ++j) {
                const double v = f.at(i1, j, k);
                if (v == 0.0) continue;
                const double x1 = g.x1(i1), x2 = g.x2(j);
                const double x2t = x2 + dt * s;
                if (x2t < 0.0) {
                    // hits the wall after time x2 / |sin|
                    const double hit = x2 / -s;
                    deposit_x1(g, x1 + hit * c, v * vol, &out.escaped,
                               [&](int i, double m) { out.at(i, k) += m; });
                    continue;
                }
                if (x2t > top * (1.0 + 1e-14)) {
                    out.escaped += v * vol;
                    continue;
                }
                double q = x2t / dx2;
                int j0 = std::min(static_cast<int>(std::floor(q)), g.n_x2 - 2);
                double w = std::clamp(q - j0, 0.0, 1.0);
                double lost = 0.0;
                deposit_x1(g, x1 + dt * c, v, &lost, [&](int i, double part) {
                    next.at(i, j0, k) += part * (1.0 - w);
                    next.at(i, j0 + 1, k) += part * w;
                });
                out.escaped += lost * vol;
            }
    }
    return next;
}

BoundaryDensityPair absorb_boundary(const OutflowRecords& out, const BoundaryDensityPair& b,
                                    const GridSpec& g) {
    if (static_cast<int>(b.rho_plus.size()) != g.n_x1 || out.n_x1 != g.n_x1)
        throw std::invalid_argument("absorb_boundary: size mismatch");
    BoundaryDensityPair r = b;
    const double inv = 1.0 / g.dx1();
    for (int i1 = 0; i1 < g.n_x1; ++i1)
        for (int k = 0; k < g.n_theta; ++k) {
            const double m = out.at(i1, k);
            if (m == 0.0) continue;
            switch (wall_side(g, k)) {
                case 1: r.rho_plus[i1] += m * inv; break;
                case -1: r.rho_minus[i1] += m * inv; break;
                default:
                    r.rho_plus[i1] += 0.5 * m * inv;
                    r.rho_minus[i1] += 0.5 * m * inv;
            }
        }
    return r;
}

void implicit_periodic_diffusion(double* u, int n, double r, std::vector<double>& work) {
    // (1 + 2r) u_k - r u_{k-1} - r u_{k+1} = old u_k, cyclic. Sherman-Morrison on top of
    // a Thomas solve; every pivot stays >= 1 + r so nothing can break down.
    if (r == 0.0) return;
    work.assign(4 * static_cast<std::size_t>(n), 0.0);
    double* cp = work.data();
    double* x = cp + n;
    double* z = x + n;
    double* e = z + n;
    const double a = -r, b = 1.0 + 2.0 * r, gam = -b;
    auto thomas = [&](const double* rhs, double* sol) {
        double diag = b - gam;
        cp[0] = a / diag;
        sol[0] = rhs[0] / diag;
        for (int i = 1; i < n; ++i) {
            diag = (i == n - 1 ? b - a * a / gam : b) - a * cp[i - 1];
            cp[i] = a / diag;
            sol[i] = (rhs[i] - a * sol[i - 1]) / diag;
        }
        for (int i = n - 2; i >= 0; --i) sol[i] -= cp[i] * sol[i + 1];
    };
    thomas(u, x);
    e[0] = gam;
    e[n - 1] = a;
    thomas(e, z);
    const double fact = (x[0] + a * x[n - 1] / gam) / (1.0 + z[0] + a * z[n - 1] / gam);
    for (int i = 0; i < n; ++i) u[i] = std::max(0.0, x[i] - fact * z[i]);
}

PhaseField theta_diffusion_substep(const PhaseField& f, double dt, double D) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    const GridSpec& g = f.grid;
    PhaseField next = f;
    const double r = D * dt / (g.dtheta() * g.dtheta());
    std::vector<double> work;
    for (int i1 = 0; i1 < g.n_x1; ++i1)
        for (int j = 0; j < g.n_x2; ++j)
            implicit_periodic_diffusion(&next.at(i1, j, 0), g.n_theta, r, work);
    return next;
}

BoundaryDensityPair transport_rho_pm(const BoundaryDensityPair& b, const GridSpec& g, double dt,
                                     double* escaped) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    BoundaryDensityPair r(g);
    double lost = 0.0;
    for (int i = 0; i < g.n_x1; ++i) {
        if (b.rho_plus[i] != 0.0)
            deposit_x1(g, g.x1(i) + dt, b.rho_plus[i], &lost, [&](int t, double m) { r.rho_plus[t] += m; });
        if (b.rho_minus[i] != 0.0)
            deposit_x1(g, g.x1(i) - dt, b.rho_minus[i], &lost, [&](int t, double m) { r.rho_minus[t] += m; });
    }
    if (escaped) *escaped += lost * g.dx1();
    return r;
}

KineticState advance(const KineticState& s, double dt) {
    const GridSpec& g = s.f.grid;
    check_cfl(g, dt, true);
    OutflowRecords out(g);
    KineticState n;
    n.f = transport_substep(s.f, dt, out);
    sweep_wall_row(n.f, out);
    n.f = theta_diffusion_substep(n.f, dt, g.D);
    sweep_wall_row(n.f, out);
    n.boundary = absorb_boundary(out, s.boundary, g);
    n.escaped = s.escaped + out.escaped;
    n.boundary = transport_rho_pm(n.boundary, g, dt, &n.escaped);
    n.time = s.time + dt;
    n.ledger = make_ledger(n.f, n.boundary, n.escaped);
    return n;
}

ReducedState advance_reduced(const ReducedState& s, double dt) {
    const GridSpec& g = s.rho1.grid;
    check_cfl(g, dt, false);
    ReducedState n = s;
    n.rho1 = ReducedField(g);
    const double vol = g.reduced_cell_volume();
    const double dx2 = g.dx2();
    auto trap = [&](int k, double m) {
        switch (wall_side(g, k)) {
            case 1: n.trapped_plus += m; break;
            case -1: n.trapped_minus += m; break;
            default:
                n.trapped_plus += 0.5 * m;
                n.trapped_minus += 0.5 * m;
        }
    };
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) {
            const double v = s.rho1.at(j, k);
            if (v == 0.0) continue;
            const double x2t = g.x2(j) + dt * std::sin(g.theta(k));
            if (x2t < 0.0) {
                trap(k, v * vol);
            } else if (x2t > g.x2_max * (1.0 + 1e-14)) {
                n.escaped += v * vol;
            } else {
                double q = x2t / dx2;
                int j0 = std::min(static_cast<int>(std::floor(q)), g.n_x2 - 2);
                double w = std::clamp(q - j0, 0.0, 1.0);
                n.rho1.at(j0, k) += v * (1.0 - w);
                n.rho1.at(j0 + 1, k) += v * w;
            }
        }
    auto sweep = [&] {
        for (int k = 0; k < g.n_theta; ++k)
            if (into_wall(g, k)) {
                trap(k, n.rho1.at(0, k) * vol);
                n.rho1.at(0, k) = 0.0;
            }
    };
    sweep();
    const double r = g.D * dt / (g.dtheta() * g.dtheta());
    std::vector<double> work;
    for (int j = 0; j < g.n_x2; ++j) implicit_periodic_diffusion(&n.rho1.at(j, 0), g.n_theta, r, work);
    sweep();
    n.time = s.time + dt;
    return n;
}

KineticState init_state(const InitialCondition& ic, const GridSpec& g) {
    g.validate();
    KineticState st;
    st.f = PhaseField(g);
    st.boundary = BoundaryDensityPair(g);
    const double width = g.x1_max - g.x1_min;
    auto x1_gap = [&](double x) {
        return g.periodic_x1 ? periodic_gap(x, ic.center.x1, width) : x - ic.center.x1;
    };

    if (ic.kind == InitialCondition::Kind::Table) {
        if (ic.table.size() != g.phase_size())
            throw std::invalid_argument("initial table size does not match the grid");
        check_nonnegative(ic.table, "initial table must be finite and >= 0");
        st.f.values = ic.table;
        OutflowRecords out(g);
        sweep_wall_row(st.f, out);
        st.boundary = absorb_boundary(out, st.boundary, g);
        if (ic.normalize) {
            double m = integrate_field(st.f) + line_mass(st.boundary.rho_plus, g) +
                       line_mass(st.boundary.rho_minus, g);
            if (!(m > 0.0)) throw std::invalid_argument("initial table has zero mass");
            const double scale = ic.mass / m;
            for (double& v : st.f.values) v *= scale;
            for (double& v : st.boundary.rho_plus) v *= scale;
            for (double& v : st.boundary.rho_minus) v *= scale;
        }
        st.ledger = make_ledger(st.f, st.boundary, 0.0);
        return st;
    }

    double sx1 = ic.sigma_x1, sx2 = ic.sigma_x2, sth = ic.sigma_theta;
    if (ic.kind == InitialCondition::Kind::PointMass) {
        if (sx1 <= 0.0) sx1 = 1.5 * g.dx1();
        if (sx2 <= 0.0) sx2 = 1.5 * g.dx2();
        if (sth <= 0.0) sth = 1.5 * g.dtheta();
    } else if (!(sx1 > 0.0 && sx2 > 0.0 && sth > 0.0)) {
        throw std::invalid_argument("gaussian initial data needs positive widths");
    }
    if (!(ic.center.x2 >= 0.0)) throw std::invalid_argument("initial center must have x2 >= 0");
    const double th0 = wrap_angle(ic.center.theta);

    if (ic.kind == InitialCondition::Kind::PointMass && ic.center.x2 == 0.0) {
        // On the wall a segment can only point along it.
        const bool right = std::abs(th0) < 1e-12;
        const bool left = std::abs(th0 + kPi) < 1e-12;
        if (!right && !left)
            throw std::invalid_argument("a point mass on the wall must have theta 0 or -pi");
        std::vector<double>& rho = right ? st.boundary.rho_plus : st.boundary.rho_minus;
        for (int i = 0; i < g.n_x1; ++i) {
            double d = x1_gap(g.x1(i));
            rho[i] = std::exp(-0.5 * d * d / (sx1 * sx1));
        }
        double m = line_mass(rho, g);
        if (!(m > 0.0)) throw std::invalid_argument("initial point mass falls outside the grid");
        for (double& v : rho) v *= ic.mass / m;
        st.ledger = make_ledger(st.f, st.boundary, 0.0);
        return st;
    }

    std::vector<double> w1(g.n_x1), w2(g.n_x2), wt(g.n_theta);
    for (int i = 0; i < g.n_x1; ++i) {
        double d = x1_gap(g.x1(i));
        w1[i] = std::exp(-0.5 * d * d / (sx1 * sx1));
    }
    for (int j = 0; j < g.n_x2; ++j) {
        double d = g.x2(j) - ic.center.x2;
        w2[j] = std::exp(-0.5 * d * d / (sx2 * sx2));
    }
    for (int k = 0; k < g.n_theta; ++k) {
        double d = periodic_gap(g.theta(k), th0, 2 * kPi);
        wt[k] = std::exp(-0.5 * d * d / (sth * sth));
    }
    for (int i = 0; i < g.n_x1; ++i)
        for (int j = 0; j < g.n_x2; ++j)
            for (int k = 0; k < g.n_theta; ++k)
                st.f.at(i, j, k) = (j == 0 && into_wall(g, k)) ? 0.0 : w1[i] * w2[j] * wt[k];
    double m = integrate_field(st.f);
    if (!(m > 0.0)) throw std::invalid_argument("initial data has no mass on the grid");
    if (ic.normalize || ic.kind == InitialCondition::Kind::PointMass)
        for (double& v : st.f.values) v *= ic.mass / m;
    st.ledger = make_ledger(st.f, st.boundary, 0.0);
    return st;
}

ReducedState reduce(const KineticState& s) {
    ReducedState r;
    r.rho1 = marginal_x1(s.f);
    r.trapped_plus = line_mass(s.boundary.rho_plus, s.f.grid);
    r.trapped_minus = line_mass(s.boundary.rho_minus, s.f.grid);
    r.escaped = s.escaped;
    r.time = s.time;
    return r;
}

ReducedState init_reduced(const InitialCondition& ic, const GridSpec& g) {
    return reduce(init_state(ic, g));
}

double weak_residual(const std::vector<KineticState>& traj, const TestFunction& phi) {
    if (traj.size() < 2) throw std::invalid_argument("weak_residual needs at least two states");
    const GridSpec& g = traj.front().f.grid;
    for (const auto& s : traj)
        if (!same_grid(s.f.grid, g) || s.boundary.rho_plus.size() != static_cast<std::size_t>(g.n_x1))
            throw std::invalid_argument("weak_residual: grid mismatch along the trajectory");
    const double vol = g.cell_volume();
    std::vector<double> cs(g.n_theta), sn(g.n_theta);
    for (int k = 0; k < g.n_theta; ++k) {
        cs[k] = std::cos(g.theta(k));
        sn[k] = std::sin(g.theta(k));
    }
    auto generator = [&](const KineticState& s) {
        const double t = s.time;
        double acc = 0.0;
        for (int i = 0; i < g.n_x1; ++i) {
            const double x1 = g.x1(i);
            for (int j = 0; j < g.n_x2; ++j) {
                const double x2 = g.x2(j);
                for (int k = 0; k < g.n_theta; ++k) {
                    const double v = s.f.at(i, j, k);
                    if (v == 0.0) continue;
                    const double th = g.theta(k);
                    acc += vol * v *
                           (phi.d_t(t, x1, x2, th) + cs[k] * phi.d_x1(t, x1, x2, th) +
                            sn[k] * phi.d_x2(t, x1, x2, th) + phi.d_thth(t, x1, x2, th));
                }
            }
            acc += g.dx1() * s.boundary.rho_plus[i] * (phi.d_t(t, x1, 0.0, 0.0) + phi.d_x1(t, x1, 0.0, 0.0));
            acc += g.dx1() * s.boundary.rho_minus[i] *
                   (phi.d_t(t, x1, 0.0, -kPi) - phi.d_x1(t, x1, 0.0, -kPi));
        }
        return acc;
    };
    auto pairing = [&](const KineticState& s) {
        const double t = s.time;
        double acc = 0.0;
        for (int i = 0; i < g.n_x1; ++i) {
            const double x1 = g.x1(i);
            for (int j = 0; j < g.n_x2; ++j)
                for (int k = 0; k < g.n_theta; ++k) {
                    const double v = s.f.at(i, j, k);
                    if (v != 0.0) acc += vol * v * phi.value(t, x1, g.x2(j), g.theta(k));
                }
            acc += g.dx1() * (s.boundary.rho_plus[i] * phi.value(t, x1, 0.0, 0.0) +
                              s.boundary.rho_minus[i] * phi.value(t, x1, 0.0, -kPi));
        }
        return acc;
    };
    double lhs = 0.0;
    double prev = generator(traj[0]);
    for (std::size_t n = 1; n < traj.size(); ++n) {
        double cur = generator(traj[n]);
        lhs += 0.5 * (traj[n].time - traj[n - 1].time) * (prev + cur);
        prev = cur;
    }
    const double rhs = pairing(traj.back()) - pairing(traj.front());
    return std::abs(lhs - rhs);
}

}  // namespace polykin
