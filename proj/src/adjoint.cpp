#include "polykin/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace polykin {

namespace {

bool wall_arc(const GridSpec& g, int k) { return g.theta(k) <= 1e-14; }

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Periodic cubic Lagrange weights for the four nodes base-1 .. base+2 at offset t in [0, 1).
void cubic_weights(double t, double w[4]) {
    w[0] = -t * (t - 1) * (t - 2) / 6.0;
    w[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    w[2] = -(t + 1) * t * (t - 2) / 2.0;
    w[3] = (t + 1) * t * (t - 1) / 6.0;
}

void check_reduced_match(const GridSpec& a, const GridSpec& b) {
    if (a.n_x2 != b.n_x2 || a.n_theta != b.n_theta || std::abs(a.x2_max - b.x2_max) > 1e-12)
        throw std::invalid_argument("adjoint and forward grids differ");
}

}  // namespace

double AdjointField::sup() const { return sup_abs(values); }

double JumpKernel::moment(int p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) s += weight[i] * std::pow(nu[i], p);
    return s;
}

double bump(double u) { return std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0; }

JumpKernel make_zeta() {
    constexpr int n = 4001;
    JumpKernel z;
    z.half_width = 0.2;
    std::vector<double> u(n), b(n);
    double mass = 0.0, second = 0.0;
    for (int i = 0; i < n; ++i) {
        u[i] = -1.0 + 2.0 * i / (n - 1);
        b[i] = bump(u[i]);
        mass += b[i];
        second += b[i] * u[i] * u[i];
    }
    // Both bumps share the u-grid, so the second moment is c^2 + w^2 <u^2> up to a
    // rounding-level cross term; solve for c and polish once against the actual sums.
    const double hw = z.half_width;
    double c = std::sqrt(1.0 - hw * hw * second / mass);
    for (int iter = 0; iter < 3; ++iter) {
        z.nu.clear();
        z.weight.clear();
        for (int sgn : {-1, 1})
            for (int i = 0; i < n; ++i) {
                if (b[i] == 0.0) continue;
                z.nu.push_back(sgn * (c + hw * u[i]));
                z.weight.push_back(0.5 * b[i] / mass);
            }
        double m2 = z.moment(2);
        if (std::abs(m2 - 1.0) < 1e-15) break;
        c += (1.0 - m2) / (2.0 * c);
    }
    z.center = c;
    if (std::abs(z.moment(0) - 1.0) > 1e-12 || std::abs(z.moment(1)) > 1e-12 ||
        std::abs(z.moment(2) - 1.0) > 1e-12)
        throw std::logic_error("make_zeta: moment tuning failed");
    return z;
}

double apply_Qeps(const std::function<double(double)>& u, double theta, double epsilon,
                  const JumpKernel& kernel) {
    const double u0 = u(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < kernel.nu.size(); ++i)
        s += kernel.weight[i] * (u(theta + epsilon * kernel.nu[i]) - u0);
    return 2.0 / (epsilon * epsilon) * s;
}

QStencil make_q_stencil(const JumpKernel& kernel, double epsilon, int n_theta) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (epsilon * kernel.support() >= kPi)
        throw std::invalid_argument("epsilon too large: jumps would wrap around the circle");
    const double dth = 2.0 * kPi / n_theta;
    std::map<int, double> acc;
    for (std::size_t i = 0; i < kernel.nu.size(); ++i) {
        const double s = epsilon * kernel.nu[i] / dth;
        const double base = std::floor(s);
        double w[4];
        cubic_weights(s - base, w);
        for (int m = 0; m < 4; ++m) {
            int off = static_cast<int>(base) - 1 + m;
            off = ((off % n_theta) + n_theta) % n_theta;
            if (off > n_theta / 2) off -= n_theta;
            acc[off] += kernel.weight[i] * w[m];
        }
    }
    QStencil q;
    const double scale = 2.0 / (epsilon * epsilon);
    for (auto [off, c] : acc) {
        if (off == 0) continue;  // drops out of u[k+j] - u[k]
        q.offset.push_back(off);
        q.coef.push_back(scale * c);
    }
    return q;
}

void apply_stencil(const QStencil& q, const double* u, double* out, int n) {
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t m = 0; m < q.offset.size(); ++m) {
            int j = k + q.offset[m];
            j = j < 0 ? j + n : (j >= n ? j - n : j);
            s += q.coef[m] * (u[j] - u[k]);
        }
        out[k] = s;
    }
}

AdjointField apply_Qeps(const AdjointField& phi, const JumpKernel& kernel) {
    const GridSpec& g = phi.grid;
    QStencil q = make_q_stencil(kernel, phi.epsilon, g.n_theta);
    AdjointField out = phi;
    const int n1 = phi.full ? g.n_x1 : 1;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < g.n_x2; ++j)
            apply_stencil(q, &phi.values[phi.index(i, j, 0)], &out.values[out.index(i, j, 0)], g.n_theta);
    return out;
}

double chi_kappa(double theta, double kappa) {
    if (!(kappa > 0.0 && kappa < kPi / 4)) throw std::invalid_argument("kappa must lie in (0, pi/4)");
    const double th = wrap_angle(theta);
    if (th > 0.0) return 1.0;
    const double u = (th - (-kPi / 2 - kappa)) / (2.0 * kappa);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

double boundary_value_reduced(double t, double theta, double kappa,
                              const std::function<double(double)>& g0) {
    const double th = wrap_angle(theta);
    if (th > 1e-14) throw std::domain_error("boundary_value_reduced: theta must be in [-pi, 0]");
    const double chi = chi_kappa(th, kappa);
    const double limit = chi * g0(0.0) + (1.0 - chi) * g0(-kPi);
    return limit + std::exp(-t / kappa) * (g0(th) - limit);
}

QuadratureReport boundary_value_full_report(double t, double x1, double theta, double kappa,
                                            const SmoothData& g, bool check, int panels) {
    const double th = wrap_angle(theta);
    if (th > 1e-14) throw std::domain_error("boundary_value_full: theta must be in [-pi, 0]");
    if (!(t >= 0.0)) throw std::invalid_argument("boundary_value_full: t must be >= 0");
    const double chi = chi_kappa(th, kappa);
    const double c = std::cos(th);
    const double a_plus = -chi * (1.0 - c);
    const double a_minus = (1.0 - chi) * (1.0 + c);

    const double xs = x1 + t * c;
    const double d0 = g.value(xs, 0.0, th) - chi * g.value(xs, 0.0, 0.0) - (1.0 - chi) * g.value(xs, 0.0, -kPi);
    QuadratureReport rep;
    double integral = 0.0;
    if ((a_plus != 0.0 || a_minus != 0.0) && t > 0.0) {
        // u = t - s; the source sits at x1 + u cos(theta) at time t - u
        auto f = [&](double u) {
            double w = std::exp(-u / kappa);
            double v = 0.0;
            if (a_plus != 0.0) v += a_plus * g.d_x1(x1 + u * c + (t - u), 0.0, 0.0);
            if (a_minus != 0.0) v += a_minus * g.d_x1(x1 + u * c - (t - u), 0.0, -kPi);
            return w * v;
        };
        const double upper = std::min(t, 40.0 * kappa);
        auto simpson = [&](int n) {
            const double h = upper / n;
            double s = f(0.0) + f(upper);
            for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
            return s * h / 3.0;
        };
        int n = std::max(64, panels + panels % 2);
        double coarse = simpson(n);
        if (!check) {
            integral = coarse;
            rep.panels = n;
        } else {
            for (;;) {
                double fine = simpson(2 * n);
                double err = std::abs(fine - coarse) / 15.0;
                if (err <= 1e-10 * (1.0 + std::abs(fine))) {
                    integral = fine + (fine - coarse) / 15.0;
                    rep.error_estimate = err;
                    rep.panels = 2 * n;
                    break;
                }
                n *= 2;
                if (n > (1 << 16))
                    throw std::runtime_error("boundary_value_full: quadrature did not converge");
                coarse = fine;
            }
        }
    }
    rep.value = std::exp(-t / kappa) * d0 + integral + chi * g.value(x1 + t, 0.0, 0.0) +
                (1.0 - chi) * g.value(x1 - t, 0.0, -kPi);
    return rep;
}

double boundary_value_full(double t, double x1, double theta, double kappa, const SmoothData& g) {
    return boundary_value_full_report(t, x1, theta, kappa, g, true).value;
}

void AdjointParams::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("adjoint: epsilon must be > 0");
    if (!(kappa > 0.0 && kappa < kPi / 4)) throw std::invalid_argument("adjoint: kappa must lie in (0, pi/4)");
    if (dt < 0.0) throw std::invalid_argument("adjoint: dt must be >= 0");
    if (step() > epsilon * epsilon / 4.0 * (1.0 + 1e-12))
        throw std::invalid_argument("adjoint: dt exceeds the jump stability bound eps^2/4");
}

// ---------------------------------------------------------------- reduced solver

ReducedAdjointSolver::ReducedAdjointSolver(const GridSpec& g, const AdjointParams& p,
                                           std::vector<double> initial)
    : grid_(g), params_(p) {
    g.validate();
    p.validate();
    if (initial.size() != g.reduced_size()) throw std::invalid_argument("adjoint: initial data size mismatch");
    if (p.wall == WallMode::Fixed && p.wall_values.size() != static_cast<std::size_t>(g.n_theta))
        throw std::invalid_argument("adjoint: fixed wall data needs one value per theta node");
    stencil_ = make_q_stencil(make_zeta(), p.epsilon, g.n_theta);
    field_ = AdjointField(g, false);
    field_.epsilon = p.epsilon;
    field_.kappa = p.kappa;
    field_.values = std::move(initial);
    chi_.resize(g.n_theta);
    for (int k = 0; k < g.n_theta; ++k) chi_[k] = chi_kappa(g.theta(k), p.kappa);
    if (p.wall == WallMode::Fixed)
        for (int k = 0; k < g.n_theta; ++k)
            if (wall_arc(g, k)) field_.at(0, 0, k) = p.wall_values[k];
}

std::vector<double> ReducedAdjointSolver::apply(const std::vector<double>& psi, double h) const {
    const GridSpec& g = grid_;
    if (h > params_.epsilon * params_.epsilon / 4.0 * (1.0 + 1e-12))
        throw std::invalid_argument("adjoint: step exceeds eps^2/4");
    const int nt = g.n_theta, n2 = g.n_x2;
    std::vector<double> v(psi.size()), q(nt);
    for (int j = 0; j < n2; ++j) {
        const double* col = &psi[static_cast<std::size_t>(j) * nt];
        apply_stencil(stencil_, col, q.data(), nt);
        for (int k = 0; k < nt; ++k)
            v[static_cast<std::size_t>(j) * nt + k] = (j == 0 && wall_arc(g, k)) ? col[k] : col[k] + h * q[k];
    }
    std::vector<double> out(psi.size());
    const double dx2 = g.dx2();
    const double decay = std::exp(-h / params_.kappa);
    const int k0 = g.k_zero();
    for (int k = 0; k < nt; ++k) {
        const double s = std::sin(g.theta(k));
        for (int j = 0; j < n2; ++j) {
            double& o = out[static_cast<std::size_t>(j) * nt + k];
            if (j == 0 && wall_arc(g, k)) {
                if (params_.wall == WallMode::Fixed) {
                    o = params_.wall_values[k];
                } else {
                    const double limit = chi_[k] * psi[k0] + (1.0 - chi_[k]) * psi[0];
                    o = limit + decay * (psi[k] - limit);
                }
                continue;
            }
            const double foot = g.x2(j) + h * s;
            if (foot <= 0.0) {
                o = v[k];
            } else if (foot >= g.x2_max) {
                o = params_.top == TopClosure::Dirichlet ? params_.far_value
                                                         : v[static_cast<std::size_t>(n2 - 1) * nt + k];
            } else {
                const double qx = foot / dx2;
                const int j0 = std::min(static_cast<int>(qx), n2 - 2);
                const double w = qx - j0;
                o = (1.0 - w) * v[static_cast<std::size_t>(j0) * nt + k] + w * v[static_cast<std::size_t>(j0 + 1) * nt + k];
            }
        }
    }
    return out;
}

void ReducedAdjointSolver::step(double h) {
    field_.values = apply(field_.values, h);
    field_.time += h;
}

void ReducedAdjointSolver::advance_to(double t) {
    const double dt = params_.step();
    while (field_.time < t - 1e-12) step(std::min(dt, t - field_.time));
}

// ---------------------------------------------------------------- full solver

FullAdjointSolver::FullAdjointSolver(const GridSpec& g, const AdjointParams& p, SmoothData data)
    : grid_(g), params_(p), data_(std::move(data)) {
    g.validate();
    p.validate();
    if (p.wall != WallMode::Relax) throw std::invalid_argument("full adjoint: only the relaxing wall is supported");
    stencil_ = make_q_stencil(make_zeta(), p.epsilon, g.n_theta);
    field_ = AdjointField(g, true);
    field_.epsilon = p.epsilon;
    field_.kappa = p.kappa;
    for (int i = 0; i < g.n_x1; ++i)
        for (int j = 0; j < g.n_x2; ++j)
            for (int k = 0; k < g.n_theta; ++k) field_.at(i, j, k) = data_.value(g.x1(i), g.x2(j), g.theta(k));
}

void FullAdjointSolver::fill_wall(double t) {
    for (int i = 0; i < grid_.n_x1; ++i)
        for (int k = 0; k < grid_.n_theta; ++k)
            if (wall_arc(grid_, k))
                field_.at(i, 0, k) =
                    boundary_value_full_report(t, grid_.x1(i), grid_.theta(k), params_.kappa, data_, false).value;
}

void FullAdjointSolver::step(double h) {
    const GridSpec& g = grid_;
    if (h > params_.epsilon * params_.epsilon / 4.0 * (1.0 + 1e-12))
        throw std::invalid_argument("adjoint: step exceeds eps^2/4");
    const int nt = g.n_theta, n2 = g.n_x2, n1 = g.n_x1;
    std::vector<double> v(field_.values.size()), q(nt);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            const std::size_t base = field_.index(i, j, 0);
            const double* col = &field_.values[base];
            apply_stencil(stencil_, col, q.data(), nt);
            for (int k = 0; k < nt; ++k) v[base + k] = (j == 0 && wall_arc(g, k)) ? col[k] : col[k] + h * q[k];
        }
    const double dx1 = g.dx1(), dx2 = g.dx2();
    auto vat = [&](int i, int j, int k) { return v[field_.index(i, j, k)]; };
    for (int k = 0; k < nt; ++k) {
        const double c = std::cos(g.theta(k)), s = std::sin(g.theta(k));
        for (int i = 0; i < n1; ++i) {
            // x1 foot as cell coordinate
            double cx = (g.x1(i) + h * c - g.x1_min) / dx1 - 0.5;
            int i0 = static_cast<int>(std::floor(cx));
            double wx = cx - i0;
            int ia = i0, ib = i0 + 1;
            if (g.periodic_x1) {
                ia = ((ia % n1) + n1) % n1;
                ib = ((ib % n1) + n1) % n1;
            } else {
                ia = std::clamp(ia, 0, n1 - 1);
                ib = std::clamp(ib, 0, n1 - 1);
            }
            for (int j = 0; j < n2; ++j) {
                if (j == 0 && wall_arc(g, k)) continue;
                const double foot = g.x2(j) + h * s;
                double val;
                if (foot <= 0.0) {
                    val = (1 - wx) * vat(ia, 0, k) + wx * vat(ib, 0, k);
                } else if (foot >= g.x2_max) {
                    val = params_.top == TopClosure::Dirichlet
                              ? params_.far_value
                              : (1 - wx) * vat(ia, n2 - 1, k) + wx * vat(ib, n2 - 1, k);
                } else {
                    const double qx = foot / dx2;
                    const int j0 = std::min(static_cast<int>(qx), n2 - 2);
                    const double w = qx - j0;
                    val = (1 - wx) * ((1 - w) * vat(ia, j0, k) + w * vat(ia, j0 + 1, k)) +
                          wx * ((1 - w) * vat(ib, j0, k) + w * vat(ib, j0 + 1, k));
                }
                field_.at(i, j, k) = val;
            }
        }
    }
    field_.time += h;
    fill_wall(field_.time);
}

void FullAdjointSolver::advance_to(double t) {
    const double dt = params_.step();
    while (field_.time < t - 1e-12) step(std::min(dt, t - field_.time));
}

// ---------------------------------------------------------------- drivers

std::vector<double> sample_reduced(const GridSpec& g, const std::function<double(double, double)>& f) {
    std::vector<double> v(g.reduced_size());
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) v[static_cast<std::size_t>(j) * g.n_theta + k] = f(g.x2(j), g.theta(k));
    return v;
}

std::vector<AdjointField> solve_adjoint_reduced(const GridSpec& g,
                                                const std::function<double(double, double)>& init,
                                                const AdjointParams& p, const std::vector<double>& times) {
    ReducedAdjointSolver s(g, p, sample_reduced(g, init));
    std::vector<AdjointField> out;
    for (double t : times) {
        if (t < s.time() - 1e-12) throw std::invalid_argument("snapshot times must be ascending");
        s.advance_to(t);
        out.push_back(s.field());
    }
    return out;
}

std::vector<AdjointField> solve_adjoint_full(const GridSpec& g, const SmoothData& init,
                                             const AdjointParams& p, const std::vector<double>& times) {
    FullAdjointSolver s(g, p, init);
    std::vector<AdjointField> out;
    for (double t : times) {
        if (t < s.time() - 1e-12) throw std::invalid_argument("snapshot times must be ascending");
        s.advance_to(t);
        out.push_back(s.field());
    }
    return out;
}

ResolventResult resolvent(const GridSpec& g, const AdjointParams& p, const std::vector<double>& init,
                          double lambda, double tol, double max_time) {
    if (!(lambda > 0.0)) throw std::invalid_argument("resolvent: lambda must be > 0");
    ReducedAdjointSolver s(g, p, init);
    const double dt = s.dt();
    const double q = lambda / (lambda + dt);
    const double scale = std::max(1.0, sup_abs(init));
    std::vector<double> psi = init;
    std::vector<double> u(init.size());
    double weight = 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (1.0 - q) * psi[i];
    int n = 0;
    while (weight * sup_abs(psi) > tol * scale) {
        if (n * dt > max_time) throw std::runtime_error("resolvent: insufficient horizon");
        psi = s.apply(psi, dt);
        weight *= q;
        ++n;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += (1.0 - q) * weight * psi[i];
    }
    ResolventResult r;
    r.horizon = n * dt;
    std::vector<double> su = s.apply(u, dt);
    for (std::size_t i = 0; i < u.size(); ++i)
        r.residual = std::max(r.residual, std::abs(lambda * (su[i] - u[i]) / dt - (u[i] - init[i])));
    r.u = AdjointField(g, false);
    r.u.epsilon = p.epsilon;
    r.u.kappa = p.kappa;
    r.u.values = std::move(u);
    return r;
}

double pairing(const AdjointField& psi, const ReducedState& f) {
    const GridSpec& g = f.rho1.grid;
    check_reduced_match(psi.grid, g);
    if (psi.full) throw std::invalid_argument("pairing: reduced state needs a reduced adjoint field");
    double s = 0.0;
    for (std::size_t i = 0; i < f.rho1.values.size(); ++i) s += psi.values[i] * f.rho1.values[i];
    s *= g.reduced_cell_volume();
    return s + f.trapped_plus * psi.at(0, 0, g.k_zero()) + f.trapped_minus * psi.at(0, 0, 0);
}

double pairing(const AdjointField& psi, const KineticState& f) {
    const GridSpec& g = f.f.grid;
    if (!psi.full || !same_grid(psi.grid, g)) throw std::invalid_argument("pairing: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.f.values.size(); ++i) s += psi.values[i] * f.f.values[i];
    s *= g.cell_volume();
    double b = 0.0;
    for (int i = 0; i < g.n_x1; ++i)
        b += f.boundary.rho_plus[i] * psi.at(i, 0, g.k_zero()) + f.boundary.rho_minus[i] * psi.at(i, 0, 0);
    return s + b * g.dx1();
}

namespace {

template <class State>
double duality_impl(const std::vector<State>& fwd, const std::vector<AdjointField>& adj) {
    if (fwd.size() != adj.size() || fwd.empty()) throw std::invalid_argument("duality_check: length mismatch");
    AdjointField absg = adj.front();
    for (double& v : absg.values) v = std::abs(v);
    const double norm = pairing(absg, fwd.front());
    if (!(norm > 0.0)) throw std::invalid_argument("duality_check: zero normalization");
    double worst = 0.0;
    for (std::size_t m = 0; m < fwd.size(); ++m) {
        if (std::abs(fwd[m].time - adj[m].time) > 1e-9) throw std::invalid_argument("duality_check: time mismatch");
        const double d = std::abs(pairing(adj.front(), fwd[m]) - pairing(adj[m], fwd.front()));
        worst = std::max(worst, d / norm);
    }
    return worst;
}

}  // namespace

double duality_check(const std::vector<ReducedState>& forward, const std::vector<AdjointField>& adjoint) {
    return duality_impl(forward, adjoint);
}

double duality_check(const std::vector<KineticState>& forward, const std::vector<AdjointField>& adjoint) {
    return duality_impl(forward, adjoint);
}

}  // namespace polykin
