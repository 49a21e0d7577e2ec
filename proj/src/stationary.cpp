#include "polykin/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polykin {

namespace {

AdjointField as_adjoint(const ReducedField& r) {
    AdjointField a(r.grid, false);
    a.values = r.values;
    return a;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

BoundaryKind parse_boundary_kind(const std::string& s) {
    if (s == "plus") return BoundaryKind::Plus;
    if (s == "minus") return BoundaryKind::Minus;
    if (s == "zero") return BoundaryKind::Zero;
    if (s == "one") return BoundaryKind::One;
    throw std::invalid_argument("unknown boundary kind '" + s + "'");
}

double StationaryProblem::far_value() const {
    if (far_field >= 0.0) return far_field;
    switch (kind) {
        case BoundaryKind::Zero: return 0.0;
        case BoundaryKind::One: return 1.0;
        default: return 0.5;
    }
}

std::vector<double> StationaryProblem::wall_data() const {
    const GridSpec& g = grid;
    std::vector<double> w(g.n_theta, 0.0);
    for (int k = 0; k < g.n_theta; ++k) {
        const double th = g.theta(k);
        if (th > 1e-14) continue;
        double plus;
        if (g.quarter_node() && k == g.k_minus_half_pi()) plus = 0.5;
        else plus = th > -kPi / 2 ? 1.0 : 0.0;
        switch (kind) {
            case BoundaryKind::Plus: w[k] = plus; break;
            case BoundaryKind::Minus: w[k] = 1.0 - plus; break;
            case BoundaryKind::Zero: w[k] = 0.0; break;
            case BoundaryKind::One: w[k] = 1.0; break;
        }
    }
    return w;
}

AdjointParams StationaryProblem::adjoint_params() const {
    AdjointParams a;
    a.epsilon = epsilon;
    a.kappa = 0.1;  // unused with a fixed wall
    a.dt = dt > 0.0 ? dt : epsilon * epsilon / 4.0;
    a.top = top;
    a.far_value = far_value();
    a.wall = WallMode::Fixed;
    a.wall_values = wall_data();
    return a;
}

StationaryResult solve_stationary(const StationaryProblem& p, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("stationary: tol must be > 0");
    const GridSpec& g = p.grid;
    ReducedAdjointSolver s(g, p.adjoint_params(), std::vector<double>(g.reduced_size(), p.initial));
    const double dt = s.dt();
    const int per_check = std::max(1, static_cast<int>(std::lround(p.check_every / dt)));
    std::vector<double> prev = s.field().values;
    StationaryResult r;
    double best = INFINITY;
    double before = INFINITY;
    int stalls = 0;
    for (;;) {
        for (int i = 0; i < per_check; ++i) s.step(dt);
        const double change = sup_diff(s.field().values, prev);
        prev = s.field().values;
        r.last_change = change;
        // geometric tail estimate of the remaining distance to the fixed point
        const double ratio = change / before;
        before = change;
        if (change <= tol && ratio < 1.0 && change * ratio / (1.0 - ratio) <= 0.5 * tol) break;
        // stall: no progress over many checks
        if (change < 0.999 * best) {
            best = change;
            stalls = 0;
        } else if (++stalls > 50) {
            throw std::runtime_error("stationary: marching stalled");
        }
        if (s.time() > p.max_time) throw std::runtime_error("stationary: no convergence within the pseudo-time budget");
    }
    r.pseudo_time = s.time();
    r.psi = ReducedField(g);
    r.psi.values = s.field().values;
    std::vector<double> next = s.apply(r.psi.values, dt);
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) {
            if (j == 0 && g.theta(k) <= 1e-14) continue;
            const std::size_t i = r.psi.index(j, k);
            r.residual = std::max(r.residual, std::abs(next[i] - r.psi.values[i]) / dt);
        }
    return r;
}

int mirror_index(const GridSpec& g, int k) {
    const int n = g.n_theta;
    return ((n / 2 - k) % n + n) % n;
}

double check_symmetry(const ReducedField& psi) {
    const GridSpec& g = psi.grid;
    double m = 0.0;
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k)
            m = std::max(m, std::abs(psi.at(j, k) + psi.at(j, mirror_index(g, k)) - 1.0));
    return m;
}

double farfield_limit(const ReducedField& psi) {
    const GridSpec& g = psi.grid;
    double m = 0.0;
    for (int k = 0; k < g.n_theta; ++k) m = std::max(m, std::abs(psi.at(g.n_x2 - 1, k) - 0.5));
    return m;
}

DominationReport supersolution_domination(const ReducedField& psi, const SupersolutionParams& s) {
    s.validate();
    const GridSpec& g = psi.grid;
    DominationReport r;
    r.max_violation = -INFINITY;
    for (int j = 0; j < g.n_x2; ++j) {
        const double x2 = g.x2(j);
        if (x2 < s.delta - 1e-12) continue;
        for (int k = 0; k < g.n_theta; ++k) {
            const double env = 1.0 + s.eta - stationary_supersol_F(x2 - s.delta, g.theta(k), s);
            const double v = psi.at(j, k) - env;
            if (v > r.max_violation) {
                r.max_violation = v;
                r.worst_x2 = x2;
                r.worst_theta = g.theta(k);
            }
        }
    }
    return r;
}

std::pair<double, double> trapped_mass_prediction(const ReducedState& f_in, const ReducedField& psi_plus,
                                                  const ReducedField& psi_minus) {
    return {pairing(as_adjoint(psi_plus), f_in), pairing(as_adjoint(psi_minus), f_in)};
}

}  // namespace polykin
