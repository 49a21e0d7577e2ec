#include "polykin/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace polykin {

double wrap_angle(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("wrap_angle: non-finite angle");
    double r = std::fmod(theta + kPi, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    double out = r - kPi;
    // fmod can land exactly on 2*pi after the shift for inputs just below -pi
    if (out >= kPi) out -= 2.0 * kPi;
    return out;
}

void GridSpec::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("grid: " + m); };
    if (n_x1 < 4 || n_x2 < 4 || n_theta < 4) fail("all counts must be >= 4");
    if (n_theta % 2 != 0) fail("n_theta must be even");
    if (!(x1_max > x1_min)) fail("x1_max must exceed x1_min");
    if (!(x2_max > 0.0)) fail("x2_max must be positive");
    if (!(dt > 0.0)) fail("dt must be positive");
    if (!(D >= 0.0)) fail("D must be non-negative");
}

bool same_grid(const GridSpec& a, const GridSpec& b) {
    return a.n_x1 == b.n_x1 && a.n_x2 == b.n_x2 && a.n_theta == b.n_theta &&
           a.x1_min == b.x1_min && a.x1_max == b.x1_max && a.x2_max == b.x2_max;
}

double integrate_field(const PhaseField& f) {
    if (f.values.size() != f.grid.phase_size())
        throw std::invalid_argument("integrate_field: dimension mismatch");
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.cell_volume();
}

double integrate_field(const ReducedField& f) {
    if (f.values.size() != f.grid.reduced_size())
        throw std::invalid_argument("integrate_field: dimension mismatch");
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.reduced_cell_volume();
}

double line_mass(const std::vector<double>& rho, const GridSpec& g) {
    if (rho.size() != static_cast<std::size_t>(g.n_x1))
        throw std::invalid_argument("line_mass: dimension mismatch");
    double s = 0.0;
    for (double v : rho) s += v;
    return s * g.dx1();
}

ReducedField marginal_x1(const PhaseField& f) {
    ReducedField r(f.grid);
    const double dx1 = f.grid.dx1();
    for (int i1 = 0; i1 < f.grid.n_x1; ++i1)
        for (int i2 = 0; i2 < f.grid.n_x2; ++i2)
            for (int k = 0; k < f.grid.n_theta; ++k) r.at(i2, k) += f.at(i1, i2, k) * dx1;
    return r;
}

MassLedger make_ledger(const PhaseField& f, const BoundaryDensityPair& b, double escaped) {
    if (escaped < 0.0) throw std::invalid_argument("make_ledger: negative escaped mass");
    MassLedger l;
    l.interior = integrate_field(f);
    l.trapped_plus = line_mass(b.rho_plus, f.grid);
    l.trapped_minus = line_mass(b.rho_minus, f.grid);
    l.escaped_top = escaped;
    l.total = l.interior + l.trapped_plus + l.trapped_minus + l.escaped_top;
    return l;
}

}  // namespace polykin
