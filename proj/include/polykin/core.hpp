#pragma once

#include <cstddef>
#include <numbers>
#include <vector>

namespace polykin {

inline constexpr double kPi = std::numbers::pi;

// Maps any finite angle into [-pi, pi). Throws std::invalid_argument otherwise.
double wrap_angle(double theta);

struct PhasePoint {
    double x1 = 0.0;
    double x2 = 0.0;
    double theta = 0.0;
};

// Tensor grid over (x1, x2, theta).
//   x1: n_x1 cells of width dx1, centres x1_min + (i + 1/2) dx1
//   x2: n_x2 nodes x2_j = j dx2, j = 0 is the wall, j = n_x2 - 1 is x2_max
//   theta: n_theta nodes -pi + k dtheta; n_theta even so 0, -pi/2, -pi are nodes
// Every node carries the measure of one cell (midpoint rule).
struct GridSpec {
    double x1_min = -4.0;
    double x1_max = 4.0;
    int n_x1 = 32;
    double x2_max = 4.0;
    int n_x2 = 32;
    int n_theta = 32;
    double dt = 0.01;
    double D = 1.0;
    bool periodic_x1 = true;

    void validate() const;

    double dx1() const { return (x1_max - x1_min) / n_x1; }
    double dx2() const { return x2_max / (n_x2 - 1); }
    double dtheta() const { return 2.0 * kPi / n_theta; }
    double x1(int i) const { return x1_min + (i + 0.5) * dx1(); }
    double x2(int j) const { return j * dx2(); }
    double theta(int k) const { return -kPi + k * dtheta(); }
    double cell_volume() const { return dx1() * dx2() * dtheta(); }
    double reduced_cell_volume() const { return dx2() * dtheta(); }

    int k_zero() const { return n_theta / 2; }
    int k_minus_half_pi() const { return n_theta / 4; }
    bool quarter_node() const { return n_theta % 4 == 0; }

    std::size_t phase_size() const {
        return static_cast<std::size_t>(n_x1) * n_x2 * n_theta;
    }
    std::size_t reduced_size() const { return static_cast<std::size_t>(n_x2) * n_theta; }
};

bool same_grid(const GridSpec& a, const GridSpec& b);

// Cell-averaged f_r(x1, x2, theta); theta is the fastest index.
struct PhaseField {
    GridSpec grid;
    std::vector<double> values;

    PhaseField() = default;
    explicit PhaseField(const GridSpec& g) : grid(g), values(g.phase_size(), 0.0) {}

    std::size_t index(int i1, int i2, int k) const {
        return (static_cast<std::size_t>(i1) * grid.n_x2 + i2) * grid.n_theta + k;
    }
    double& at(int i1, int i2, int k) { return values[index(i1, i2, k)]; }
    double at(int i1, int i2, int k) const { return values[index(i1, i2, k)]; }
};

// rho_1(x2, theta) = integral of f_r over x1.
struct ReducedField {
    GridSpec grid;
    std::vector<double> values;

    ReducedField() = default;
    explicit ReducedField(const GridSpec& g) : grid(g), values(g.reduced_size(), 0.0) {}

    std::size_t index(int i2, int k) const {
        return static_cast<std::size_t>(i2) * grid.n_theta + k;
    }
    double& at(int i2, int k) { return values[index(i2, k)]; }
    double at(int i2, int k) const { return values[index(i2, k)]; }
};

// Line densities of wall-trapped mass moving right (+) and left (-).
struct BoundaryDensityPair {
    std::vector<double> rho_plus;
    std::vector<double> rho_minus;

    BoundaryDensityPair() = default;
    explicit BoundaryDensityPair(const GridSpec& g)
        : rho_plus(g.n_x1, 0.0), rho_minus(g.n_x1, 0.0) {}
};

struct MassLedger {
    double interior = 0.0;
    double trapped_plus = 0.0;
    double trapped_minus = 0.0;
    double escaped_top = 0.0;
    double total = 0.0;
};

double integrate_field(const PhaseField& f);
double integrate_field(const ReducedField& f);
double line_mass(const std::vector<double>& rho, const GridSpec& g);

// x1-marginal of a phase field.
ReducedField marginal_x1(const PhaseField& f);

MassLedger make_ledger(const PhaseField& f, const BoundaryDensityPair& b, double escaped);

}  // namespace polykin
