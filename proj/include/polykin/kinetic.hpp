#pragma once

#include <functional>
#include <string>
#include <vector>

#include "polykin/core.hpp"

namespace polykin {

struct KineticState {
    PhaseField f;
    BoundaryDensityPair boundary;
    double time = 0.0;
    double escaped = 0.0;
    MassLedger ledger;
};

struct ReducedState {
    ReducedField rho1;
    double trapped_plus = 0.0;
    double trapped_minus = 0.0;
    double escaped = 0.0;
    double time = 0.0;

    double total() const;
};

// Initial data. kind selects which fields are read.
struct InitialCondition {
    enum class Kind { PointMass, Gaussian, Table };
    Kind kind = Kind::PointMass;
    PhasePoint center{0.0, 1.0, 0.0};
    // Gaussian widths; for PointMass these default to 1.5 grid spacings.
    double sigma_x1 = 0.0;
    double sigma_x2 = 0.0;
    double sigma_theta = 0.0;
    std::vector<double> table;  // PhaseField layout, theta fastest
    bool normalize = true;
    double mass = 1.0;
};

// Mass (not density) leaving through the wall, per (x1 cell, theta node), plus mass
// carried past x2_max or out of a non-periodic x1 range.
struct OutflowRecords {
    int n_x1 = 0;
    int n_theta = 0;
    std::vector<double> wall;
    double escaped = 0.0;

    OutflowRecords() = default;
    explicit OutflowRecords(const GridSpec& g)
        : n_x1(g.n_x1), n_theta(g.n_theta), wall(static_cast<std::size_t>(g.n_x1) * g.n_theta, 0.0) {}
    double& at(int i1, int k) { return wall[static_cast<std::size_t>(i1) * n_theta + k]; }
    double at(int i1, int k) const { return wall[static_cast<std::size_t>(i1) * n_theta + k]; }
    double total() const;
};

KineticState init_state(const InitialCondition& ic, const GridSpec& g);
ReducedState init_reduced(const InitialCondition& ic, const GridSpec& g);
ReducedState reduce(const KineticState& s);

// Moves wall-row mass with theta in [-pi, 0] into the records, since it can only be
// on its way into the wall (or already aligned with it).
void sweep_wall_row(PhaseField& f, OutflowRecords& out);

PhaseField transport_substep(const PhaseField& f, double dt, OutflowRecords& out);
BoundaryDensityPair absorb_boundary(const OutflowRecords& out, const BoundaryDensityPair& b,
                                    const GridSpec& g);
PhaseField theta_diffusion_substep(const PhaseField& f, double dt, double D);
BoundaryDensityPair transport_rho_pm(const BoundaryDensityPair& b, const GridSpec& g, double dt,
                                     double* escaped = nullptr);

KineticState advance(const KineticState& s, double dt);
ReducedState advance_reduced(const ReducedState& s, double dt);

// One implicit step of u_t = D u_thth on a periodic column of length n, in place.
// r = D dt / dtheta^2.
void implicit_periodic_diffusion(double* u, int n, double r, std::vector<double>& work);

// Smooth test function for the weak form. At the wall it must not depend on theta
// inside [-pi, -pi/2) or (-pi/2, 0]; the callables give phi and its partials.
struct TestFunction {
    std::function<double(double t, double x1, double x2, double th)> value;
    std::function<double(double t, double x1, double x2, double th)> d_t;
    std::function<double(double t, double x1, double x2, double th)> d_x1;
    std::function<double(double t, double x1, double x2, double th)> d_x2;
    std::function<double(double t, double x1, double x2, double th)> d_thth;
};

// |left side - right side| of the weak formulation, time integrals by the trapezoid
// rule over the stored trajectory.
double weak_residual(const std::vector<KineticState>& trajectory, const TestFunction& phi);

}  // namespace polykin
