#pragma once

#include <utility>

#include "polykin/adjoint.hpp"
#include "polykin/core.hpp"
#include "polykin/kinetic.hpp"
#include "polykin/specfun.hpp"

namespace polykin {

enum class BoundaryKind { Plus, Minus, Zero, One };

BoundaryKind parse_boundary_kind(const std::string& s);

struct StationaryProblem {
    BoundaryKind kind = BoundaryKind::Plus;
    GridSpec grid;  // x2_max is the truncation height L
    double far_field = -1.0;  // < 0 picks 1/2 for plus/minus, 0 for zero, 1 for one
    TopClosure top = TopClosure::Dirichlet;
    double epsilon = 0.2;
    double dt = 0.0;  // pseudo-time step; 0 picks eps^2/4
    double initial = 0.0;  // constant starting field
    double check_every = 1.0;  // pseudo-time between convergence checks
    double max_time = 5000.0;

    double far_value() const;
    std::vector<double> wall_data() const;  // per theta node
    AdjointParams adjoint_params() const;
};

struct StationaryResult {
    ReducedField psi;
    double pseudo_time = 0.0;
    double last_change = 0.0;  // sup-norm change over the final check interval
    double residual = 0.0;     // sup |(S psi - psi) / dt| off the wall
};

StationaryResult solve_stationary(const StationaryProblem& p, double tol = 1e-7);

// Mirror x1 -> -x1 maps theta to pi - theta, which swaps the plus and minus arcs.
int mirror_index(const GridSpec& g, int k);

// max |psi(x2, theta) + psi(x2, pi - theta) - 1|
double check_symmetry(const ReducedField& psi_plus);

// max over theta of |psi(L, theta) - 1/2|
double farfield_limit(const ReducedField& psi);

struct DominationReport {
    double max_violation = 0.0;  // max of psi - envelope over x2 in [delta, L]; <= 0 means dominated
    double worst_x2 = 0.0;
    double worst_theta = 0.0;
};

// psi <= 1 + eta - F_lambda(x2 - delta, theta) on x2 >= delta
DominationReport supersolution_domination(const ReducedField& psi, const SupersolutionParams& s);

// (<psi+, f_in>, <psi-, f_in>) including mass already on the wall
std::pair<double, double> trapped_mass_prediction(const ReducedState& f_in, const ReducedField& psi_plus,
                                                  const ReducedField& psi_minus);

}  // namespace polykin
