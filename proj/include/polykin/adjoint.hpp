#pragma once

#include <functional>
#include <string>
#include <vector>

#include "polykin/core.hpp"
#include "polykin/kinetic.hpp"

namespace polykin {

// Values of an adjoint (test) function on the (x2, theta) grid, or on the full
// (x1, x2, theta) grid when `full` is set. Same layout as ReducedField / PhaseField.
struct AdjointField {
    GridSpec grid;
    bool full = false;
    double epsilon = 0.05;
    double kappa = 0.05;
    double time = 0.0;
    std::vector<double> values;

    AdjointField() = default;
    AdjointField(const GridSpec& g, bool full_grid)
        : grid(g), full(full_grid), values(full_grid ? g.phase_size() : g.reduced_size(), 0.0) {}

    std::size_t index(int i1, int i2, int k) const {
        return (static_cast<std::size_t>(full ? i1 : 0) * grid.n_x2 + i2) * grid.n_theta + k;
    }
    double& at(int i1, int i2, int k) { return values[index(i1, i2, k)]; }
    double at(int i1, int i2, int k) const { return values[index(i1, i2, k)]; }
    double sup() const;
};

// Quadrature nodes and weights for the two-bump jump kernel.
struct JumpKernel {
    std::vector<double> nu;
    std::vector<double> weight;  // sums to 1
    double center = 1.0;
    double half_width = 0.2;

    double moment(int p) const;
    double support() const { return center + half_width; }
};

// Unnormalized bump exp(-1 / (1 - u^2)) on |u| < 1.
double bump(double u);

JumpKernel make_zeta();

// Q^eps[u](theta) = (2/eps^2) * sum_i w_i (u(theta + eps nu_i) - u(theta)) for a callable u.
double apply_Qeps(const std::function<double(double)>& u, double theta, double epsilon,
                  const JumpKernel& kernel);

// The same operator on a periodic theta grid, with periodic cubic interpolation at
// the off-grid samples, folded into a fixed stencil.
struct QStencil {
    std::vector<int> offset;
    std::vector<double> coef;  // includes 2/eps^2; sums of coef * (u[k+j] - u[k])
};

QStencil make_q_stencil(const JumpKernel& kernel, double epsilon, int n_theta);
void apply_stencil(const QStencil& q, const double* u, double* out, int n);
AdjointField apply_Qeps(const AdjointField& phi, const JumpKernel& kernel);

double chi_kappa(double theta, double kappa);

// Closed-form wall value of the reduced problem for theta in [-pi, 0]; g0 gives g(0, .).
double boundary_value_reduced(double t, double theta, double kappa,
                              const std::function<double(double)>& g0);

// Smooth initial data for the full problem together with its x1-derivative.
struct SmoothData {
    std::function<double(double x1, double x2, double th)> value;
    std::function<double(double x1, double x2, double th)> d_x1;
};

struct QuadratureReport {
    double value = 0.0;
    double error_estimate = 0.0;
    int panels = 0;
};

// Wall value of the full problem for theta in [-pi, 0]: the relaxing defect carried along
// x1, plus the transported limits at theta = 0 and -pi. The time integral is done by
// Simpson's rule, checked against half the panel count when `check` is set.
QuadratureReport boundary_value_full_report(double t, double x1, double theta, double kappa,
                                            const SmoothData& g, bool check = true,
                                            int panels = 64);
double boundary_value_full(double t, double x1, double theta, double kappa, const SmoothData& g);

enum class TopClosure { Clamp, Dirichlet };
enum class WallMode { Relax, Fixed };

struct AdjointParams {
    double epsilon = 0.05;
    double kappa = 0.05;
    double dt = 0.0;  // 0 picks eps^2 / 8
    TopClosure top = TopClosure::Clamp;
    double far_value = 0.0;  // used with TopClosure::Dirichlet
    WallMode wall = WallMode::Relax;
    std::vector<double> wall_values;  // per theta node, used with WallMode::Fixed

    void validate() const;
    double step() const { return dt > 0.0 ? dt : epsilon * epsilon / 8.0; }
};

// dpsi/dt = sin(theta) dpsi/dx2 + Q^eps psi on x2 > 0 with the trapping closure on the wall.
class ReducedAdjointSolver {
public:
    ReducedAdjointSolver(const GridSpec& g, const AdjointParams& p, std::vector<double> initial);

    void step(double h);
    void step() { step(params_.step()); }
    void advance_to(double t);

    // One step of length h applied to arbitrary data (no state change).
    std::vector<double> apply(const std::vector<double>& psi, double h) const;

    const AdjointField& field() const { return field_; }
    double time() const { return field_.time; }
    double dt() const { return params_.step(); }
    const AdjointParams& params() const { return params_; }

private:
    GridSpec grid_;
    AdjointParams params_;
    QStencil stencil_;
    AdjointField field_;
    std::vector<double> chi_;
};

// Same on (x1, x2, theta); wall values come from boundary_value_full.
class FullAdjointSolver {
public:
    FullAdjointSolver(const GridSpec& g, const AdjointParams& p, SmoothData data);

    void step(double h);
    void step() { step(params_.step()); }
    void advance_to(double t);

    const AdjointField& field() const { return field_; }
    double time() const { return field_.time; }
    double dt() const { return params_.step(); }

private:
    void fill_wall(double t);

    GridSpec grid_;
    AdjointParams params_;
    SmoothData data_;
    QStencil stencil_;
    AdjointField field_;
};

std::vector<double> sample_reduced(const GridSpec& g,
                                   const std::function<double(double x2, double th)>& f);

// Snapshots at the requested times (ascending, starting at 0 or later).
std::vector<AdjointField> solve_adjoint_reduced(const GridSpec& g,
                                                const std::function<double(double, double)>& init,
                                                const AdjointParams& p,
                                                const std::vector<double>& times);
std::vector<AdjointField> solve_adjoint_full(const GridSpec& g, const SmoothData& init,
                                             const AdjointParams& p, const std::vector<double>& times);

struct ResolventResult {
    AdjointField u;
    double residual = 0.0;  // sup |lambda L_h u - (u - g)|
    double horizon = 0.0;
};

// u = sum_n (1 - q) q^n S^n g with q = lambda / (lambda + dt), the resolvent of the
// one-step map S. L_h = (S - I) / dt.
ResolventResult resolvent(const GridSpec& g, const AdjointParams& p, const std::vector<double>& init,
                          double lambda, double tol = 1e-12, double max_time = 200.0);

// <psi, f> including the wall-trapped parts, which sit at (0, 0) and (0, -pi).
double pairing(const AdjointField& psi, const ReducedState& f);
double pairing(const AdjointField& psi, const KineticState& f);

// max over m of |<psi_0, f_m> - <psi_m, f_0>| / <|psi_0|, f_0>; forward[m] and
// adjoint[m] must share their time.
double duality_check(const std::vector<ReducedState>& forward, const std::vector<AdjointField>& adjoint);
double duality_check(const std::vector<KineticState>& forward, const std::vector<AdjointField>& adjoint);

struct Certificate {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
};

}  // namespace polykin
