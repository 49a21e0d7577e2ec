#pragma once

#include <vector>

#include "polykin/core.hpp"

namespace polykin {

struct HolderParams {
    double alpha = 0.15;        // regular profile exponent, in (0, 1/6)
    double alpha_sing = -0.05;  // singular profile exponent, < 0
    void validate() const;
};

struct SupersolutionParams {
    double lambda = 0.1;
    double eta = 0.12;
    double delta = 0.05;
    double R = 0.2;
    double sigma() const;
    void validate() const;
};

// Kummer M(a; b; z). Throws std::domain_error at poles of b, std::overflow_error on overflow.
double kummer_m(double a, double b, double z);
double kummer_m_prime(double a, double b, double z);

// Tricomi U(a, b, z). z < 0 goes through the M connection formula with the real
// branch z^{1-b} = -|z|^{1-b} (valid for b = p/3 style non-integer b; integer b rejected).
double tricomi_u(double a, double b, double z);
double tricomi_u_prime(double a, double b, double z);

struct Derivs1 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// Lambda(zeta) = U(-alpha, 2/3, -zeta^3) with first and second derivatives.
Derivs1 lambda_profile_derivs(double zeta, const HolderParams& p);
double lambda_profile(double zeta, const HolderParams& p);
// Lambda'' + 3 zeta^2 Lambda' - 9 alpha zeta Lambda and its scale 1+|L|+|L'|+|L''|.
double lambda_ode_residual(double zeta, const HolderParams& p, double* scale = nullptr);

struct Derivs2 {
    double v = 0.0;
    double d_a = 0.0;   // derivative in the first variable (x2 or y)
    double d_b = 0.0;   // derivative in the angle-like variable
    double d_bb = 0.0;
};

// f*_0 = x2^{alpha_sing} M(-alpha_sing; 2/3; -theta^3/(9 x2)).
double fstar0(double x2, double theta, const HolderParams& p);
Derivs2 fstar0_derivs(double x2, double theta, const HolderParams& p);
// theta d/dx2 f - d^2/dtheta^2 f, with scale |theta f_x2| + |f_thth| + |f|.
double fstar0_residual(double x2, double theta, const HolderParams& p, double* scale = nullptr);

// F_0(y, zeta) = y^alpha Lambda(zeta / (9y)^{1/3}).
double f0_selfsim(double y, double zeta, const HolderParams& p);
Derivs2 f0_selfsim_derivs(double y, double zeta, const HolderParams& p);

// Self-similar supersolution hat_f0(t, x2, theta) = Z(x2/t^{3/2}, theta/t^{1/2}).
// Without correction Z = F_0. With correction Z = y^alpha Phi(s), s = zeta/(9y)^{1/3},
// where Phi solves Phi'' + 3 s^2 Phi' - 9 alpha s Phi + 2 beta(s) Phi = 0 from Lambda data
// at s = -S; beta supplies the margin that the time derivative of the scaling consumes
// inside the region |zeta|^3 + y <= r0.
class SelfSimilarProfile {
public:
    struct Options {
        bool correction = true;
        double r0 = 0.01;    // validity radius in |theta|^3 + x2 <= r0 t^{3/2}
        double gamma = 2.0;  // margin factor on beta
        double s_max = 12.0;
        double h = 1e-3;
    };
    struct Value {
        double value = 0.0;
        bool in_region = false;
    };

    SelfSimilarProfile(const HolderParams& p, const Options& o);
    explicit SelfSimilarProfile(const HolderParams& p) : SelfSimilarProfile(p, Options{}) {}

    Value evaluate(double t, double x2, double theta) const;
    // (d_t + sin(theta) d_x2 - d_theta^2) hat_f0, and a scale for relative checks.
    double residual(double t, double x2, double theta, double* scale = nullptr) const;
    // R_0 / F_0 at (y, zeta); zero when the correction is off.
    double correction_ratio(double y, double zeta) const;
    bool in_region(double t, double x2, double theta) const;
    Derivs2 z_derivs(double y, double zeta) const;

    const HolderParams& params() const { return p_; }
    const Options& options() const { return o_; }

private:
    Derivs1 phi(double s) const;
    double beta(double s) const;

    HolderParams p_;
    Options o_;
    std::vector<double> phi_v_, phi_d_;
    double ratio_lo_ = 1.0, ratio_hi_ = 1.0;
};

// hat_f0 convenience wrapper (builds a profile each call; prefer the class in loops).
SelfSimilarProfile::Value hat_f0(double t, double x2, double theta, const HolderParams& p,
                                 bool correction);

// F_lambda = e^{-lambda x2} (1 - lambda sin th - lambda^2/8 cos 2th); lambda <= 0.2.
double stationary_supersol_F(double x2, double theta, const SupersolutionParams& s);
// Closed form of (-sin th d_x2 - d_th^2) F_lambda.
double stationary_supersol_residual(double x2, double theta, const SupersolutionParams& s);

// W = e^{-sigma t} V(x2 + t sin th, th), V = cos(k(th-th0)) cos(k(x2-x20))/2 + 1/2,
// k = sigma^{1/4}. Defined on the ball of radius 2R around the centre only.
double parabolic_subsol_V(double t, double x2, double theta, const SupersolutionParams& s,
                          const PhasePoint& center);
// (d_t - sin th d_x2 - d_th^2) W, analytic.
double parabolic_subsol_residual(double t, double x2, double theta,
                                 const SupersolutionParams& s, const PhasePoint& center);
// Largest t on a uniform scan for which the residual stays <= tol on a dense ball sample.
double subsol_t_star(const SupersolutionParams& s, const PhasePoint& center, double tol,
                     int n_sample = 41, double t_step = 1e-4, double t_cap = 1.0);

}  // namespace polykin
