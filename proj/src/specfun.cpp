#include "polykin/specfun.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_gamma.h>
#include <gsl/gsl_sf_hyperg.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace polykin {

namespace {

struct GslQuiet {
    GslQuiet() { gsl_set_error_handler_off(); }
};
const GslQuiet gsl_quiet;

constexpr double kB = 2.0 / 3.0;

bool near_int(double x, double tol = 1e-12) { return std::abs(x - std::round(x)) < tol; }

// 1/Gamma(x), finite at the poles.
double rgamma(double x) { return gsl_sf_gammainv(x); }

double gamma_fn(double x) {
    if (x <= 0.0 && near_int(x)) throw std::domain_error("gamma at a pole");
    return gsl_sf_gamma(x);
}

// sum_{n>=1} (c)_n z^n / n! * (1/(b1)_n - 1/(b2)_n); used where M(c,b1,z) - M(c,b2,z)
// would cancel to nothing.
double kummer_difference_series(double c, double b1, double b2, double z) {
    double pc = 1.0, p1 = 1.0, p2 = 1.0, zn = 1.0, fact = 1.0, sum = 0.0;
    for (int n = 1; n < 200; ++n) {
        pc *= c + n - 1;
        p1 *= b1 + n - 1;
        p2 *= b2 + n - 1;
        zn *= z;
        fact *= n;
        double term = pc * zn / fact * (1.0 / p1 - 1.0 / p2);
        sum += term;
        if (n > 3 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// Large negative argument: M(a,b,-x) ~ G(b)/G(b-a) x^{-a} sum (a)_s (a-b+1)_s / s! x^{-s}.
// The exponentially small companion term is below rounding once x > 40. GSL goes through
// Kummer's transformation here and overflows on e^{x}.
bool kummer_m_negative_asymptotic(double a, double b, double x, double* out) {
    if (near_int(b - a) && b - a <= 0.0) return false;
    double term = 1.0, sum = 1.0, prev = 1.0;
    for (int s = 1; s < 60; ++s) {
        term *= (a + s - 1) * (a - b + s) / (s * x);
        if (std::abs(term) > std::abs(prev)) break;  // past the smallest term
        sum += term;
        prev = term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) {
            *out = gsl_sf_gamma(b) * gsl_sf_gammainv(b - a) * std::pow(x, -a) * sum;
            return true;
        }
    }
    return false;
}

}  // namespace

void HolderParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0 / 6.0))
        throw std::invalid_argument("profiles: alpha must lie in (0, 1/6)");
    if (!(alpha_sing < 0.0)) throw std::invalid_argument("profiles: alpha_sing must be < 0");
}

double SupersolutionParams::sigma() const { return std::pow(2.0 * kPi / R, 4); }

void SupersolutionParams::validate() const {
    if (!(lambda >= 0.0 && lambda <= 0.2))
        throw std::invalid_argument("profiles: lambda must lie in [0, 0.2]");
    if (!(eta >= 0.0)) throw std::invalid_argument("profiles: eta must be >= 0");
    if (!(delta >= 0.0)) throw std::invalid_argument("profiles: delta must be >= 0");
    if (!(R > 0.0)) throw std::invalid_argument("profiles: R must be > 0");
}

double kummer_m(double a, double b, double z) {
    if (b <= 0.0 && near_int(b)) throw std::domain_error("kummer_m: b at a pole");
    if (z == 0.0) return 1.0;
    double asym;
    if (z < -40.0 && kummer_m_negative_asymptotic(a, b, -z, &asym)) return asym;
    gsl_sf_result r;
    int st = gsl_sf_hyperg_1F1_e(a, b, z, &r);
    if (st == GSL_EOVRFLW || !std::isfinite(r.val)) throw std::overflow_error("kummer_m: overflow");
    if (st != GSL_SUCCESS)
        throw std::runtime_error(std::string("kummer_m: ") + gsl_strerror(st));
    return r.val;
}

double kummer_m_prime(double a, double b, double z) { return a / b * kummer_m(a + 1, b + 1, z); }

double tricomi_u(double a, double b, double z) {
    if (a == 0.0) return 1.0;
    if (z == 0.0) {
        if (b >= 1.0) throw std::domain_error("tricomi_u: U(a,b,0) is infinite for b >= 1");
        return gamma_fn(1.0 - b) * rgamma(a - b + 1.0);
    }
    if (z > 0.0) {
        gsl_sf_result r;
        int st = gsl_sf_hyperg_U_e(a, b, z, &r);
        if (st == GSL_EOVRFLW || !std::isfinite(r.val))
            throw std::overflow_error("tricomi_u: overflow");
        if (st != GSL_SUCCESS)
            throw std::runtime_error(std::string("tricomi_u: ") + gsl_strerror(st));
        return r.val;
    }
    // z < 0: U = G(1-b)/G(a-b+1) M(a,b,z) + G(b-1)/G(a) z^{1-b} M(a-b+1,2-b,z).
    // Both Gamma(1-b) and Gamma(b-1) blow up at integer b, where the two terms merge
    // into a logarithmic solution; that case is not needed here and is rejected.
    if (near_int(b)) throw std::domain_error("tricomi_u: z < 0 with integer b is not supported");
    // z^{1-b} is taken as cbrt(z)^{3(1-b)}, the branch analytic in cbrt(z). This keeps
    // Lambda(zeta) = U(a, 2/3, -zeta^3) smooth through zeta = 0.
    const double p = 3.0 * (1.0 - b);
    if (!near_int(p, 1e-10))
        throw std::domain_error("tricomi_u: z < 0 needs 3(1-b) integer for a real branch");
    const double zpow = std::pow(std::cbrt(z), std::round(p));
    const double t1 = gamma_fn(1.0 - b) * rgamma(a - b + 1.0) * kummer_m(a, b, z);
    const double t2 = gamma_fn(b - 1.0) * rgamma(a) * zpow * kummer_m(a - b + 1.0, 2.0 - b, z);
    return t1 + t2;
}

double tricomi_u_prime(double a, double b, double z) { return -a * tricomi_u(a + 1, b + 1, z); }

Derivs1 lambda_profile_derivs(double zeta, const HolderParams& p) {
    const double a = -p.alpha;
    const double b = kB;
    const double z = -zeta * zeta * zeta;
    Derivs1 d;
    if (std::abs(zeta) >= 0.5) {
        d.v = tricomi_u(a, b, z);
        const double u1 = tricomi_u(a + 1, b + 1, z);
        const double u2 = tricomi_u(a + 2, b + 2, z);
        const double up = -a * u1;
        const double upp = a * (a + 1) * u2;
        d.d1 = -3.0 * zeta * zeta * up;
        d.d2 = 9.0 * std::pow(zeta, 4) * upp - 6.0 * zeta * up;
        return d;
    }
    // Near zeta = 0 expand the connection formula in zeta, using cbrt(z) = -zeta,
    // so the zeta^{-2} and zeta^{-5} branch factors cancel analytically.
    const double c = a - b + 1.0;
    const double g_b = gamma_fn(b);
    d.v = gamma_fn(1.0 - b) * rgamma(c) * kummer_m(a, b, z) +
          gamma_fn(b - 1.0) * rgamma(a) * (-zeta) * kummer_m(c, 2.0 - b, z);
    // Lambda' = 3a zeta^2 U(a+1, b+1, z)
    d.d1 = 3.0 * a * (zeta * zeta * gamma_fn(-b) * rgamma(c) * kummer_m(a + 1, b + 1, z) +
                      g_b * rgamma(a + 1) * kummer_m(c, 1.0 - b, z));
    // Lambda'' = 9 zeta^4 U'' - 6 zeta U'; the 1/zeta pieces combine into a difference of
    // two M's with the same c, summed termwise.
    const double zeta4 = std::pow(zeta, 4);
    const double regular = 9.0 * zeta4 * a * (a + 1) * gamma_fn(-1.0 - b) * rgamma(c) *
                               kummer_m(a + 2, b + 2, z) +
                           6.0 * a * zeta * gamma_fn(-b) * rgamma(c) * kummer_m(a + 1, b + 1, z);
    double singular = 0.0;
    if (zeta != 0.0)
        singular = 6.0 * a * g_b * rgamma(a + 1) *
                   kummer_difference_series(c, 1.0 - b, -b, z) / zeta;
    d.d2 = regular + singular;
    return d;
}

double lambda_profile(double zeta, const HolderParams& p) {
    return lambda_profile_derivs(zeta, p).v;
}

double lambda_ode_residual(double zeta, const HolderParams& p, double* scale) {
    Derivs1 d = lambda_profile_derivs(zeta, p);
    if (scale) *scale = 1.0 + std::abs(d.v) + std::abs(d.d1) + std::abs(d.d2);
    return d.d2 + 3.0 * zeta * zeta * d.d1 - 9.0 * p.alpha * zeta * d.v;
}

Derivs2 fstar0_derivs(double x2, double theta, const HolderParams& p) {
    if (!(x2 > 0.0)) throw std::domain_error("fstar0: x2 must be > 0");
    const double a = p.alpha_sing;
    const double c = -a;
    const double b = kB;
    const double z = -theta * theta * theta / (9.0 * x2);
    const double m = kummer_m(c, b, z);
    const double m1 = c / b * kummer_m(c + 1, b + 1, z);
    const double m2 = c * (c + 1) / (b * (b + 1)) * kummer_m(c + 2, b + 2, z);
    const double xa = std::pow(x2, a);
    const double z_x = -z / x2;
    const double z_t = -theta * theta / (3.0 * x2);
    const double z_tt = -2.0 * theta / (3.0 * x2);
    Derivs2 d;
    d.v = xa * m;
    d.d_a = a * xa / x2 * m + xa * m1 * z_x;
    d.d_b = xa * m1 * z_t;
    d.d_bb = xa * (m2 * z_t * z_t + m1 * z_tt);
    return d;
}

double fstar0(double x2, double theta, const HolderParams& p) {
    if (!(x2 > 0.0)) throw std::domain_error("fstar0: x2 must be > 0");
    return std::pow(x2, p.alpha_sing) * kummer_m(-p.alpha_sing, kB, -theta * theta * theta / (9.0 * x2));
}

double fstar0_residual(double x2, double theta, const HolderParams& p, double* scale) {
    Derivs2 d = fstar0_derivs(x2, theta, p);
    if (scale) *scale = std::abs(theta * d.d_a) + std::abs(d.d_bb) + std::abs(d.v);
    return theta * d.d_a - d.d_bb;
}

namespace {

// y^alpha G(s) with s = zeta/(9y)^{1/3}, given G and its two derivatives.
Derivs2 power_profile(double y, double zeta, double alpha, const Derivs1& g) {
    const double c = std::cbrt(9.0 * y);
    const double s = zeta / c;
    const double ya = std::pow(y, alpha);
    Derivs2 d;
    d.v = ya * g.v;
    d.d_a = ya / y * (alpha * g.v - s / 3.0 * g.d1);
    d.d_b = ya * g.d1 / c;
    d.d_bb = ya * g.d2 / (c * c);
    return d;
}

}  // namespace

Derivs2 f0_selfsim_derivs(double y, double zeta, const HolderParams& p) {
    if (!(y > 0.0)) throw std::domain_error("f0_selfsim: y must be > 0");
    const double s = zeta / std::cbrt(9.0 * y);
    return power_profile(y, zeta, p.alpha, lambda_profile_derivs(s, p));
}

double f0_selfsim(double y, double zeta, const HolderParams& p) {
    return f0_selfsim_derivs(y, zeta, p).v;
}

SelfSimilarProfile::SelfSimilarProfile(const HolderParams& p, const Options& o) : p_(p), o_(o) {
    p_.validate();
    if (!o_.correction) return;
    const double S = o_.s_max;
    const double h = o_.h;
    const int n = static_cast<int>(std::llround(2.0 * S / h));
    phi_v_.resize(n + 1);
    phi_d_.resize(n + 1);
    Derivs1 start = lambda_profile_derivs(-S, p_);
    double u = start.v, v = start.d1;
    const double al = p_.alpha;
    auto acc = [&](double s, double uu, double vv) {
        return -3.0 * s * s * vv + 9.0 * al * s * uu - 2.0 * beta(s) * uu;
    };
    phi_v_[0] = u;
    phi_d_[0] = v;
    for (int i = 0; i < n; ++i) {
        const double s = -S + i * h;
        const double k1u = v, k1v = acc(s, u, v);
        const double k2u = v + 0.5 * h * k1v, k2v = acc(s + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
        const double k3u = v + 0.5 * h * k2v, k3v = acc(s + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
        const double k4u = v + h * k3v, k4v = acc(s + h, u + h * k3u, v + h * k3v);
        u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
        v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
        phi_v_[i + 1] = u;
        phi_d_[i + 1] = v;
    }
    ratio_lo_ = 1.0;
    ratio_hi_ = phi_v_[n] / lambda_profile(S, p_);
}

double SelfSimilarProfile::beta(double s) const {
    const double as = std::abs(s);
    return o_.gamma * 1.5 * p_.alpha * std::pow(9.0 * o_.r0 / (1.0 + 9.0 * as * as * as), 2.0 / 3.0);
}

Derivs1 SelfSimilarProfile::phi(double s) const {
    const double S = o_.s_max;
    if (s <= -S || s >= S) {
        Derivs1 l = lambda_profile_derivs(s, p_);
        const double r = s < 0 ? ratio_lo_ : ratio_hi_;
        return {l.v * r, l.d1 * r, l.d2 * r};
    }
    const double h = o_.h;
    const double x = (s + S) / h;
    int i = static_cast<int>(x);
    if (i >= static_cast<int>(phi_v_.size()) - 1) i = static_cast<int>(phi_v_.size()) - 2;
    const double u = x - i;
    // cubic Hermite on (value, slope)
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    const double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1;
    const double d01 = 6 * u - 6 * u * u, d11 = 3 * u * u - 2 * u;
    Derivs1 d;
    d.v = h00 * phi_v_[i] + h10 * h * phi_d_[i] + h01 * phi_v_[i + 1] + h11 * h * phi_d_[i + 1];
    d.d1 = (d00 * phi_v_[i] + d01 * phi_v_[i + 1]) / h + d10 * phi_d_[i] + d11 * phi_d_[i + 1];
    d.d2 = -3.0 * s * s * d.d1 + 9.0 * p_.alpha * s * d.v - 2.0 * beta(s) * d.v;
    return d;
}

Derivs2 SelfSimilarProfile::z_derivs(double y, double zeta) const {
    if (!(y > 0.0)) throw std::domain_error("hat_f0: y must be > 0");
    const double s = zeta / std::cbrt(9.0 * y);
    if (!o_.correction) return power_profile(y, zeta, p_.alpha, lambda_profile_derivs(s, p_));
    return power_profile(y, zeta, p_.alpha, phi(s));
}

bool SelfSimilarProfile::in_region(double t, double x2, double theta) const {
    return std::abs(theta * theta * theta) + x2 <= o_.r0 * std::pow(t, 1.5);
}

SelfSimilarProfile::Value SelfSimilarProfile::evaluate(double t, double x2, double theta) const {
    if (!(t > 0.0)) throw std::domain_error("hat_f0: t must be > 0");
    Value v;
    v.in_region = in_region(t, x2, theta);
    v.value = z_derivs(x2 / std::pow(t, 1.5), theta / std::sqrt(t)).v;
    return v;
}

double SelfSimilarProfile::residual(double t, double x2, double theta, double* scale) const {
    const double t32 = std::pow(t, 1.5);
    Derivs2 z = z_derivs(x2 / t32, theta / std::sqrt(t));
    const double a = -1.5 * x2 / (t32 * t) * z.d_a;
    const double b = -0.5 * theta / t32 * z.d_b;
    const double c = std::sin(theta) / t32 * z.d_a;
    const double d = -z.d_bb / t;
    if (scale) *scale = std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d) + std::abs(z.v) / t;
    return a + b + c + d;
}

double SelfSimilarProfile::correction_ratio(double y, double zeta) const {
    if (!o_.correction) return 0.0;
    const double s = zeta / std::cbrt(9.0 * y);
    return phi(s).v / lambda_profile(s, p_) - 1.0;
}

SelfSimilarProfile::Value hat_f0(double t, double x2, double theta, const HolderParams& p,
                                 bool correction) {
    SelfSimilarProfile::Options o;
    o.correction = correction;
    return SelfSimilarProfile(p, o).evaluate(t, x2, theta);
}

double stationary_supersol_F(double x2, double theta, const SupersolutionParams& s) {
    s.validate();
    const double l = s.lambda;
    return std::exp(-l * x2) * (1.0 - l * std::sin(theta) - l * l / 8.0 * std::cos(2.0 * theta));
}

double stationary_supersol_residual(double x2, double theta, const SupersolutionParams& s) {
    s.validate();
    const double l = s.lambda;
    return std::exp(-l * x2) *
           (-l * l / 2.0 - l * l * l / 8.0 * std::sin(theta) * std::cos(2.0 * theta));
}

namespace {

void check_ball(double x2, double theta, const SupersolutionParams& s, const PhasePoint& c) {
    const double dx = x2 - c.x2, dth = theta - c.theta;
    if (dx * dx + dth * dth > 4.0 * s.R * s.R * (1.0 + 1e-12))
        throw std::domain_error("parabolic_subsol_V: point outside the ball of radius 2R");
}

}  // namespace

double parabolic_subsol_V(double t, double x2, double theta, const SupersolutionParams& s,
                          const PhasePoint& center) {
    check_ball(x2, theta, s, center);
    const double sig = s.sigma();
    const double k = std::pow(sig, 0.25);
    const double X = x2 + t * std::sin(theta);
    const double V = 0.5 * std::cos(k * (theta - center.theta)) * std::cos(k * (X - center.x2)) + 0.5;
    return std::exp(-sig * t) * V;
}

double parabolic_subsol_residual(double t, double x2, double theta, const SupersolutionParams& s,
                                 const PhasePoint& center) {
    check_ball(x2, theta, s, center);
    const double sig = s.sigma();
    const double k = std::pow(sig, 0.25);
    const double X = x2 + t * std::sin(theta);
    const double ca = std::cos(k * (theta - center.theta)), sa = std::sin(k * (theta - center.theta));
    const double cb = std::cos(k * (X - center.x2)), sb = std::sin(k * (X - center.x2));
    const double V = 0.5 * ca * cb + 0.5;
    const double Vx = -0.5 * k * ca * sb;
    const double Vxx = -0.5 * k * k * ca * cb;
    const double Vth = -0.5 * k * sa * cb;
    const double Vthth = -0.5 * k * k * ca * cb;
    const double Vxth = 0.5 * k * k * sa * sb;
    (void)Vth;
    const double c = std::cos(theta), sn = std::sin(theta);
    // d_theta^2 of V(x2 + t sin th, th); the transport parts of d_t and -sin th d_x2 cancel
    const double lap = Vthth + 2.0 * t * c * Vxth + t * t * c * c * Vxx - t * sn * Vx;
    return std::exp(-sig * t) * (-sig * V - lap);
}

double subsol_t_star(const SupersolutionParams& s, const PhasePoint& center, double tol,
                     int n_sample, double t_step, double t_cap) {
    double t_good = 0.0;
    for (double t = 0.0; t <= t_cap + 1e-15; t += t_step) {
        double worst = -1e300;
        for (int i = 0; i < n_sample; ++i) {
            for (int j = 0; j < n_sample; ++j) {
                const double u = -1.0 + 2.0 * i / (n_sample - 1);
                const double v = -1.0 + 2.0 * j / (n_sample - 1);
                if (u * u + v * v > 1.0) continue;
                const double x2 = center.x2 + 2.0 * s.R * u;
                const double th = center.theta + 2.0 * s.R * v;
                const double scale = std::exp(-s.sigma() * t) * s.sigma();
                worst = std::max(worst, parabolic_subsol_residual(t, x2, th, s, center) / scale);
            }
        }
        if (worst > tol) break;
        t_good = t;
    }
    return t_good;
}

}  // namespace polykin
