#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "polykin/core.hpp"

namespace polykin {

struct ChainParams {
    double epsilon = 1e-3;  // monomer length
    long n_steps = 1000;    // chain length is n_steps * epsilon
    PhasePoint x0{0.0, 1.0, -kPi / 2};
    std::uint64_t seed = 1;

    void validate() const;
    static long steps_for_length(double length, double epsilon);
};

enum class TrapSide : std::int8_t { None = 0, Plus = 1, Minus = -1 };

struct ChainState {
    double x1 = 0.0;
    double x2 = 0.0;
    double theta = 0.0;
    TrapSide trapped = TrapSide::None;  // side chosen the first time the wall rule fired
    long steps = 0;
    double max_dev_after_trap = 0.0;    // largest x2 seen after the first trap
};

// Samples angle increments with density proportional to exp((cos d - 1) / eps) on [-pi, pi).
// Inverse CDF of |d| on 4096 equally spaced probabilities, linear in between; the sign comes
// from the same uniform, so u and 1 - u give opposite increments.
class GibbsSampler {
public:
    explicit GibbsSampler(double epsilon);

    double epsilon() const { return epsilon_; }
    double sample(double u) const;
    template <class Rng>
    double operator()(Rng& rng) const {
        return sample(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    }
    // variance of the tabulated distribution, by quadrature of the density
    double variance() const { return variance_; }

private:
    double epsilon_;
    double variance_ = 0.0;
    std::vector<double> inverse_;  // |d| at probabilities i / (n - 1)
};

using ChainRng = std::mt19937_64;

// Seeds chain `index` from the master seed by a splitmix64 hash.
ChainRng chain_rng(std::uint64_t master_seed, std::uint64_t index);

double gibbs_angle_increment(double epsilon, ChainRng& rng);

// The wall rule: the admissible direction (x2 + eps sin th >= 0) closest to `current`,
// ties broken toward `proposal`.
double boundary_clamp(double x2, double epsilon, double current, double proposal, TrapSide* side = nullptr);

// One monomer with increment d already drawn.
ChainState chain_step_with(const ChainState& s, double epsilon, double increment);
ChainState chain_step(const ChainState& s, const GibbsSampler& sampler, ChainRng& rng);
ChainState chain_step(const ChainState& s, double epsilon, ChainRng& rng);

struct ChainEnsemble {
    std::vector<ChainState> chains;
    ChainParams params;
    std::uint64_t master_seed = 0;
};

// Runs every chain n_steps from x0 (or from `initial` when given). Chains are split
// over `threads` workers; results do not depend on the thread count.
ChainEnsemble simulate_ensemble(const ChainParams& p, long n_chains, int threads = 1);
ChainEnsemble simulate_ensemble(const ChainParams& p, const std::vector<ChainState>& initial,
                                int threads = 1);

struct TrapBands {
    double x2_band = 0.0;
    double theta_band = 0.0;
    // When set, a chain counts as trapped once it has touched the wall, on the side the wall
    // rule picked, wherever it is now. This matches absorption at first contact in the PDE.
    bool by_contact = false;
    static TrapBands for_epsilon(double epsilon, double c_x2 = 2.0, double c_theta = 2.0);
};

// Chains near the wall and aligned with it (or that touched it, with by_contact) go to
// rho+/rho- at their x1 cell; all others
// to the nearest phase-space node. x1 is wrapped on periodic grids and clamped otherwise;
// chains above x2_max are returned as escaped. Total mass is 1.
struct EmpiricalFields {
    PhaseField f;
    BoundaryDensityPair boundary;
    double escaped = 0.0;
    double interior_mass = 0.0;
    double plus_mass = 0.0;
    double minus_mass = 0.0;
};

EmpiricalFields empirical_fields(const ChainEnsemble& ens, const GridSpec& g, const TrapBands& bands);

// Var[d] / (2 eps) from n_samples draws.
double estimate_diffusion(double epsilon, long n_samples, std::uint64_t seed = 7);

// Maximum height reached after the first wall contact, for chains that touched the wall.
std::vector<double> post_trap_deviations(const ChainEnsemble& ens);

// Least-squares slope of log y against log x.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// CSV with columns chain_id,x1,x2,theta,trapped_flag
void write_ensemble_csv(const ChainEnsemble& ens, const std::string& path);

}  // namespace polykin
