#include "polykin/chain_mc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <new>
#include <stdexcept>
#include <thread>

namespace polykin {

namespace {

constexpr int kTable = 4096;
constexpr int kFine = 1 << 16;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

void ChainParams::validate() const {
    if (!(epsilon > 0.0 && epsilon <= 0.1)) throw std::invalid_argument("chain: epsilon must lie in (0, 0.1]");
    if (n_steps < 0) throw std::invalid_argument("chain: n_steps must be >= 0");
    if (!(x0.x2 >= 0.0)) throw std::invalid_argument("chain: x0.x2 must be >= 0");
    if (!std::isfinite(x0.x1) || !std::isfinite(x0.theta)) throw std::invalid_argument("chain: x0 must be finite");
}

long ChainParams::steps_for_length(double length, double epsilon) {
    if (!(length >= 0.0 && epsilon > 0.0)) throw std::invalid_argument("chain: bad length or epsilon");
    return std::lround(length / epsilon);
}

GibbsSampler::GibbsSampler(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("gibbs: epsilon must be > 0");
    // beyond phi_max the density is below e^-40 of its peak
    const double c = 1.0 - 40.0 * epsilon;
    const double phi_max = c <= -1.0 ? kPi : std::acos(c);
    const double h = phi_max / kFine;
    std::vector<double> cdf(kFine + 1, 0.0);
    auto w = [&](double p) { return std::exp((std::cos(p) - 1.0) / epsilon); };
    double m2 = 0.0, prev = w(0.0);
    for (int i = 1; i <= kFine; ++i) {
        const double p = i * h, cur = w(p), pm = p - 0.5 * h;
        cdf[i] = cdf[i - 1] + 0.5 * h * (prev + cur);
        m2 += h * pm * pm * w(pm);
        prev = cur;
    }
    const double total = cdf[kFine];
    variance_ = m2 / total;
    inverse_.assign(kTable, 0.0);
    int j = 0;
    // probabilities 1 - (1 - r)^2 on a uniform r grid, finer toward the tail
    for (int i = 1; i < kTable - 1; ++i) {
        const double r = 1.0 - static_cast<double>(i) / (kTable - 1);
        const double target = total * (1.0 - r * r);
        while (cdf[j + 1] < target) ++j;
        const double s = (target - cdf[j]) / (cdf[j + 1] - cdf[j]);
        inverse_[i] = (j + s) * h;
    }
    inverse_[kTable - 1] = phi_max;
}

double GibbsSampler::sample(double u) const {
    const bool neg = u < 0.5;
    const double v = neg ? 1.0 - 2.0 * u : 2.0 * u - 1.0;
    const double x = (1.0 - std::sqrt(1.0 - v)) * (kTable - 1);
    const int i = std::min(static_cast<int>(x), kTable - 2);
    const double s = x - i;
    const double mag = inverse_[i] + s * (inverse_[i + 1] - inverse_[i]);
    return neg ? -mag : mag;
}

ChainRng chain_rng(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{splitmix64(master_seed), splitmix64(master_seed ^ splitmix64(index + 1))};
    return ChainRng(seq);
}

double gibbs_angle_increment(double epsilon, ChainRng& rng) {
    return wrap_angle(GibbsSampler(epsilon)(rng));
}

double boundary_clamp(double x2, double epsilon, double current, double proposal, TrapSide* side) {
    const double s = std::clamp(x2 / epsilon, 0.0, 1.0);
    const double a = -std::asin(s);        // grazing, moving right
    const double b = -kPi + std::asin(s);  // grazing, moving left
    double ca = std::cos(a - current), cb = std::cos(b - current);
    if (ca == cb) {
        ca = std::cos(a - proposal);
        cb = std::cos(b - proposal);
    }
    const bool plus = ca >= cb;
    if (side) *side = plus ? TrapSide::Plus : TrapSide::Minus;
    return plus ? a : b;
}

ChainState chain_step_with(const ChainState& s, double epsilon, double increment) {
    ChainState n = s;
    double th = s.theta + increment;
    // |increment| <= pi and theta in [-pi, pi), so one shift suffices
    if (th >= kPi) th -= 2.0 * kPi;
    else if (th < -kPi) th += 2.0 * kPi;
    double sn = std::sin(th), cs = std::cos(th);
    if (s.x2 + epsilon * sn < 0.0) {
        TrapSide side;
        th = boundary_clamp(s.x2, epsilon, s.theta, th, &side);
        if (n.trapped == TrapSide::None) n.trapped = side;
        sn = std::sin(th);
        cs = std::cos(th);
    }
    n.theta = th;
    n.x1 += epsilon * cs;
    n.x2 = std::max(0.0, s.x2 + epsilon * sn);
    ++n.steps;
    if (n.trapped != TrapSide::None) n.max_dev_after_trap = std::max(n.max_dev_after_trap, n.x2);
    return n;
}

ChainState chain_step(const ChainState& s, const GibbsSampler& sampler, ChainRng& rng) {
    return chain_step_with(s, sampler.epsilon(), sampler(rng));
}

ChainState chain_step(const ChainState& s, double epsilon, ChainRng& rng) {
    return chain_step(s, GibbsSampler(epsilon), rng);
}

ChainEnsemble simulate_ensemble(const ChainParams& p, long n_chains, int threads) {
    if (n_chains < 1) throw std::invalid_argument("simulate_ensemble: n_chains must be >= 1");
    ChainState s0;
    s0.x1 = p.x0.x1;
    s0.x2 = p.x0.x2;
    s0.theta = wrap_angle(p.x0.theta);
    std::vector<ChainState> init;
    try {
        init.assign(static_cast<std::size_t>(n_chains), s0);
    } catch (const std::bad_alloc&) {
        throw std::runtime_error("simulate_ensemble: cannot allocate " + std::to_string(n_chains) + " chains");
    }
    return simulate_ensemble(p, init, threads);
}

ChainEnsemble simulate_ensemble(const ChainParams& p, const std::vector<ChainState>& initial, int threads) {
    p.validate();
    if (initial.empty()) throw std::invalid_argument("simulate_ensemble: no chains");
    for (const auto& c : initial)
        if (!(c.x2 >= 0.0)) throw std::invalid_argument("simulate_ensemble: initial x2 must be >= 0");
    ChainEnsemble ens;
    ens.params = p;
    ens.master_seed = p.seed;
    ens.chains = initial;
    const GibbsSampler sampler(p.epsilon);
    const std::size_t n = ens.chains.size();
    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            ChainRng rng = chain_rng(p.seed, i);
            ChainState s = ens.chains[i];
            for (long k = 0; k < p.n_steps; ++k) s = chain_step(s, sampler, rng);
            ens.chains[i] = s;
        }
    };
    const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (t == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < t; ++w) pool.emplace_back(work, n * w / t, n * (w + 1) / t);
        for (auto& th : pool) th.join();
    }
    return ens;
}

TrapBands TrapBands::for_epsilon(double epsilon, double c_x2, double c_theta) {
    return {c_x2 * std::sqrt(epsilon), c_theta * std::pow(epsilon, 0.25)};
}

EmpiricalFields empirical_fields(const ChainEnsemble& ens, const GridSpec& g, const TrapBands& bands) {
    if (ens.chains.empty()) throw std::invalid_argument("empirical_fields: empty ensemble");
    if (!bands.by_contact && !(bands.x2_band > 0.0 && bands.theta_band > 0.0))
        throw std::invalid_argument("empirical_fields: bands must be > 0");
    g.validate();
    EmpiricalFields e;
    e.f = PhaseField(g);
    e.boundary = BoundaryDensityPair(g);
    const double w = 1.0 / static_cast<double>(ens.chains.size());
    auto cell_x1 = [&](double x1) {
        int i = static_cast<int>(std::floor((x1 - g.x1_min) / g.dx1()));
        if (g.periodic_x1) i = ((i % g.n_x1) + g.n_x1) % g.n_x1;
        return std::clamp(i, 0, g.n_x1 - 1);
    };
    for (const auto& c : ens.chains) {
        if (c.x2 > g.x2_max) {
            e.escaped += w;
            continue;
        }
        const int i1 = cell_x1(c.x1);
        if (bands.by_contact) {
            if (c.trapped == TrapSide::Plus) {
                e.boundary.rho_plus[i1] += w / g.dx1();
                e.plus_mass += w;
                continue;
            }
            if (c.trapped == TrapSide::Minus) {
                e.boundary.rho_minus[i1] += w / g.dx1();
                e.minus_mass += w;
                continue;
            }
        } else if (c.x2 < bands.x2_band) {
            if (std::abs(c.theta) < bands.theta_band) {
                e.boundary.rho_plus[i1] += w / g.dx1();
                e.plus_mass += w;
                continue;
            }
            if (std::abs(wrap_angle(c.theta + kPi)) < bands.theta_band) {
                e.boundary.rho_minus[i1] += w / g.dx1();
                e.minus_mass += w;
                continue;
            }
        }
        const int j = std::min(static_cast<int>(std::lround(c.x2 / g.dx2())), g.n_x2 - 1);
        const int k = static_cast<int>(std::lround((c.theta + kPi) / g.dtheta())) % g.n_theta;
        e.f.at(i1, j, k) += w / g.cell_volume();
        e.interior_mass += w;
    }
    return e;
}

double estimate_diffusion(double epsilon, long n_samples, std::uint64_t seed) {
    if (!(epsilon > 0.0 && epsilon <= 0.1)) throw std::invalid_argument("estimate_diffusion: epsilon must lie in (0, 0.1]");
    if (n_samples < 2) throw std::invalid_argument("estimate_diffusion: need at least 2 samples");
    const GibbsSampler sampler(epsilon);
    ChainRng rng = chain_rng(seed, 0);
    double s1 = 0.0, s2 = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        const double d = sampler(rng);
        s1 += d;
        s2 += d * d;
    }
    const double n = static_cast<double>(n_samples);
    const double var = (s2 - s1 * s1 / n) / (n - 1.0);
    return var / (2.0 * epsilon);
}

std::vector<double> post_trap_deviations(const ChainEnsemble& ens) {
    std::vector<double> out;
    for (const auto& c : ens.chains)
        if (c.trapped != TrapSide::None) out.push_back(c.max_dev_after_trap);
    return out;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 matched points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: values must be > 0");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_ensemble_csv(const ChainEnsemble& ens, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "chain_id,x1,x2,theta,trapped_flag\n";
    for (std::size_t i = 0; i < ens.chains.size(); ++i) {
        const auto& c = ens.chains[i];
        out << i << ',' << c.x1 << ',' << c.x2 << ',' << c.theta << ',' << static_cast<int>(c.trapped) << '\n';
    }
}

}  // namespace polykin
