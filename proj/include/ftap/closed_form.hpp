#pragma once

#include "ftap/market.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace ftap {

/// Inputs of the continuous-time call pricers. The physical drift is not an
/// input: it does not enter any risk-neutral price.
struct ClosedFormParams {
    double spot = 0.0;        ///< S_t > 0
    double strike = 0.0;      ///< K > 0
    double rate = 0.0;        ///< r, continuously compounded per year
    double volatility = 0.0;  ///< sigma > 0, per sqrt(year)
    double maturity = 0.0;    ///< tau = T - t in years

    /// Throws InputError on domain violations. `allow_zero_vol` admits
    /// sigma = 0; tau = 0 is always allowed (the price is the payoff).
    void validate(bool allow_zero_vol = false) const;
};

double normal_cdf(double x);
double normal_pdf(double x);

/// S Phi(d+) - K e^{-r tau} Phi(d-).
double bs_call(const ClosedFormParams& p);

struct PdeGrid {
    int space_steps = 2000;
    int time_steps = 8000;
    /// Upper edge of the space grid; raised to 4 max(S, K) e^{r tau} if smaller.
    double x_max = 0.0;
};

struct PdeSolution {
    std::vector<double> x;  ///< space nodes, spot lies exactly on one of them
    std::vector<double> t;  ///< calendar times from t to T
    /// surface[k][i] = f(t[k], x[i]); surface.back() is the payoff.
    std::vector<std::vector<double>> surface;
    std::size_t spot_index = 0;

    double price() const { return surface.front()[spot_index]; }
    /// Linear interpolation of f(t_0, .) at `s`.
    double value_at(double s) const;
};

/// Implicit Euler in time, central differences in space, Dirichlet edges
/// f(t, 0) = 0 and f(t, x_max) = x_max - K e^{-r (T - t)}.
PdeSolution bs_pde_solve(const ClosedFormParams& p, const PdeGrid& grid = {});

/// Distribution Q of the terminal price ratio z = S_T / S_t.
struct LognormalRatio {
    double log_variance;  ///< sigma^2 tau; the location follows from the mean constraint
};
struct GaussianRatio {
    double mean;
    double stddev;
};
struct DiscreteRatio {
    std::vector<double> points;
    std::vector<double> weights;
};
/// Piecewise-linear density through (z_i, f_i).
struct TabulatedRatio {
    std::vector<double> z;
    std::vector<double> density;
};
using DistributionSpec = std::variant<LognormalRatio, GaussianRatio, DiscreteRatio, TabulatedRatio>;

/// E_Q(z) of the distribution (rate and maturity only matter for the lognormal).
double ratio_mean(const DistributionSpec& dist, const ClosedFormParams& p);

/// e^{-r tau} integral over {z S >= K} of (z S - K) dQ(z). Rejects specs whose
/// mean misses e^{r tau} by more than 1e-6.
double samuelson_merton_price(const ClosedFormParams& p, const DistributionSpec& dist);

/// Forward (undiscounted) Bachelier call with Q_T = N(0, sigma_abs^2 T):
/// (S0 - K) Phi(m) + sigma_abs sqrt(T) phi(m), m = (S0 - K) / (sigma_abs sqrt(T)).
double bachelier_call(double spot, double strike, double sigma_abs, double maturity);

/// Quadrature of integral_{z >= K - S0} (z + S0 - K) dQ_T(z).
double bachelier_call_quadrature(double spot, double strike, double sigma_abs, double maturity);

struct BridgeResult {
    double price = 0.0;
    double up = 0.0;
    double down = 0.0;
    double growth = 0.0;             ///< numeraire growth per step
    double risk_neutral_up = 0.0;    ///< (growth - down) / (up - down)
    std::optional<ScenarioTree> tree;  ///< built when steps <= kBridgeTreeLimit
};

inline constexpr int kBridgeTreeLimit = 12;

/// N-step geometric binomial market, u = e^{sigma sqrt(tau/N)}, d = 1/u,
/// numeraire growth e^{r tau / N}. Up to kBridgeTreeLimit steps the scenario
/// tree is built and the call priced through price() under its unique EMM;
/// beyond that the same conditional-expectation recursion runs on the
/// recombining lattice. `physical_up` sets the edge probabilities of the
/// tree and has no effect on the price.
BridgeResult binomial_bridge(const ClosedFormParams& p, int steps, double physical_up = 0.5);

/// Lattice evaluation of the bridge price (any number of steps).
double binomial_lattice_price(const ClosedFormParams& p, int steps);

struct MonteCarloResult {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::uint64_t paths = 0;
};

/// Exact lognormal terminal sampling under dS = r S dt + sigma S dW*.
/// Paths are split over `substreams` independently seeded generators; the
/// result depends only on (seed, n_paths, substreams). Strike 0 is allowed.
MonteCarloResult feynman_kac_mc(const ClosedFormParams& p, std::uint64_t n_paths, std::uint64_t seed,
                                int substreams = 8, int threads = 1);

/// SplitMix64 step, used to derive independent seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ftap
