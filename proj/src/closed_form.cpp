#include "ftap/closed_form.hpp"

#include "ftap/arbitrage.hpp"
#include "ftap/completeness.hpp"
#include "ftap/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace ftap {

namespace {

constexpr double kMeanTol = 1e-6;
constexpr double kTail = 40.0;  // standard deviations kept by the quadratures

template <class F>
double integrate(F f, double a, double b) {
    if (!(b > a)) {
        return 0.0;
    }
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-15);
}

}  // namespace

void ClosedFormParams::validate(bool allow_zero_vol) const {
    auto bad = [](const char* what, double v) {
        throw InputError(fmt::format("{} = {} is outside its domain", what, v));
    };
    if (!(spot > 0.0) || !std::isfinite(spot)) bad("spot", spot);
    if (!(strike > 0.0) || !std::isfinite(strike)) bad("strike", strike);
    if (!std::isfinite(rate)) bad("rate", rate);
    if (!std::isfinite(volatility) || volatility < 0.0 || (!allow_zero_vol && volatility == 0.0)) {
        bad("volatility", volatility);
    }
    if (!(maturity >= 0.0) || !std::isfinite(maturity)) bad("maturity", maturity);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double bs_call(const ClosedFormParams& p) {
    p.validate();
    if (p.maturity == 0.0) {
        return std::max(p.spot - p.strike, 0.0);
    }
    const double sd = p.volatility * std::sqrt(p.maturity);
    const double d_plus = (std::log(p.spot / p.strike) + (p.rate + 0.5 * p.volatility * p.volatility) * p.maturity) / sd;
    const double d_minus = d_plus - sd;
    return p.spot * normal_cdf(d_plus) - p.strike * std::exp(-p.rate * p.maturity) * normal_cdf(d_minus);
}

double PdeSolution::value_at(double s) const {
    if (s <= x.front()) {
        return surface.front().front();
    }
    if (s >= x.back()) {
        return surface.front().back();
    }
    const double dx = x[1] - x[0];
    const auto i = static_cast<std::size_t>(std::floor(s / dx));
    const double w = (s - x[i]) / dx;
    return (1.0 - w) * surface.front()[i] + w * surface.front()[i + 1];
}

PdeSolution bs_pde_solve(const ClosedFormParams& p, const PdeGrid& grid) {
    p.validate(true);
    if (grid.space_steps < 10 || grid.time_steps < 1) {
        throw InputError(fmt::format("degenerate PDE grid {} x {}", grid.space_steps, grid.time_steps));
    }
    const int m = grid.space_steps;
    const int n = grid.time_steps;
    const double x_floor = 4.0 * std::max(p.spot, p.strike) * std::exp(std::max(p.rate, 0.0) * p.maturity);
    const double x_max = std::max(grid.x_max, x_floor);
    // Put the spot exactly on a node.
    const int spot_index = std::max(1, static_cast<int>(std::floor(m * p.spot / x_max)));
    const double dx = p.spot / spot_index;

    PdeSolution sol;
    sol.spot_index = static_cast<std::size_t>(spot_index);
    sol.x.resize(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) {
        sol.x[static_cast<std::size_t>(i)] = i * dx;
    }
    const double dt = p.maturity / n;
    sol.t.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        sol.t[static_cast<std::size_t>(k)] = k * dt;
    }
    sol.surface.assign(static_cast<std::size_t>(n) + 1, std::vector<double>(static_cast<std::size_t>(m) + 1));
    auto& last = sol.surface.back();
    for (int i = 0; i <= m; ++i) {
        last[static_cast<std::size_t>(i)] = std::max(sol.x[static_cast<std::size_t>(i)] - p.strike, 0.0);
    }
    if (n == 0 || p.maturity == 0.0) {
        return sol;
    }

    // Interior rows: -dt(a_i - b_i) f_{i-1} + (1 + dt(2 a_i + r)) f_i - dt(a_i + b_i) f_{i+1} = f^{next}_i
    // with a_i = sigma^2 i^2 / 2 and b_i = r i / 2.
    const double s2 = p.volatility * p.volatility;
    std::vector<double> lower(static_cast<std::size_t>(m) + 1), diag(lower.size()), upper(lower.size());
    for (int i = 1; i < m; ++i) {
        const double a = 0.5 * s2 * i * i;
        const double b = 0.5 * p.rate * i;
        lower[static_cast<std::size_t>(i)] = -dt * (a - b);
        diag[static_cast<std::size_t>(i)] = 1.0 + dt * (2.0 * a + p.rate);
        upper[static_cast<std::size_t>(i)] = -dt * (a + b);
    }
    std::vector<double> c_prime(lower.size()), d_prime(lower.size());
    for (int k = n - 1; k >= 0; --k) {
        const auto& next = sol.surface[static_cast<std::size_t>(k) + 1];
        auto& cur = sol.surface[static_cast<std::size_t>(k)];
        const double remaining = p.maturity - sol.t[static_cast<std::size_t>(k)];
        const double f_lo = 0.0;
        const double f_hi = sol.x.back() - p.strike * std::exp(-p.rate * remaining);
        // Thomas sweep on rows 1..m-1 with the boundary values folded into the rhs.
        for (int i = 1; i < m; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            double rhs = next[ui];
            if (i == 1) rhs -= lower[ui] * f_lo;
            if (i == m - 1) rhs -= upper[ui] * f_hi;
            const double denom = diag[ui] - (i > 1 ? lower[ui] * c_prime[ui - 1] : 0.0);
            c_prime[ui] = (i < m - 1 ? upper[ui] : 0.0) / denom;
            d_prime[ui] = (rhs - (i > 1 ? lower[ui] * d_prime[ui - 1] : 0.0)) / denom;
        }
        cur[0] = f_lo;
        cur[static_cast<std::size_t>(m)] = f_hi;
        cur[static_cast<std::size_t>(m) - 1] = d_prime[static_cast<std::size_t>(m) - 1];
        for (int i = m - 2; i >= 1; --i) {
            const auto ui = static_cast<std::size_t>(i);
            cur[ui] = d_prime[ui] - c_prime[ui] * cur[ui + 1];
        }
    }
    return sol;
}

double ratio_mean(const DistributionSpec& dist, const ClosedFormParams& p) {
    struct Visitor {
        const ClosedFormParams& p;
        double operator()(const LognormalRatio&) const { return std::exp(p.rate * p.maturity); }
        double operator()(const GaussianRatio& g) const { return g.mean; }
        double operator()(const DiscreteRatio& d) const {
            double m = 0.0;
            for (std::size_t i = 0; i < d.points.size(); ++i) {
                m += d.points[i] * d.weights[i];
            }
            return m;
        }
        double operator()(const TabulatedRatio& t) const {
            double m = 0.0;
            for (std::size_t i = 0; i + 1 < t.z.size(); ++i) {
                const double h = t.z[i + 1] - t.z[i];
                // exact for z * (linear density)
                m += h / 6.0 * (t.z[i] * (2.0 * t.density[i] + t.density[i + 1]) +
                                t.z[i + 1] * (t.density[i] + 2.0 * t.density[i + 1]));
            }
            return m;
        }
    };
    return std::visit(Visitor{p}, dist);
}

namespace {

void check_spec(const DistributionSpec& dist) {
    if (const auto* d = std::get_if<DiscreteRatio>(&dist)) {
        if (d->points.size() != d->weights.size() || d->points.empty()) {
            throw InputError("discrete ratio distribution needs matching, nonempty points and weights");
        }
        double mass = 0.0;
        for (double w : d->weights) {
            if (w < 0.0) throw InputError("negative weight in discrete ratio distribution");
            mass += w;
        }
        if (std::abs(mass - 1.0) > kMeanTol) throw InputError("discrete ratio distribution does not sum to 1");
    } else if (const auto* t = std::get_if<TabulatedRatio>(&dist)) {
        if (t->z.size() != t->density.size() || t->z.size() < 2) {
            throw InputError("tabulated density needs at least two matching grid points");
        }
        double mass = 0.0;
        for (std::size_t i = 0; i + 1 < t->z.size(); ++i) {
            if (!(t->z[i + 1] > t->z[i])) throw InputError("tabulated density grid must increase");
            mass += 0.5 * (t->z[i + 1] - t->z[i]) * (t->density[i] + t->density[i + 1]);
        }
        for (double f : t->density) {
            if (f < 0.0) throw InputError("negative tabulated density");
        }
        if (std::abs(mass - 1.0) > kMeanTol) throw InputError("tabulated density does not integrate to 1");
    } else if (const auto* g = std::get_if<GaussianRatio>(&dist)) {
        if (!(g->stddev >= 0.0)) throw InputError("gaussian ratio stddev must be >= 0");
    } else if (const auto* l = std::get_if<LognormalRatio>(&dist)) {
        if (!(l->log_variance >= 0.0)) throw InputError("lognormal log-variance must be >= 0");
    }
}

}  // namespace

double samuelson_merton_price(const ClosedFormParams& p, const DistributionSpec& dist) {
    p.validate(true);
    check_spec(dist);
    const double growth = std::exp(p.rate * p.maturity);
    const double mean = ratio_mean(dist, p);
    if (std::abs(mean - growth) > kMeanTol) {
        throw InputError(fmt::format("ratio distribution has mean {:.12g}, the no-arbitrage constraint needs {:.12g}",
                                     mean, growth));
    }
    const double s = p.spot;
    const double k = p.strike;
    const double z_low = k / s;  // in-the-money region {z S >= K}
    double integral = 0.0;

    if (const auto* ln = std::get_if<LognormalRatio>(&dist)) {
        if (ln->log_variance == 0.0) {
            integral = std::max(growth * s - k, 0.0);
        } else {
            const double sd = std::sqrt(ln->log_variance);
            const double mu = p.rate * p.maturity - 0.5 * ln->log_variance;
            const double u0 = (std::log(z_low) - mu) / sd;
            auto f = [&](double u) { return (s * std::exp(mu + sd * u) - k) * normal_pdf(u); };
            integral = integrate(f, std::max(u0, -kTail), kTail);
        }
    } else if (const auto* g = std::get_if<GaussianRatio>(&dist)) {
        if (g->stddev == 0.0) {
            integral = std::max(g->mean * s - k, 0.0);
        } else {
            const double u0 = (z_low - g->mean) / g->stddev;
            auto f = [&](double u) { return ((g->mean + g->stddev * u) * s - k) * normal_pdf(u); };
            integral = integrate(f, std::max(u0, -kTail), kTail);
        }
    } else if (const auto* d = std::get_if<DiscreteRatio>(&dist)) {
        for (std::size_t i = 0; i < d->points.size(); ++i) {
            integral += d->weights[i] * std::max(d->points[i] * s - k, 0.0);
        }
    } else {
        const auto& t = std::get<TabulatedRatio>(dist);
        // Two-point Gauss-Legendre is exact for (z S - K) times a linear density.
        const double node = 1.0 / std::sqrt(3.0);
        for (std::size_t i = 0; i + 1 < t.z.size(); ++i) {
            const double a = std::max(t.z[i], z_low);
            const double b = t.z[i + 1];
            if (!(b > a)) {
                continue;
            }
            const double slope = (t.density[i + 1] - t.density[i]) / (t.z[i + 1] - t.z[i]);
            auto dens = [&](double z) { return t.density[i] + slope * (z - t.z[i]); };
            const double mid = 0.5 * (a + b);
            const double half = 0.5 * (b - a);
            for (double sgn : {-1.0, 1.0}) {
                const double z = mid + sgn * half * node;
                integral += half * (z * s - k) * dens(z);
            }
        }
    }
    return std::exp(-p.rate * p.maturity) * integral;
}

namespace {

void check_bachelier(double spot, double strike, double sigma_abs, double maturity) {
    if (!std::isfinite(spot) || !std::isfinite(strike)) {
        throw InputError("bachelier: spot and strike must be finite");
    }
    if (!(sigma_abs > 0.0) || !std::isfinite(sigma_abs)) {
        throw InputError(fmt::format("bachelier: sigma_abs = {} must be > 0", sigma_abs));
    }
    if (!(maturity > 0.0) || !std::isfinite(maturity)) {
        throw InputError(fmt::format("bachelier: maturity = {} must be > 0", maturity));
    }
}

}  // namespace

double bachelier_call(double spot, double strike, double sigma_abs, double maturity) {
    check_bachelier(spot, strike, sigma_abs, maturity);
    const double sd = sigma_abs * std::sqrt(maturity);
    const double m = (spot - strike) / sd;
    return (spot - strike) * normal_cdf(m) + sd * normal_pdf(m);
}

double bachelier_call_quadrature(double spot, double strike, double sigma_abs, double maturity) {
    check_bachelier(spot, strike, sigma_abs, maturity);
    const double sd = sigma_abs * std::sqrt(maturity);
    // z ~ N(0, sd^2); payoff-consistent region z >= K - S0.
    const double u0 = (strike - spot) / sd;
    auto f = [&](double u) { return (sd * u + spot - strike) * normal_pdf(u); };
    return integrate(f, std::max(u0, -kTail), kTail);
}

namespace {

struct BridgeSteps {
    double up, down, growth, q;
};

BridgeSteps bridge_steps(const ClosedFormParams& p, int steps) {
    p.validate();
    if (steps < 1) {
        throw InputError("binomial bridge needs at least one step");
    }
    if (p.maturity == 0.0) {
        throw InputError("binomial bridge needs maturity > 0");
    }
    const double h = p.maturity / steps;
    BridgeSteps b{std::exp(p.volatility * std::sqrt(h)), 0.0, std::exp(p.rate * h), 0.0};
    b.down = 1.0 / b.up;
    if (!(b.down < b.growth && b.growth < b.up)) {
        throw InputError(fmt::format("no martingale measure: need d < e^(r tau/N) < u, got d={}, growth={}, u={}",
                                     b.down, b.growth, b.up));
    }
    b.q = (b.growth - b.down) / (b.up - b.down);
    return b;
}

}  // namespace

double binomial_lattice_price(const ClosedFormParams& p, int steps) {
    const BridgeSteps b = bridge_steps(p, steps);
    std::vector<double> v(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) {
        const double s = p.spot * std::pow(b.up, j) * std::pow(b.down, steps - j);
        v[static_cast<std::size_t>(j)] = std::max(s - p.strike, 0.0);
    }
    for (int level = steps; level > 0; --level) {
        for (int j = 0; j < level; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            v[uj] = (b.q * v[uj + 1] + (1.0 - b.q) * v[uj]) / b.growth;
        }
    }
    return v[0];
}

BridgeResult binomial_bridge(const ClosedFormParams& p, int steps, double physical_up) {
    const BridgeSteps b = bridge_steps(p, steps);
    if (!(physical_up > 0.0 && physical_up < 1.0)) {
        throw InputError("physical up-probability must lie in (0, 1)");
    }
    BridgeResult out;
    out.up = b.up;
    out.down = b.down;
    out.growth = b.growth;
    out.risk_neutral_up = b.q;
    if (steps > kBridgeTreeLimit) {
        out.price = binomial_lattice_price(p, steps);
        return out;
    }
    std::vector<NodeSpec> nodes;
    struct Pending {
        std::string id;
        int ups;
        int depth;
    };
    std::vector<Pending> stack{{"r", 0, 0}};
    while (!stack.empty()) {
        const Pending cur = stack.back();
        stack.pop_back();
        NodeSpec spec;
        spec.id = cur.id;
        if (cur.depth > 0) {
            spec.parent = cur.id.substr(0, cur.id.size() - 1);
            spec.prob = cur.id.back() == 'u' ? physical_up : 1.0 - physical_up;
        }
        spec.prices = {std::pow(b.growth, cur.depth),
                       p.spot * std::pow(b.up, cur.ups) * std::pow(b.down, cur.depth - cur.ups)};
        nodes.push_back(std::move(spec));
        if (cur.depth < steps) {
            stack.push_back({cur.id + "d", cur.ups, cur.depth + 1});
            stack.push_back({cur.id + "u", cur.ups + 1, cur.depth + 1});
        }
    }
    ScenarioTree tree(steps, {"bond", "stock"}, nodes);
    Eigen::VectorXd payoff(static_cast<Eigen::Index>(tree.num_leaves()));
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        payoff[static_cast<Eigen::Index>(l)] = std::max(tree.price(tree.leaf_node(l), 1) - p.strike, 0.0);
    }
    const auto emm = unique_emm_nodewise(tree);
    if (!emm) {
        throw InvariantViolation("geometric binomial tree has no unique nodewise EMM");
    }
    out.price = price(tree, Claim(payoff), *emm).value[0];
    out.tree = std::move(tree);
    return out;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

MonteCarloResult feynman_kac_mc(const ClosedFormParams& p, std::uint64_t n_paths, std::uint64_t seed,
                                int substreams, int threads) {
    if (!(p.spot > 0.0) || !(p.strike >= 0.0) || !(p.volatility > 0.0) || !(p.maturity > 0.0) ||
        !std::isfinite(p.rate)) {
        throw InputError("feynman_kac_mc: need spot > 0, strike >= 0, volatility > 0, maturity > 0");
    }
    if (n_paths < 1000) {
        throw InputError("feynman_kac_mc: need at least 1000 paths");
    }
    if (substreams < 1) {
        throw InputError("feynman_kac_mc: need at least one substream");
    }
    const double drift = (p.rate - 0.5 * p.volatility * p.volatility) * p.maturity;
    const double diffusion = p.volatility * std::sqrt(p.maturity);
    const double discount = std::exp(-p.rate * p.maturity);

    struct Partial {
        double sum = 0.0;
        double sum_sq = 0.0;
    };
    const auto n_streams = static_cast<std::size_t>(substreams);
    std::vector<Partial> partial(n_streams);
    std::vector<std::uint64_t> stream_seed(n_streams);
    std::uint64_t state = seed;
    for (auto& s : stream_seed) {
        s = splitmix64(state);
    }
    auto run = [&](std::size_t k) {
        const std::uint64_t count = n_paths / n_streams + (k < n_paths % n_streams ? 1 : 0);
        std::mt19937_64 gen(stream_seed[k]);
        std::normal_distribution<double> normal(0.0, 1.0);
        Partial acc;
        for (std::uint64_t i = 0; i < count; ++i) {
            const double st = p.spot * std::exp(drift + diffusion * normal(gen));
            const double pay = discount * std::max(st - p.strike, 0.0);
            acc.sum += pay;
            acc.sum_sq += pay * pay;
        }
        partial[k] = acc;
    };
    if (threads <= 1) {
        for (std::size_t k = 0; k < n_streams; ++k) {
            run(k);
        }
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_streams; ++k) {
            pool.emplace_back(run, k);
            if (pool.size() == static_cast<std::size_t>(threads)) {
                for (auto& t : pool) t.join();
                pool.clear();
            }
        }
        for (auto& t : pool) t.join();
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& part : partial) {  // fixed order keeps the result deterministic
        sum += part.sum;
        sum_sq += part.sum_sq;
    }
    const auto n = static_cast<double>(n_paths);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
    return MonteCarloResult{mean, std::sqrt(var / n), n_paths};
}

}  // namespace ftap
