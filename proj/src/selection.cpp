#include "ftap/selection.hpp"

#include "ftap/completeness.hpp"
#include "ftap/error.hpp"
#include "ftap/tolerances.hpp"

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace ftap {

namespace {

constexpr double kFocTol = 1e-7;
constexpr double kDualityTol = 1e-7;
constexpr double kVPrimeTol = 1e-4;
constexpr double kPriceTol = 1e-6;
constexpr int kMaxNewton = 200;

std::vector<double> probe_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 1; i <= n; ++i) {
        g.push_back(lo + (hi - lo) * i / (n + 1));
    }
    return g;
}

}  // namespace

DivergenceSpec DivergenceSpec::entropy() {
    DivergenceSpec s;
    s.name = "entropy";
    s.v = [](double y) { return y > 0.0 ? y * std::log(y) : 0.0; };
    s.dv = [](double y) { return std::log(y) + 1.0; };
    s.d2v = [](double y) { return 1.0 / y; };
    s.domain = Domain::nonnegative;
    s.steep = true;
    return s;
}

DivergenceSpec DivergenceSpec::quadratic() {
    DivergenceSpec s;
    s.name = "quadratic";
    s.v = [](double y) { return 0.5 * y * y; };
    s.dv = [](double y) { return y; };
    s.d2v = [](double) { return 1.0; };
    s.domain = Domain::real;
    s.steep = false;
    return s;
}

DivergenceSpec DivergenceSpec::custom(std::string name, std::function<double(double)> v,
                                      std::function<double(double)> dv, std::function<double(double)> d2v,
                                      Domain domain, bool steep) {
    if (!v || !dv) {
        throw InputError("custom divergence needs V and V'");
    }
    const double lo = domain == Domain::real ? -10.0 : 0.0;
    constexpr double h = 0.05;
    for (double y : probe_grid(lo + h, 10.0, 60)) {
        const double second = v(y - h) - 2.0 * v(y) + v(y + h);
        if (!(second > 0.0)) {
            throw InputError(fmt::format("divergence '{}' is not strictly convex near {:.3g}", name, y));
        }
    }
    return DivergenceSpec{std::move(name), std::move(v), std::move(dv), std::move(d2v), domain, steep};
}

double DivergenceSpec::second(double y) const {
    if (d2v) {
        return d2v(y);
    }
    const double h = 1e-6 * std::max(1.0, std::abs(y));
    const double lo = domain == Domain::nonnegative ? std::max(y - h, 0.5 * y) : y - h;
    return (dv(y + h) - dv(lo)) / (y + h - lo);
}

UtilitySpec UtilitySpec::exponential(double a) {
    if (!(a > 0.0)) {
        throw InputError("exponential utility needs risk aversion > 0");
    }
    UtilitySpec s;
    s.name = "exp";
    s.u = [a](double x) { return -std::exp(-a * x) / a; };
    s.du = [a](double x) { return std::exp(-a * x); };
    s.d2u = [a](double x) { return -a * std::exp(-a * x); };
    return s;
}

UtilitySpec UtilitySpec::log() {
    UtilitySpec s;
    s.name = "log";
    s.u = [](double x) { return std::log(x); };
    s.du = [](double x) { return 1.0 / x; };
    s.d2u = [](double x) { return -1.0 / (x * x); };
    s.lower = 0.0;
    return s;
}

UtilitySpec UtilitySpec::quadratic(double bliss) {
    UtilitySpec s;
    s.name = "quadratic";
    s.u = [bliss](double x) { return -0.5 * (x - bliss) * (x - bliss); };
    s.du = [bliss](double x) { return bliss - x; };
    s.d2u = [](double) { return -1.0; };
    s.upper = bliss;
    return s;
}

UtilitySpec UtilitySpec::custom(std::string name, std::function<double(double)> u, std::function<double(double)> du,
                                std::function<double(double)> d2u, double lower, double upper) {
    if (!u || !du || !d2u) {
        throw InputError("custom utility needs U, U' and U''");
    }
    const double lo = std::isfinite(lower) ? lower : std::min(-10.0, upper - 20.0);
    const double hi = std::isfinite(upper) ? upper : std::max(10.0, lower + 20.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double x : probe_grid(lo, hi, 60)) {
        const double slope = du(x);
        if (!(slope > 0.0) || !(slope < prev)) {
            throw InputError(fmt::format("utility '{}' is not increasing and concave near {:.3g}", name, x));
        }
        prev = slope;
    }
    return UtilitySpec{std::move(name), std::move(u), std::move(du), std::move(d2u), lower, upper};
}

double divergence(const ScenarioTree& tree, const DivergenceSpec& spec, const Eigen::VectorXd& leaf_prob) {
    const Eigen::VectorXd p = tree.physical_leaf_probs();
    double total = 0.0;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        total += p[l] * spec.v(leaf_prob[l] / p[l]);
    }
    return total;
}

namespace {

/// F(theta) = E_P V(q/p) - mu sum log q on q = q0 + D theta.
struct DivergenceObjective {
    const DivergenceSpec& spec;
    const Eigen::VectorXd& p;
    const Eigen::VectorXd& q0;
    const Eigen::MatrixXd& dirs;
    double mu = 0.0;

    Eigen::VectorXd leaf(const Eigen::VectorXd& theta) const { return q0 + dirs * theta; }

    bool admissible(const Eigen::VectorXd& q) const {
        return (mu > 0.0 || spec.steep) ? (q.array() > 0.0).all() : (q.array() >= 0.0).all();
    }

    double value(const Eigen::VectorXd& q) const {
        double f = 0.0;
        for (Eigen::Index l = 0; l < q.size(); ++l) {
            f += p[l] * spec.v(q[l] / p[l]);
            if (mu > 0.0) f -= mu * std::log(q[l]);
        }
        return f;
    }

    void derivatives(const Eigen::VectorXd& q, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        Eigen::VectorXd g(q.size()), w(q.size());
        for (Eigen::Index l = 0; l < q.size(); ++l) {
            const double y = q[l] / p[l];
            g[l] = spec.dv(y);
            w[l] = spec.second(y) / p[l];
            if (mu > 0.0) {
                g[l] -= mu / q[l];
                w[l] += mu / (q[l] * q[l]);
            }
        }
        grad = dirs.transpose() * g;
        hess = dirs.transpose() * w.asDiagonal() * dirs;
    }
};

/// Damped Newton on a strictly convex objective over its admissible region.
int newton_minimise(const DivergenceObjective& obj, Eigen::VectorXd& theta) {
    int it = 0;
    for (; it < kMaxNewton; ++it) {
        const Eigen::VectorXd q = obj.leaf(theta);
        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
        obj.derivatives(q, grad, hess);
        const Eigen::VectorXd step = -hess.ldlt().solve(grad);
        const double decrement = -grad.dot(step);
        if (!(decrement > 1e-26)) {
            break;
        }
        const double f0 = obj.value(q);
        double t = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            const Eigen::VectorXd trial = theta + t * step;
            const Eigen::VectorXd qt = obj.leaf(trial);
            if (!obj.admissible(qt)) continue;
            const double ft = obj.value(qt);
            if (std::isfinite(ft) && ft <= f0 - 0.25 * t * decrement) {
                theta = trial;
                moved = true;
                break;
            }
        }
        if (!moved) {
            break;
        }
    }
    return it;
}

/// Re-solve with the near-zero leaves pinned at zero; keep the result when
/// it is feasible and the pinned constraints have nonnegative multipliers.
bool polish_active_set(const DivergenceObjective& obj, Eigen::VectorXd& theta, int& iterations) {
    const Eigen::VectorXd q = obj.leaf(theta);
    std::vector<Eigen::Index> active;
    for (Eigen::Index l = 0; l < q.size(); ++l) {
        if (q[l] < 1e-7) active.push_back(l);
    }
    const auto k = obj.dirs.cols();
    if (active.empty()) {
        DivergenceObjective pure{obj.spec, obj.p, obj.q0, obj.dirs, 0.0};
        iterations += newton_minimise(pure, theta);
        return false;
    }
    Eigen::MatrixXd da(static_cast<Eigen::Index>(active.size()), k);
    Eigen::VectorXd rhs(da.rows());
    for (std::size_t i = 0; i < active.size(); ++i) {
        da.row(static_cast<Eigen::Index>(i)) = obj.dirs.row(active[i]);
        rhs[static_cast<Eigen::Index>(i)] = -obj.q0[active[i]];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(da);
    const Eigen::VectorXd theta_p = cod.solve(rhs);
    if ((da * theta_p - rhs).cwiseAbs().maxCoeff() > 1e-12) {
        return false;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(da, Eigen::ComputeFullV);
    int rank = 0;
    const auto& sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > 1e-10 * std::max(1.0, sv[0])) ++rank;
    }
    const Eigen::MatrixXd null = svd.matrixV().rightCols(k - rank);
    Eigen::VectorXd q_base = obj.leaf(theta_p);
    for (Eigen::Index l : active) q_base[l] = 0.0;
    const Eigen::MatrixXd reduced = obj.dirs * null;
    DivergenceObjective sub{obj.spec, obj.p, q_base, reduced, 0.0};
    Eigen::VectorXd eta = null.transpose() * (theta - theta_p);
    if (!sub.admissible(sub.leaf(eta))) {
        eta.setZero();
        if (!sub.admissible(sub.leaf(eta))) return false;
    }
    if (null.cols() > 0) {
        iterations += newton_minimise(sub, eta);
    }
    Eigen::VectorXd q_new = sub.leaf(eta);
    for (Eigen::Index l : active) q_new[l] = 0.0;
    // KKT: grad_theta F = D_A^T nu with nu >= 0.
    Eigen::VectorXd g(q_new.size());
    for (Eigen::Index l = 0; l < q_new.size(); ++l) {
        g[l] = obj.spec.dv(q_new[l] / obj.p[l]);
    }
    const Eigen::VectorXd grad = obj.dirs.transpose() * g;
    const Eigen::VectorXd nu = da.transpose().completeOrthogonalDecomposition().solve(grad);
    if (nu.minCoeff() < -1e-8 || (da.transpose() * nu - grad).cwiseAbs().maxCoeff() > 1e-8) {
        return false;
    }
    theta = theta_p + null * eta;
    return true;
}

}  // namespace

SelectedMeasure minimal_divergence_measure(const ScenarioTree& tree, const DivergenceSpec& spec) {
    const auto emm = find_emm(tree);
    if (!emm) {
        throw InputError("market admits arbitrage; the martingale-measure polytope is empty");
    }
    const EmmPolytope poly = emm_polytope(tree, *emm);
    const Eigen::VectorXd p = tree.physical_leaf_probs();
    SelectedMeasure out;
    if (poly.dimension == 0) {
        out.leaf_prob = emm->leaf_prob();
        out.divergence = divergence(tree, spec, out.leaf_prob);
        out.measure = *emm;
        return out;
    }
    const Eigen::VectorXd& q0 = emm->leaf_prob();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(poly.dimension);
    if (spec.steep) {
        DivergenceObjective obj{spec, p, q0, poly.directions, 0.0};
        out.iterations = newton_minimise(obj, theta);
    } else {
        for (double mu = 1e-2; mu >= 1e-14; mu *= 0.1) {
            DivergenceObjective obj{spec, p, q0, poly.directions, mu};
            out.iterations += newton_minimise(obj, theta);
        }
        DivergenceObjective obj{spec, p, q0, poly.directions, 0.0};
        const bool pinned = polish_active_set(obj, theta, out.iterations);
        out.on_boundary = pinned;
    }
    out.leaf_prob = q0 + poly.directions * theta;
    if (out.on_boundary) {
        for (Eigen::Index l = 0; l < out.leaf_prob.size(); ++l) {
            if (out.leaf_prob[l] < 1e-7) out.leaf_prob[l] = 0.0;
        }
    }
    out.leaf_prob /= out.leaf_prob.sum();
    out.divergence = divergence(tree, spec, out.leaf_prob);
    if ((out.leaf_prob.array() > 0.0).all()) {
        out.measure = Measure(out.leaf_prob);
    }
    return out;
}

UtilitySpec legendre_dual(const DivergenceSpec& spec) {
    if (spec.name == "entropy") {
        UtilitySpec u;
        u.name = "legendre(entropy)";
        u.u = [](double x) { return -std::exp(-1.0 - x); };
        u.du = [](double x) { return std::exp(-1.0 - x); };
        u.d2u = [](double x) { return -std::exp(-1.0 - x); };
        return u;
    }
    if (spec.name == "quadratic") {
        UtilitySpec u;
        u.name = "legendre(quadratic)";
        u.u = [](double x) { return -0.5 * x * x; };
        u.du = [](double x) { return -x; };
        u.d2u = [](double) { return -1.0; };
        u.upper = 0.0;
        return u;
    }
    // argmin_y V(y) + x y, i.e. V'(y) = -x, or the left edge of the domain.
    auto argmin = [spec](double x) -> double {
        auto h = [&](double y) { return spec.dv(y) + x; };
        double lo = 0.0;
        if (spec.domain == Domain::nonnegative) {
            const double edge = std::numeric_limits<double>::min();
            if (h(edge) >= 0.0) {
                return 0.0;
            }
            lo = edge;
        } else {
            lo = -1.0;
            while (h(lo) > 0.0) {
                lo *= 2.0;
                if (lo < -1e15) {
                    throw NumericalError(fmt::format("Legendre infimum unbounded below at x = {}", x));
                }
            }
        }
        double hi = 1.0;
        while (h(hi) < 0.0) {
            hi *= 2.0;
            if (hi > 1e15) {
                throw NumericalError(fmt::format("Legendre infimum unbounded below at x = {}", x));
            }
        }
        if (!(hi > lo)) lo = hi / 2.0;
        boost::uintmax_t max_iter = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, boost::math::tools::eps_tolerance<double>(52),
                                                            max_iter);
        return 0.5 * (a + b);
    };
    UtilitySpec u;
    u.name = "legendre(" + spec.name + ")";
    u.u = [spec, argmin](double x) {
        const double y = argmin(x);
        return spec.v(y) + x * y;
    };
    u.du = [argmin](double x) { return argmin(x); };
    u.d2u = [spec, argmin](double x) {
        const double y = argmin(x);
        return y > 0.0 || spec.domain == Domain::real ? -1.0 / spec.second(y) : 0.0;
    };
    return u;
}

namespace {

struct UtilityProblem {
    Eigen::VectorXd p;
    Eigen::MatrixXd gains;  ///< L x (internal * d)
    double w0 = 0.0;
};

UtilityProblem utility_problem(const ScenarioTree& tree, double x) {
    const Eigen::MatrixXd h = gains_space(tree);
    return UtilityProblem{tree.physical_leaf_probs(), h.rightCols(h.cols() - 1), x / tree.numeraire(tree.root())};
}

double expected_utility(const UtilitySpec& u, const Eigen::VectorXd& p, const Eigen::VectorXd& w) {
    double total = 0.0;
    for (Eigen::Index l = 0; l < w.size(); ++l) {
        total += p[l] * u.u(w[l]);
    }
    return total;
}

bool in_domain(const UtilitySpec& u, const Eigen::VectorXd& w) {
    for (Eigen::Index l = 0; l < w.size(); ++l) {
        if (!u.in_domain(w[l])) return false;
    }
    return true;
}

struct AscentResult {
    Eigen::VectorXd alpha;
    Eigen::VectorXd wealth;
    double value = 0.0;
    int iterations = 0;
};

AscentResult newton_ascent(const UtilitySpec& u, const UtilityProblem& prob) {
    const auto m = prob.gains.cols();
    AscentResult r;
    r.alpha = Eigen::VectorXd::Zero(m);
    r.wealth = Eigen::VectorXd::Constant(prob.p.size(), prob.w0);
    r.value = expected_utility(u, prob.p, r.wealth);
    for (; r.iterations < kMaxNewton; ++r.iterations) {
        Eigen::VectorXd g1(r.wealth.size()), w2(r.wealth.size());
        for (Eigen::Index l = 0; l < r.wealth.size(); ++l) {
            g1[l] = prob.p[l] * u.du(r.wealth[l]);
            w2[l] = -prob.p[l] * u.d2u(r.wealth[l]);
        }
        const Eigen::VectorXd grad = prob.gains.transpose() * g1;
        if (m == 0 || grad.cwiseAbs().maxCoeff() < 1e-15) {
            break;
        }
        const Eigen::MatrixXd neg_hess = prob.gains.transpose() * w2.asDiagonal() * prob.gains;
        const Eigen::VectorXd step = neg_hess.completeOrthogonalDecomposition().solve(grad);
        const double increment = grad.dot(step);
        if (!(increment > 1e-28)) {
            break;
        }
        double t = 1.0;
        bool moved = false;
        for (int k = 0; k < 80; ++k, t *= 0.5) {
            const Eigen::VectorXd alpha = r.alpha + t * step;
            const Eigen::VectorXd wealth = Eigen::VectorXd::Constant(prob.p.size(), prob.w0) + prob.gains * alpha;
            if (!in_domain(u, wealth)) continue;
            const double value = expected_utility(u, prob.p, wealth);
            if (std::isfinite(value) && value >= r.value + 0.25 * t * increment) {
                r.alpha = alpha;
                r.wealth = wealth;
                r.value = value;
                moved = true;
                break;
            }
        }
        if (!moved) {
            // Armijo stalls once the objective is flat to rounding; take the
            // full step if it keeps the wealth in the domain and does not lose value.
            const Eigen::VectorXd alpha = r.alpha + step;
            const Eigen::VectorXd wealth = Eigen::VectorXd::Constant(prob.p.size(), prob.w0) + prob.gains * alpha;
            if (in_domain(u, wealth) && expected_utility(u, prob.p, wealth) >= r.value - 1e-15 * std::abs(r.value)) {
                r.alpha = alpha;
                r.wealth = wealth;
                r.value = expected_utility(u, prob.p, wealth);
            }
            break;
        }
    }
    return r;
}

double foc_residual(const ScenarioTree& tree, const UtilitySpec& u, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& wealth) {
    double worst = 0.0;
    const int d = tree.num_risky();
    for (NodeIndex n : tree.internal_nodes()) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
        for (NodeIndex c : tree.children(n)) {
            const Eigen::RowVectorXd inc = tree.discounted_increment(c);
            for (LeafIndex l = tree.leaf_begin(c); l < tree.leaf_end(c); ++l) {
                const auto li = static_cast<Eigen::Index>(l);
                acc += p[li] * u.du(wealth[li]) * inc;
            }
        }
        worst = std::max(worst, acc.cwiseAbs().maxCoeff() / tree.path_prob(n));
    }
    return worst;
}

}  // namespace

OptimalWealth maximize_expected_utility(const ScenarioTree& tree, const UtilitySpec& u, double x) {
    tree.require_valid();
    if (!find_emm(tree)) {
        throw InputError("market admits arbitrage; expected utility is unbounded");
    }
    const UtilityProblem prob = utility_problem(tree, x);
    if (!u.in_domain(prob.w0)) {
        throw InputError(fmt::format("initial wealth {} outside the domain of utility '{}'", x, u.name));
    }
    const AscentResult r = newton_ascent(u, prob);
    OptimalWealth out;
    out.iterations = r.iterations;
    out.discounted_terminal = r.wealth;
    out.value = r.value;
    out.foc_residual = foc_residual(tree, u, prob.p, r.wealth);
    if (!(out.foc_residual <= kFocTol)) {
        const Eigen::VectorXd g = prob.gains.transpose() * prob.p.cwiseProduct(r.wealth.unaryExpr(u.du));
        throw NumericalError(fmt::format("utility maximisation did not converge: first-order residual {:.3g}, "
                                         "gradient norm {:.3g}",
                                         out.foc_residual, g.norm()));
    }
    const int d = tree.num_risky();
    Eigen::MatrixXd risky = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()), d);
    Eigen::Index k = 0;
    for (NodeIndex n : tree.internal_nodes()) {
        risky.row(static_cast<Eigen::Index>(n)) = r.alpha.segment(k, d).transpose();
        k += d;
    }
    out.strategy = self_financing_from_risky(tree, risky, prob.w0);
    out.terminal_wealth.resize(r.wealth.size());
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        const auto li = static_cast<Eigen::Index>(l);
        out.terminal_wealth[li] = tree.numeraire(tree.leaf_node(l)) * r.wealth[li];
    }
    return out;
}

namespace {

Measure density_measure(const ScenarioTree& tree, const UtilitySpec& u, const Eigen::VectorXd& wealth,
                        const Eigen::VectorXd& p) {
    Eigen::VectorXd q(wealth.size());
    for (Eigen::Index l = 0; l < wealth.size(); ++l) {
        q[l] = p[l] * u.du(wealth[l]);
    }
    if (!(q.array() > 0.0).all()) {
        throw InvariantViolation("marginal utility is not positive at the optimum; no equivalent dual measure");
    }
    Measure m = normalised_measure(q);
    const auto check = is_martingale_measure(tree, m, kDualityTol);
    if (!check.is_martingale) {
        throw InvariantViolation(fmt::format("duality density fails the martingale check: residual {:.3g} at '{}'",
                                             check.worst_residual, tree.id(check.worst_node)));
    }
    return m;
}

}  // namespace

Measure duality_density(const ScenarioTree& tree, const UtilitySpec& u, double x) {
    const OptimalWealth opt = maximize_expected_utility(tree, u, x);
    return density_measure(tree, u, opt.discounted_terminal, tree.physical_leaf_probs());
}

IndifferencePrice marginal_indifference_price(const ScenarioTree& tree, const UtilitySpec& u, double x,
                                              const Claim& claim) {
    const OptimalWealth opt = maximize_expected_utility(tree, u, x);
    const Eigen::VectorXd p = tree.physical_leaf_probs();
    const Eigen::VectorXd xi = discounted_payoff(tree, claim);
    const double s0 = tree.numeraire(tree.root());
    const double h = x != 0.0 ? 1e-4 * std::abs(x) : 1e-4;
    const double v_up = maximize_expected_utility(tree, u, x + h).value;
    const double v_down = maximize_expected_utility(tree, u, x - h).value;

    Eigen::VectorXd marginal(p.size());
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        marginal[l] = p[l] * u.du(opt.discounted_terminal[l]);
    }
    const double v_prime = (v_up - v_down) / (2.0 * h);
    const double v_prime_dual = marginal.sum() / s0;
    if (!(v_prime > 0.0)) {
        throw NumericalError(fmt::format("v'(x) = {:.6g} is not positive", v_prime));
    }
    if (std::abs(v_prime - v_prime_dual) > kVPrimeTol * std::abs(v_prime_dual)) {
        throw NumericalError(fmt::format("v'(x) estimates disagree: difference {:.6g}, envelope {:.6g}", v_prime,
                                         v_prime_dual));
    }
    Measure m = density_measure(tree, u, opt.discounted_terminal, p);
    const double price_value = marginal.dot(xi) / v_prime;
    const double dual_price = s0 * m.expectation(xi);
    if (std::abs(price_value - dual_price) > kPriceTol * std::max(1.0, std::abs(dual_price))) {
        throw NumericalError(fmt::format("indifference price {:.12g} differs from the dual expectation {:.12g}",
                                         price_value, dual_price));
    }
    return IndifferencePrice{price_value, dual_price, v_prime, v_prime_dual, std::move(m)};
}

}  // namespace ftap
