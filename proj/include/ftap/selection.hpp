#pragma once

#include "ftap/arbitrage.hpp"
#include "ftap/market.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace ftap {

enum class Domain { nonnegative, real };

/// Strictly convex V applied to the density q/p.
struct DivergenceSpec {
    std::string name;
    std::function<double(double)> v;
    std::function<double(double)> dv;
    std::function<double(double)> d2v;  ///< may be empty; then differenced from dv
    Domain domain = Domain::nonnegative;
    bool steep = false;  ///< dv(0+) = -infinity, so minimisers stay interior

    static DivergenceSpec entropy();    ///< x log x on [0, inf)
    static DivergenceSpec quadratic();  ///< x^2 / 2 on the real line
    /// Throws InputError unless second differences of v are positive on a probe grid.
    static DivergenceSpec custom(std::string name, std::function<double(double)> v, std::function<double(double)> dv,
                                 std::function<double(double)> d2v = {}, Domain domain = Domain::nonnegative,
                                 bool steep = false);

    double second(double y) const;
};

/// Strictly concave, increasing U on (lower, upper).
struct UtilitySpec {
    std::string name;
    std::function<double(double)> u;
    std::function<double(double)> du;
    std::function<double(double)> d2u;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    static UtilitySpec exponential(double risk_aversion = 1.0);  ///< -e^{-a x} / a
    static UtilitySpec log();
    /// -(x - bliss)^2 / 2, increasing below the bliss point.
    static UtilitySpec quadratic(double bliss = 0.0);
    /// Throws InputError unless u is increasing and concave on a probe grid of (lower, upper).
    static UtilitySpec custom(std::string name, std::function<double(double)> u, std::function<double(double)> du,
                              std::function<double(double)> d2u, double lower, double upper);

    bool in_domain(double x) const { return x > lower && x < upper; }
};

/// E_P(V(q/p)) for a leaf distribution q (zeros allowed when V is finite at 0).
double divergence(const ScenarioTree& tree, const DivergenceSpec& spec, const Eigen::VectorXd& leaf_prob);

struct SelectedMeasure {
    Eigen::VectorXd leaf_prob;
    double divergence = 0.0;
    bool on_boundary = false;    ///< some leaf probability is zero at the minimiser
    std::optional<Measure> measure;  ///< set when the minimiser is strictly positive
    int iterations = 0;
};

/// argmin E_P(V(q/p)) over the closed martingale-measure polytope,
/// parametrised as base + D theta. Throws InputError on an arbitrage market.
SelectedMeasure minimal_divergence_measure(const ScenarioTree& tree, const DivergenceSpec& spec);

/// U(x) = inf_y (V(y) + x y). Closed forms for the built-ins, a root solve of
/// V'(y) = -x otherwise. The returned functions throw NumericalError where
/// the infimum is unbounded below.
UtilitySpec legendre_dual(const DivergenceSpec& spec);

struct OptimalWealth {
    Strategy strategy;                    ///< self-financing, V_0 = x
    Eigen::VectorXd terminal_wealth;      ///< W*_T per leaf
    Eigen::VectorXd discounted_terminal;  ///< W*_T / S^0_T, the argument of U
    double value = 0.0;                   ///< v(x) = E_P(U(W~*))
    double foc_residual = 0.0;            ///< max |E_P(U'(W~*) dS~ | node)|
    int iterations = 0;
};

/// Newton ascent on the risky positions of self-financing strategies with
/// V_0 = x; utility is applied to discounted terminal wealth. Throws
/// NumericalError when the first-order conditions miss 1e-7.
OptimalWealth maximize_expected_utility(const ScenarioTree& tree, const UtilitySpec& u, double x);

/// Measure with density U'(W~*) / E_P(U'(W~*)). Throws InvariantViolation if it
/// fails the martingale check at 1e-7.
Measure duality_density(const ScenarioTree& tree, const UtilitySpec& u, double x);

struct IndifferencePrice {
    double price = 0.0;           ///< E_P(U'(W~*) xi) / v'(x), xi the discounted claim
    double dual_price = 0.0;      ///< S^0_0 E_{P*}(xi) under duality_density
    double v_prime = 0.0;         ///< central difference
    double v_prime_dual = 0.0;    ///< E_P(U'(W~*)) / S^0_0
    Measure measure;
};

/// Throws NumericalError if v'(x) <= 0, if the two v' estimates disagree by
/// more than 1e-4 relative, or if price and dual_price differ by more than 1e-6.
IndifferencePrice marginal_indifference_price(const ScenarioTree& tree, const UtilitySpec& u, double x,
                                              const Claim& claim);

}  // namespace ftap
