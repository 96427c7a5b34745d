#pragma once

#include "ftap/arbitrage.hpp"
#include "ftap/market.hpp"

#include <Eigen/Dense>

#include <optional>

namespace ftap {

/// Affine set of (signed) martingale measures through a strictly positive EMM.
struct EmmPolytope {
    Measure base;
    /// L x dimension, orthonormal columns. Each column sums to zero and keeps
    /// every martingale equality, so base + directions * theta stays a signed
    /// martingale measure for every theta.
    Eigen::MatrixXd directions;
    int dimension = 0;
};

/// Leaf-indexed spanning set of H = {V~_0 + sum phi . dS~}: the constant 1 and
/// 1_{node} dS~^j for every internal node and risky asset.
Eigen::MatrixXd gains_space(const ScenarioTree& tree);

/// Throws InputError when `base` fails the martingale check.
EmmPolytope emm_polytope(const ScenarioTree& tree, const Measure& base);

struct CompletenessReport {
    bool complete = false;
    int dimension = 0;
    std::size_t max_children = 0;
    Measure base;
};

/// Throws InputError on an arbitrage market. On a complete verdict also
/// checks the branching bound (at most d+1 children per node) and throws
/// InvariantViolation if it fails.
CompletenessReport completeness_report(const ScenarioTree& tree);
bool is_complete(const ScenarioTree& tree);

struct ReplicationResult {
    Strategy strategy;     ///< self-financing, V_0 = initial_price
    double initial_price = 0.0;
    double residual = 0.0;  ///< max over leaves of |V_T - payoff|
    bool attainable = false;
};

/// Backward induction with nodal least-squares fits of the discounted
/// continuation value on (1, dS~). The returned strategy is the
/// self-financing strategy carrying the fitted risky positions; residual
/// measures how far its terminal value misses the claim.
ReplicationResult replicate(const ScenarioTree& tree, const Claim& claim);

/// S^0_t E*(X~ | node) at every node. Throws InputError if `measure` is not
/// an EMM of the tree.
ValueProcess price(const ScenarioTree& tree, const Claim& claim, const Measure& measure);

/// Second EMM (1 + sign * X / (2 |X|_inf)) P* for X orthogonal to H under
/// E_{P*}, or nullopt when the market is complete. `sign` is +1 or -1.
std::optional<Measure> second_measure(const ScenarioTree& tree, const Measure& base, int sign = 1);

/// The random variable X used by second_measure, normalised to |X|_inf = 1,
/// or nullopt on a complete market.
std::optional<Eigen::VectorXd> orthogonal_direction(const ScenarioTree& tree, const Measure& base);

/// Product of the per-node conditional martingale measures when every nodal
/// system has a unique strictly positive solution; nullopt otherwise. Fast
/// path for large complete trees where the leaf LP is too big.
std::optional<Measure> unique_emm_nodewise(const ScenarioTree& tree);

struct PriceBounds {
    double lower = 0.0;  ///< inf over the closed EMM polytope of S^0_0 E_Q(X~)
    double upper = 0.0;  ///< sup of the same
};

/// Arbitrage-free price interval at the root, by LP over the closure of the
/// martingale-measure polytope.
PriceBounds price_bounds(const ScenarioTree& tree, const Claim& claim);

}  // namespace ftap
