#pragma once

#include "ftap/market.hpp"
#include "ftap/rational.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ftap {

/// Strictly positive probability on the leaves (paths) of a tree.
class Measure {
public:
    /// Throws InputError unless every entry is > 0 and the sum is 1 within 1e-12.
    explicit Measure(Eigen::VectorXd leaf_prob);

    const Eigen::VectorXd& leaf_prob() const { return leaf_prob_; }
    std::size_t size() const { return static_cast<std::size_t>(leaf_prob_.size()); }

    /// Probability of reaching each node.
    Eigen::VectorXd node_probs(const ScenarioTree& tree) const;
    /// Probability of the edge parent(n) -> n given parent(n); 1 at the root.
    Eigen::VectorXd conditional_probs(const ScenarioTree& tree) const;
    /// dP*/dP per leaf.
    Eigen::VectorXd density(const ScenarioTree& tree) const;
    /// E(x) for a leaf-indexed random variable.
    double expectation(const Eigen::VectorXd& x) const { return leaf_prob_.dot(x); }

private:
    Eigen::VectorXd leaf_prob_;
};

/// Same as the Measure constructor but after renormalising; used for the
/// output of numerical solvers whose sums drift in the last ulp.
Measure normalised_measure(Eigen::VectorXd leaf_prob);

struct MartingaleCheck {
    bool is_martingale = false;
    double worst_residual = 0.0;
    NodeIndex worst_node = 0;
    int worst_asset = 0;
};

/// At every internal node and risky asset i: sum_c P*(c | node) S~^i(c) = S~^i(node).
MartingaleCheck is_martingale_measure(const ScenarioTree& tree, const Measure& measure, double tolerance = 1e-9);

/// An equivalent martingale measure maximising the smallest leaf probability,
/// or nullopt when no strictly positive one exists. Throws NumericalError if
/// the LP solver fails (as opposed to reporting infeasibility).
std::optional<Measure> find_emm(const ScenarioTree& tree);

/// Optimal value of the max-min LP (0 when only boundary martingale measures
/// exist, nullopt when none exist at all).
std::optional<double> emm_max_min_probability(const ScenarioTree& tree);

/// Self-financing arbitrage from the Stiemke alternative of the EMM problem:
/// maximise the summed terminal discounted gains over predictable risky
/// positions in [-1, 1] subject to nonnegative gains on every path. The
/// returned strategy has V_0 = 0 and may dip below zero before T.
std::optional<Strategy> find_self_financing_arbitrage(const ScenarioTree& tree);

/// Admissible arbitrage (the dual certificate promoted through
/// promote_to_admissible), or nullopt when an EMM exists. Throws
/// InvariantViolation if neither or both certificates exist.
std::optional<Strategy> find_arbitrage(const ScenarioTree& tree);

/// Exactly one of an EMM or an admissible arbitrage.
class ArbitrageCertificate {
public:
    explicit ArbitrageCertificate(Measure emm) : content_(std::move(emm)) {}
    explicit ArbitrageCertificate(Strategy arbitrage) : content_(std::move(arbitrage)) {}

    bool has_emm() const { return std::holds_alternative<Measure>(content_); }
    bool has_arbitrage() const { return std::holds_alternative<Strategy>(content_); }
    const Measure& emm() const { return std::get<Measure>(content_); }
    const Strategy& arbitrage() const { return std::get<Strategy>(content_); }

private:
    std::variant<Measure, Strategy> content_;
};

/// Both branches self-verify before returning; a certificate that fails its
/// own check throws InvariantViolation.
ArbitrageCertificate fftap_verdict(const ScenarioTree& tree);

// Exact rational mode -------------------------------------------------------

/// A tree's discounted prices as exact rationals. Each double is read as the
/// shortest decimal that round-trips to it.
struct ExactMarket {
    explicit ExactMarket(const ScenarioTree& tree);
    const ScenarioTree* tree;
    std::vector<std::vector<Rational>> discounted;  ///< [node][risky asset]
};

struct ExactVerdict {
    bool has_emm = false;
    std::vector<Rational> leaf_prob;         ///< EMM, when has_emm
    Rational min_prob;                       ///< max-min LP optimum
    std::vector<std::vector<Rational>> risky;  ///< admissible arbitrage, [node][asset]
    std::vector<Rational> terminal_gains;    ///< discounted terminal value per leaf
    /// Same strategy in floating point for reporting.
    std::optional<Strategy> arbitrage;
};

/// Rational-arithmetic verdict. The EMM is checked with zero residual, the
/// arbitrage with exactly nonnegative terminal gains and V_0 = 0.
ExactVerdict fftap_verdict_exact(const ScenarioTree& tree);

}  // namespace ftap
