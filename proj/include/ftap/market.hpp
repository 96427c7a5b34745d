#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ftap {

using NodeIndex = std::size_t;
using LeafIndex = std::size_t;

/// One node as read from a tree file, before the tree is indexed.
struct NodeSpec {
    std::string id;
    std::optional<std::string> parent;  ///< absent for the root
    double prob = 1.0;                   ///< physical edge probability parent -> node
    std::vector<double> prices;          ///< d+1 prices, asset 0 is the numeraire
    int line = 0;                        ///< source line, 0 when not from a file
};

/// Finite filtered market on a non-recombining tree.
///
/// Nodes are stored in depth-first preorder, so a parent always precedes its
/// children and the leaves below any node form a contiguous leaf range. The
/// filtration is the tree itself: a node of depth t is an atom of F_t.
///
/// Structural defects (unknown parent, several roots, ragged price vectors)
/// throw InputError from the constructor. Market-level invariants (probability
/// sums, numeraire predictability, uniform leaf depth, ...) are collected as
/// diagnostics; see validate_tree().
class ScenarioTree {
public:
    ScenarioTree(int horizon, std::vector<std::string> asset_names, const std::vector<NodeSpec>& nodes);

    int horizon() const { return horizon_; }
    int num_risky() const { return static_cast<int>(prices_.cols()) - 1; }
    int num_assets() const { return static_cast<int>(prices_.cols()); }
    std::size_t num_nodes() const { return parent_.size(); }
    std::size_t num_leaves() const { return leaf_nodes_.size(); }

    static constexpr NodeIndex root() { return 0; }
    bool is_root(NodeIndex n) const { return n == 0; }
    bool is_leaf(NodeIndex n) const { return children_[n].empty(); }
    NodeIndex parent(NodeIndex n) const { return parent_[n]; }
    std::span<const NodeIndex> children(NodeIndex n) const { return children_[n]; }
    int depth(NodeIndex n) const { return depth_[n]; }

    const std::string& id(NodeIndex n) const { return ids_[n]; }
    std::optional<NodeIndex> find(const std::string& id) const;
    const std::vector<std::string>& asset_names() const { return asset_names_; }

    double price(NodeIndex n, int asset) const { return prices_(n, asset); }
    Eigen::RowVectorXd prices(NodeIndex n) const { return prices_.row(n); }
    double numeraire(NodeIndex n) const { return prices_(n, 0); }
    double discounted(NodeIndex n, int asset) const { return prices_(n, asset) / prices_(n, 0); }
    /// S/S^0 at a node, all d+1 components (component 0 is 1).
    Eigen::RowVectorXd discounted_prices(NodeIndex n) const { return prices_.row(n) / prices_(n, 0); }
    /// Risky discounted increment from parent(n) to n (d components).
    Eigen::RowVectorXd discounted_increment(NodeIndex n) const;

    double edge_prob(NodeIndex n) const { return edge_prob_[n]; }
    /// Physical probability of reaching n (product of edge probabilities).
    double path_prob(NodeIndex n) const { return path_prob_[n]; }

    LeafIndex leaf_begin(NodeIndex n) const { return leaf_begin_[n]; }
    LeafIndex leaf_end(NodeIndex n) const { return leaf_end_[n]; }
    NodeIndex leaf_node(LeafIndex l) const { return leaf_nodes_[l]; }
    /// Physical leaf distribution, indexed by leaf.
    Eigen::VectorXd physical_leaf_probs() const;

    /// Non-leaf nodes in preorder.
    const std::vector<NodeIndex>& internal_nodes() const { return internal_; }
    /// Ancestor of n at depth t (n itself when depth(n) == t).
    NodeIndex ancestor_at(NodeIndex n, int t) const;

    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    bool valid() const { return diagnostics_.empty(); }
    /// Throws InvalidTree listing the diagnostics when the tree is invalid.
    void require_valid() const;

    /// Source line of a node (0 when built programmatically).
    int line(NodeIndex n) const { return lines_[n]; }

private:
    void compute_diagnostics();

    int horizon_;
    std::vector<std::string> asset_names_;
    std::vector<std::string> ids_;
    std::vector<int> lines_;
    std::vector<NodeIndex> parent_;
    std::vector<std::vector<NodeIndex>> children_;
    std::vector<int> depth_;
    std::vector<double> edge_prob_;
    std::vector<double> path_prob_;
    std::vector<LeafIndex> leaf_begin_;
    std::vector<LeafIndex> leaf_end_;
    std::vector<NodeIndex> leaf_nodes_;
    std::vector<NodeIndex> internal_;
    Eigen::MatrixXd prices_;
    std::vector<std::string> diagnostics_;
};

/// Predictable trading strategy. Row n holds the d+1 positions decided at
/// node n and carried over the next period, i.e. phi_{t+1} on the atom n of
/// F_t. Rows of leaves are unused and kept at zero.
class Strategy {
public:
    Strategy() = default;
    explicit Strategy(const ScenarioTree& tree);
    Strategy(const ScenarioTree& tree, Eigen::MatrixXd positions);

    std::size_t num_nodes() const { return static_cast<std::size_t>(positions_.rows()); }
    int num_assets() const { return static_cast<int>(positions_.cols()); }
    Eigen::RowVectorXd at(NodeIndex n) const { return positions_.row(n); }
    double at(NodeIndex n, int asset) const { return positions_(n, asset); }
    void set(NodeIndex n, const Eigen::RowVectorXd& position);
    void set(NodeIndex n, int asset, double units) { positions_(n, asset) = units; }
    const Eigen::MatrixXd& positions() const { return positions_; }

    Strategy operator+(const Strategy& other) const;
    Strategy operator*(double scale) const;

private:
    Eigen::MatrixXd positions_;
};

struct ValueProcess {
    Eigen::VectorXd value;       ///< V_t(phi) per node
    Eigen::VectorXd discounted;  ///< V_t(phi) / S^0_t per node
};

/// Terminal payoff, indexed by leaf.
class Claim {
public:
    Claim() = default;
    explicit Claim(Eigen::VectorXd payoff);
    const Eigen::VectorXd& payoff() const { return payoff_; }
    double operator[](LeafIndex l) const { return payoff_[l]; }
    std::size_t size() const { return static_cast<std::size_t>(payoff_.size()); }

private:
    Eigen::VectorXd payoff_;
};

/// Payoff divided by the terminal numeraire, per leaf.
Eigen::VectorXd discounted_payoff(const ScenarioTree& tree, const Claim& claim);

std::vector<std::string> validate_tree(const ScenarioTree& tree);

/// V_t = phi_t . S_t for depth >= 1 and V_0 = phi_1 . S_0.
ValueProcess value_process(const ScenarioTree& tree, const Strategy& strategy);

struct SelfFinancingReport {
    bool self_financing = true;
    std::optional<NodeIndex> first_violation;  ///< first node in preorder
    double max_gap = 0.0;                      ///< normalised by S^0(root)
};

/// Checks V_t(phi) = phi_{t+1} . S_t at every internal non-root node. When
/// true, also checks the discounted-gains identity and throws
/// InvariantViolation if it fails.
SelfFinancingReport is_self_financing(const ScenarioTree& tree, const Strategy& strategy);

/// Throws InputError if the strategy is not self-financing.
bool is_admissible(const ScenarioTree& tree, const Strategy& strategy);

/// V_0 = 0, V_T >= 0 and V_T > 0 on some leaf. Non-self-financing strategies
/// are never arbitrages.
bool is_arbitrage(const ScenarioTree& tree, const Strategy& strategy);

/// Discounted gains sum_{u<=t} phi_u . dS~_u at every node.
Eigen::VectorXd discounted_gains(const ScenarioTree& tree, const Strategy& strategy);

/// Self-financing strategy with the given risky positions (N x d, row per
/// decision node) and initial discounted value; the numeraire leg is solved
/// so that no money enters or leaves.
Strategy self_financing_from_risky(const ScenarioTree& tree, const Eigen::MatrixXd& risky,
                                   double initial_discounted_value);

/// Time and atom set used by the admissibility surgery.
struct PromotionSite {
    int time = -1;                 ///< -1 when the input never dips below zero
    std::vector<NodeIndex> atoms;  ///< nodes of depth `time` with negative value
};

PromotionSite promotion_site(const ScenarioTree& tree, const Strategy& strategy);

/// Turns a self-financing arbitrage into an admissible one: zero up to the
/// last time t at which the value can be negative, then the original risky
/// positions restricted to A = {V~_t < 0}, with the numeraire leg shifted by
/// -V~_t so that V~_u(theta) = 1_A (V~_u(phi) - V~_t(phi)).
/// Throws InputError when the input is not a self-financing arbitrage.
Strategy promote_to_admissible(const ScenarioTree& tree, const Strategy& strategy);

}  // namespace ftap
