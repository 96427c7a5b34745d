#include "ftap/market.hpp"

#include "ftap/error.hpp"
#include "ftap/tolerances.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ftap {

namespace {

std::string where(const NodeSpec& spec) {
    return spec.line > 0 ? fmt::format("line {}: ", spec.line) : std::string{};
}

}  // namespace

ScenarioTree::ScenarioTree(int horizon, std::vector<std::string> asset_names, const std::vector<NodeSpec>& nodes)
    : horizon_(horizon), asset_names_(std::move(asset_names)) {
    if (nodes.empty()) {
        throw InputError("tree has no nodes");
    }
    const std::size_t width = nodes.front().prices.size();
    if (width < 1) {
        throw InputError(where(nodes.front()) + "node '" + nodes.front().id + "' has no prices");
    }
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k].prices.size() != width) {
            throw InputError(fmt::format("{}node '{}' has {} prices, expected {}", where(nodes[k]), nodes[k].id,
                                         nodes[k].prices.size(), width));
        }
        if (!by_id.emplace(nodes[k].id, k).second) {
            throw InputError(where(nodes[k]) + "duplicate node id '" + nodes[k].id + "'");
        }
    }
    if (asset_names_.empty()) {
        for (std::size_t i = 0; i < width; ++i) {
            asset_names_.push_back(i == 0 ? "numeraire" : fmt::format("asset{}", i));
        }
    } else if (asset_names_.size() != width) {
        throw InputError(fmt::format("{} asset names given but nodes carry {} prices", asset_names_.size(), width));
    }

    std::optional<std::size_t> root_spec;
    std::vector<std::vector<std::size_t>> spec_children(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!nodes[k].parent) {
            if (root_spec) {
                throw InputError(fmt::format("{}second root '{}' (first root is '{}')", where(nodes[k]), nodes[k].id,
                                             nodes[*root_spec].id));
            }
            root_spec = k;
            continue;
        }
        auto it = by_id.find(*nodes[k].parent);
        if (it == by_id.end()) {
            throw InputError(where(nodes[k]) + "node '" + nodes[k].id + "' has unknown parent '" + *nodes[k].parent +
                             "'");
        }
        spec_children[it->second].push_back(k);
    }
    if (!root_spec) {
        throw InputError("tree has no root (every node names a parent)");
    }

    // Depth-first preorder numbering.
    const std::size_t n_nodes = nodes.size();
    std::vector<std::size_t> order;
    order.reserve(n_nodes);
    std::vector<std::size_t> spec_to_node(n_nodes, n_nodes);
    std::vector<std::size_t> stack{*root_spec};
    while (!stack.empty()) {
        const std::size_t k = stack.back();
        stack.pop_back();
        spec_to_node[k] = order.size();
        order.push_back(k);
        for (auto it = spec_children[k].rbegin(); it != spec_children[k].rend(); ++it) {
            stack.push_back(*it);
        }
    }
    if (order.size() != n_nodes) {
        for (std::size_t k = 0; k < n_nodes; ++k) {
            if (spec_to_node[k] == n_nodes) {
                throw InputError(where(nodes[k]) + "node '" + nodes[k].id + "' is not reachable from the root (cycle)");
            }
        }
    }

    ids_.resize(n_nodes);
    lines_.resize(n_nodes);
    parent_.assign(n_nodes, 0);
    children_.assign(n_nodes, {});
    depth_.assign(n_nodes, 0);
    edge_prob_.assign(n_nodes, 1.0);
    path_prob_.assign(n_nodes, 1.0);
    leaf_begin_.assign(n_nodes, 0);
    leaf_end_.assign(n_nodes, 0);
    prices_.resize(static_cast<Eigen::Index>(n_nodes), static_cast<Eigen::Index>(width));
    for (std::size_t n = 0; n < n_nodes; ++n) {
        const NodeSpec& spec = nodes[order[n]];
        ids_[n] = spec.id;
        lines_[n] = spec.line;
        for (std::size_t i = 0; i < width; ++i) {
            prices_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = spec.prices[i];
        }
        for (std::size_t child : spec_children[order[n]]) {
            children_[n].push_back(spec_to_node[child]);
        }
        if (n != 0) {
            edge_prob_[n] = spec.prob;
        }
    }
    for (std::size_t n = 0; n < n_nodes; ++n) {
        for (NodeIndex c : children_[n]) {
            parent_[c] = n;
            depth_[c] = depth_[n] + 1;
            path_prob_[c] = path_prob_[n] * edge_prob_[c];
        }
    }
    for (std::size_t n = 0; n < n_nodes; ++n) {
        if (children_[n].empty()) {
            leaf_begin_[n] = leaf_nodes_.size();
            leaf_nodes_.push_back(n);
        } else {
            internal_.push_back(n);
        }
    }
    // Preorder: the leaf range of a node ends where that of its last child ends.
    for (std::size_t n = n_nodes; n-- > 0;) {
        if (children_[n].empty()) {
            leaf_end_[n] = leaf_begin_[n] + 1;
        } else {
            leaf_begin_[n] = leaf_begin_[children_[n].front()];
            leaf_end_[n] = leaf_end_[children_[n].back()];
        }
    }
    compute_diagnostics();
}

void ScenarioTree::compute_diagnostics() {
    auto& out = diagnostics_;
    if (horizon_ < 1) {
        out.push_back(fmt::format("horizon {} < 1: no trading period", horizon_));
    }
    if (num_risky() < 1) {
        out.push_back("no risky asset: need d >= 1");
    }
    for (NodeIndex n = 0; n < num_nodes(); ++n) {
        for (int i = 0; i < num_assets(); ++i) {
            const double p = prices_(static_cast<Eigen::Index>(n), i);
            if (!std::isfinite(p)) {
                out.push_back(fmt::format("non-finite price of asset {} at node '{}'", i, ids_[n]));
            } else if (p < 0.0) {
                out.push_back(fmt::format("negative price of asset {} at node '{}'", i, ids_[n]));
            }
        }
        if (!(numeraire(n) > 0.0)) {
            out.push_back(fmt::format("numeraire not strictly positive at node '{}'", ids_[n]));
        }
        if (!is_root(n) && !(edge_prob_[n] > 0.0 && std::isfinite(edge_prob_[n]))) {
            out.push_back(fmt::format("edge probability into node '{}' not strictly positive", ids_[n]));
        }
        if (is_leaf(n) && depth_[n] != horizon_) {
            out.push_back(fmt::format("leaf '{}' at depth {}, expected horizon {}", ids_[n], depth_[n], horizon_));
        }
        if (!is_leaf(n)) {
            double sum = 0.0;
            for (NodeIndex c : children_[n]) {
                sum += edge_prob_[c];
            }
            if (std::abs(sum - 1.0) > tol::probability_sum) {
                out.push_back(fmt::format("edge probabilities sum != 1 at node '{}' (sum {:.17g})", ids_[n], sum));
            }
            const double s0 = numeraire(children_[n].front());
            for (NodeIndex c : children_[n]) {
                if (std::abs(numeraire(c) - s0) > 1e-12 * std::max(1.0, std::abs(s0))) {
                    out.push_back(fmt::format("numeraire not predictable: children of node '{}' disagree on S0",
                                              ids_[n]));
                    break;
                }
            }
        }
    }
}

std::optional<NodeIndex> ScenarioTree::find(const std::string& id) const {
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return static_cast<NodeIndex>(it - ids_.begin());
}

Eigen::RowVectorXd ScenarioTree::discounted_increment(NodeIndex n) const {
    const Eigen::RowVectorXd now = discounted_prices(n);
    const Eigen::RowVectorXd before = discounted_prices(parent_[n]);
    return (now - before).tail(num_risky());
}

Eigen::VectorXd ScenarioTree::physical_leaf_probs() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(num_leaves()));
    for (LeafIndex l = 0; l < num_leaves(); ++l) {
        p[static_cast<Eigen::Index>(l)] = path_prob_[leaf_nodes_[l]];
    }
    return p;
}

NodeIndex ScenarioTree::ancestor_at(NodeIndex n, int t) const {
    while (depth_[n] > t) {
        n = parent_[n];
    }
    return n;
}

void ScenarioTree::require_valid() const {
    if (valid()) {
        return;
    }
    std::string msg = "invalid tree:";
    for (const auto& d : diagnostics_) {
        msg += "\n  " + d;
    }
    throw InvalidTree(msg);
}

Strategy::Strategy(const ScenarioTree& tree)
    : positions_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()), tree.num_assets())) {}

Strategy::Strategy(const ScenarioTree& tree, Eigen::MatrixXd positions) : positions_(std::move(positions)) {
    if (positions_.rows() != static_cast<Eigen::Index>(tree.num_nodes()) || positions_.cols() != tree.num_assets()) {
        throw InputError(fmt::format("strategy is {}x{}, tree needs {}x{}", positions_.rows(), positions_.cols(),
                                     tree.num_nodes(), tree.num_assets()));
    }
}

void Strategy::set(NodeIndex n, const Eigen::RowVectorXd& position) {
    if (position.size() != positions_.cols()) {
        throw InputError("position has wrong number of assets");
    }
    positions_.row(static_cast<Eigen::Index>(n)) = position;
}

Strategy Strategy::operator+(const Strategy& other) const {
    Strategy out = *this;
    out.positions_ += other.positions_;
    return out;
}

Strategy Strategy::operator*(double scale) const {
    Strategy out = *this;
    out.positions_ *= scale;
    return out;
}

Claim::Claim(Eigen::VectorXd payoff) : payoff_(std::move(payoff)) {
    for (Eigen::Index l = 0; l < payoff_.size(); ++l) {
        if (!(payoff_[l] >= 0.0) || !std::isfinite(payoff_[l])) {
            throw InputError(fmt::format("claim payoff at leaf {} is {}, must be finite and >= 0", l, payoff_[l]));
        }
    }
}

Eigen::VectorXd discounted_payoff(const ScenarioTree& tree, const Claim& claim) {
    if (claim.size() != tree.num_leaves()) {
        throw InputError(fmt::format("claim has {} payoffs, tree has {} leaves", claim.size(), tree.num_leaves()));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(claim.size()));
    for (LeafIndex l = 0; l < claim.size(); ++l) {
        out[static_cast<Eigen::Index>(l)] = claim[l] / tree.numeraire(tree.leaf_node(l));
    }
    return out;
}

std::vector<std::string> validate_tree(const ScenarioTree& tree) { return tree.diagnostics(); }

namespace {

void check_dims(const ScenarioTree& tree, const Strategy& strategy) {
    if (strategy.num_nodes() != tree.num_nodes() || strategy.num_assets() != tree.num_assets()) {
        throw InputError(fmt::format("strategy is {}x{}, tree needs {}x{}", strategy.num_nodes(),
                                     strategy.num_assets(), tree.num_nodes(), tree.num_assets()));
    }
}

double scale_of(const ScenarioTree& tree) { return tree.numeraire(ScenarioTree::root()); }

}  // namespace

ValueProcess value_process(const ScenarioTree& tree, const Strategy& strategy) {
    tree.require_valid();
    check_dims(tree, strategy);
    const auto n_nodes = static_cast<Eigen::Index>(tree.num_nodes());
    ValueProcess vp{Eigen::VectorXd(n_nodes), Eigen::VectorXd(n_nodes)};
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        const NodeIndex holder = tree.is_root(n) ? n : tree.parent(n);
        const auto k = static_cast<Eigen::Index>(n);
        vp.value[k] = strategy.at(holder).dot(tree.prices(n));
        vp.discounted[k] = strategy.at(holder).dot(tree.discounted_prices(n));
    }
    return vp;
}

Eigen::VectorXd discounted_gains(const ScenarioTree& tree, const Strategy& strategy) {
    tree.require_valid();
    check_dims(tree, strategy);
    Eigen::VectorXd gains = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()));
    for (NodeIndex n = 1; n < tree.num_nodes(); ++n) {
        const NodeIndex p = tree.parent(n);
        gains[static_cast<Eigen::Index>(n)] = gains[static_cast<Eigen::Index>(p)] +
                                              strategy.at(p).tail(tree.num_risky()).dot(tree.discounted_increment(n));
    }
    return gains;
}

SelfFinancingReport is_self_financing(const ScenarioTree& tree, const Strategy& strategy) {
    const ValueProcess vp = value_process(tree, strategy);
    const double scale = scale_of(tree);
    SelfFinancingReport report;
    for (NodeIndex n : tree.internal_nodes()) {
        if (tree.is_root(n)) {
            continue;
        }
        const double rebalanced = strategy.at(n).dot(tree.prices(n));
        const double gap = std::abs(vp.value[static_cast<Eigen::Index>(n)] - rebalanced) / scale;
        report.max_gap = std::max(report.max_gap, gap);
        if (gap > tol::value && !report.first_violation) {
            report.self_financing = false;
            report.first_violation = n;
        }
    }
    if (report.self_financing) {
        const Eigen::VectorXd gains = discounted_gains(tree, strategy);
        const double v0 = vp.discounted[0];
        for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
            const auto k = static_cast<Eigen::Index>(n);
            const double gap = std::abs(vp.discounted[k] - v0 - gains[k]) * scale;
            // The identity is a consequence, so a failure means a precision problem.
            if (gap > 1e3 * tol::value * std::max(1.0, std::abs(vp.discounted[k]) * scale)) {
                throw InvariantViolation(
                    fmt::format("self-financing strategy breaks the discounted gains identity at node '{}' by {:.3g}",
                                tree.id(n), gap));
            }
        }
    }
    return report;
}

bool is_admissible(const ScenarioTree& tree, const Strategy& strategy) {
    const auto sf = is_self_financing(tree, strategy);
    if (!sf.self_financing) {
        throw InputError("is_admissible: strategy is not self-financing (first violation at node '" +
                         tree.id(*sf.first_violation) + "')");
    }
    const ValueProcess vp = value_process(tree, strategy);
    const double scale = scale_of(tree);
    return (vp.value.array() / scale >= -tol::value).all();
}

bool is_arbitrage(const ScenarioTree& tree, const Strategy& strategy) {
    if (!is_self_financing(tree, strategy).self_financing) {
        return false;
    }
    const ValueProcess vp = value_process(tree, strategy);
    const double scale = scale_of(tree);
    if (std::abs(vp.value[0]) / scale > tol::value) {
        return false;
    }
    bool positive = false;
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        const double v = vp.value[static_cast<Eigen::Index>(tree.leaf_node(l))] / scale;
        if (v < -tol::value) {
            return false;
        }
        positive = positive || v > tol::value;
    }
    return positive;
}

Strategy self_financing_from_risky(const ScenarioTree& tree, const Eigen::MatrixXd& risky,
                                   double initial_discounted_value) {
    tree.require_valid();
    const int d = tree.num_risky();
    if (risky.rows() != static_cast<Eigen::Index>(tree.num_nodes()) || risky.cols() != d) {
        throw InputError(fmt::format("risky positions are {}x{}, tree needs {}x{}", risky.rows(), risky.cols(),
                                     tree.num_nodes(), d));
    }
    Strategy out(tree);
    Eigen::VectorXd carried(static_cast<Eigen::Index>(tree.num_nodes()));
    carried[0] = initial_discounted_value;
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        const auto k = static_cast<Eigen::Index>(n);
        if (!tree.is_root(n)) {
            const NodeIndex p = tree.parent(n);
            carried[k] = carried[static_cast<Eigen::Index>(p)] +
                         risky.row(static_cast<Eigen::Index>(p)).dot(tree.discounted_increment(n));
        }
        if (tree.is_leaf(n)) {
            continue;
        }
        const Eigen::RowVectorXd s = tree.discounted_prices(n);
        Eigen::RowVectorXd pos(d + 1);
        pos.tail(d) = risky.row(k);
        pos[0] = carried[k] - risky.row(k).dot(s.tail(d));
        out.set(n, pos);
    }
    return out;
}

PromotionSite promotion_site(const ScenarioTree& tree, const Strategy& strategy) {
    const ValueProcess vp = value_process(tree, strategy);
    const double scale = scale_of(tree);
    PromotionSite site;
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        if (vp.discounted[static_cast<Eigen::Index>(n)] * scale < -tol::value) {
            site.time = std::max(site.time, tree.depth(n));
        }
    }
    if (site.time < 0) {
        return site;
    }
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        if (tree.depth(n) == site.time && vp.discounted[static_cast<Eigen::Index>(n)] * scale < -tol::value) {
            site.atoms.push_back(n);
        }
    }
    return site;
}

Strategy promote_to_admissible(const ScenarioTree& tree, const Strategy& strategy) {
    if (!is_arbitrage(tree, strategy)) {
        throw InputError("promote_to_admissible: input is not a self-financing arbitrage");
    }
    const PromotionSite site = promotion_site(tree, strategy);
    if (site.time < 0) {
        return strategy;
    }
    const ValueProcess vp = value_process(tree, strategy);
    Strategy theta(tree);
    for (NodeIndex a : site.atoms) {
        const double shift = vp.discounted[static_cast<Eigen::Index>(a)];
        // Decision nodes at or below the atom: the leaves of the subtree rooted at a
        // are the contiguous preorder block that follows a.
        NodeIndex last = a;
        while (!tree.is_leaf(last)) {
            last = tree.children(last).back();
        }
        for (NodeIndex m = a; m <= last; ++m) {
            if (tree.is_leaf(m)) {
                continue;
            }
            Eigen::RowVectorXd pos = strategy.at(m);
            pos[0] -= shift;
            theta.set(m, pos);
        }
    }
    return theta;
}

}  // namespace ftap
