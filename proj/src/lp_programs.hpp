#pragma once

// LP fragments shared by the arbitrage and completeness modules.

#include "ftap/market.hpp"
#include "ftap/simplex.hpp"

#include <utility>
#include <vector>

namespace ftap::detail {

/// Adds one variable per leaf (indices 0..L-1, zero cost), the row
/// sum q = 1 and, for every internal node and risky asset j,
/// sum_c Q(c) (S~^j(c) - S~^j(node)) = 0 where Q(c) is the mass below c.
/// `disc(n, j)` is the discounted price of risky asset j (0-based) at node n.
template <class Scalar, class Disc>
void add_martingale_polytope(lp::LinearProgram<Scalar>& prog, const ScenarioTree& tree, Disc disc) {
    using Terms = std::vector<std::pair<std::size_t, Scalar>>;
    const std::size_t n_leaves = tree.num_leaves();
    for (std::size_t l = 0; l < n_leaves; ++l) {
        prog.add_variable(Scalar(0));
    }
    Terms sum;
    for (std::size_t l = 0; l < n_leaves; ++l) {
        sum.emplace_back(l, Scalar(1));
    }
    prog.add_row(sum, lp::Sense::eq, Scalar(1));
    for (NodeIndex n : tree.internal_nodes()) {
        for (int j = 0; j < tree.num_risky(); ++j) {
            Terms row;
            for (NodeIndex c : tree.children(n)) {
                Scalar inc = disc(c, j) - disc(n, j);
                if (inc == Scalar(0)) {
                    continue;
                }
                for (LeafIndex l = tree.leaf_begin(c); l < tree.leaf_end(c); ++l) {
                    row.emplace_back(l, inc);
                }
            }
            if (!row.empty()) {
                prog.add_row(row, lp::Sense::eq, Scalar(0));
            }
        }
    }
}

}  // namespace ftap::detail
