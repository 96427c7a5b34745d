#include "ftap/completeness.hpp"

#include "ftap/error.hpp"
#include "ftap/simplex.hpp"
#include "ftap/tolerances.hpp"
#include "lp_programs.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace ftap {

namespace {

constexpr double kRankTol = 1e-9;

int numerical_rank(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd) {
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) {
        return 0;
    }
    int r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        r += s[k] > kRankTol * std::max(1.0, s[0]) ? 1 : 0;
    }
    return r;
}

}  // namespace

Eigen::MatrixXd gains_space(const ScenarioTree& tree) {
    tree.require_valid();
    const int d = tree.num_risky();
    const auto n_leaves = static_cast<Eigen::Index>(tree.num_leaves());
    const auto n_cols = 1 + static_cast<Eigen::Index>(tree.internal_nodes().size()) * d;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_leaves, n_cols);
    h.col(0).setOnes();
    Eigen::Index col = 1;
    for (NodeIndex n : tree.internal_nodes()) {
        for (NodeIndex c : tree.children(n)) {
            const Eigen::RowVectorXd inc = tree.discounted_increment(c);
            for (LeafIndex l = tree.leaf_begin(c); l < tree.leaf_end(c); ++l) {
                h.block(static_cast<Eigen::Index>(l), col, 1, d) = inc;
            }
        }
        col += d;
    }
    return h;
}

EmmPolytope emm_polytope(const ScenarioTree& tree, const Measure& base) {
    const auto check = is_martingale_measure(tree, base, tol::martingale);
    if (!check.is_martingale) {
        throw InputError(fmt::format("base measure is not an EMM (residual {:.3g} at node '{}')",
                                     check.worst_residual, tree.id(check.worst_node)));
    }
    // Directions d satisfy H^T d = 0: sum zero (constant column) and every
    // martingale equality. X = d / P* is then orthogonal to H in L^2(P*).
    const Eigen::MatrixXd ht = gains_space(tree).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ht, Eigen::ComputeFullV);
    const int rank = numerical_rank(svd);
    const auto n_leaves = static_cast<Eigen::Index>(tree.num_leaves());
    const auto dim = n_leaves - rank;
    return EmmPolytope{base, svd.matrixV().rightCols(dim), static_cast<int>(dim)};
}

CompletenessReport completeness_report(const ScenarioTree& tree) {
    auto emm = find_emm(tree);
    if (!emm) {
        throw InputError("market admits arbitrage; completeness is only defined on arbitrage-free trees");
    }
    const EmmPolytope poly = emm_polytope(tree, *emm);
    std::size_t max_children = 0;
    for (NodeIndex n : tree.internal_nodes()) {
        max_children = std::max(max_children, tree.children(n).size());
    }
    CompletenessReport report{poly.dimension == 0, poly.dimension, max_children, *emm};
    if (report.complete && max_children > static_cast<std::size_t>(tree.num_risky()) + 1) {
        throw InvariantViolation(fmt::format("complete verdict on a node with {} children but d+1 = {}",
                                             max_children, tree.num_risky() + 1));
    }
    return report;
}

bool is_complete(const ScenarioTree& tree) { return completeness_report(tree).complete; }

ReplicationResult replicate(const ScenarioTree& tree, const Claim& claim) {
    tree.require_valid();
    const Eigen::VectorXd target = discounted_payoff(tree, claim);
    const int d = tree.num_risky();
    const auto n_nodes = static_cast<Eigen::Index>(tree.num_nodes());
    Eigen::VectorXd continuation(n_nodes);
    Eigen::MatrixXd risky = Eigen::MatrixXd::Zero(n_nodes, d);
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        continuation[static_cast<Eigen::Index>(tree.leaf_node(l))] = target[static_cast<Eigen::Index>(l)];
    }
    // Preorder: children have larger indices than their parent.
    const auto& internal = tree.internal_nodes();
    for (auto it = internal.rbegin(); it != internal.rend(); ++it) {
        const NodeIndex n = *it;
        const auto kids = tree.children(n);
        const auto k = static_cast<Eigen::Index>(kids.size());
        Eigen::MatrixXd design(k, d + 1);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index r = 0; r < k; ++r) {
            design(r, 0) = 1.0;
            design.block(r, 1, 1, d) = tree.discounted_increment(kids[static_cast<std::size_t>(r)]);
            rhs[r] = continuation[static_cast<Eigen::Index>(kids[static_cast<std::size_t>(r)])];
        }
        const Eigen::VectorXd fit = design.completeOrthogonalDecomposition().solve(rhs);
        continuation[static_cast<Eigen::Index>(n)] = fit[0];
        risky.row(static_cast<Eigen::Index>(n)) = fit.tail(d).transpose();
    }
    ReplicationResult out;
    out.strategy = self_financing_from_risky(tree, risky, continuation[0]);
    const ValueProcess vp = value_process(tree, out.strategy);
    out.initial_price = vp.value[0];
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        const double miss = std::abs(vp.value[static_cast<Eigen::Index>(tree.leaf_node(l))] - claim[l]);
        out.residual = std::max(out.residual, miss);
    }
    out.attainable = out.residual <= tol::replication;
    return out;
}

ValueProcess price(const ScenarioTree& tree, const Claim& claim, const Measure& measure) {
    const auto check = is_martingale_measure(tree, measure, tol::martingale);
    if (!check.is_martingale) {
        throw InputError(fmt::format("pricing measure is not an EMM (residual {:.3g} at node '{}')",
                                     check.worst_residual, tree.id(check.worst_node)));
    }
    const Eigen::VectorXd target = discounted_payoff(tree, claim);
    const Eigen::VectorXd cond = measure.conditional_probs(tree);
    const auto n_nodes = static_cast<Eigen::Index>(tree.num_nodes());
    ValueProcess vp{Eigen::VectorXd::Zero(n_nodes), Eigen::VectorXd::Zero(n_nodes)};
    for (NodeIndex n = tree.num_nodes(); n-- > 0;) {
        const auto k = static_cast<Eigen::Index>(n);
        if (tree.is_leaf(n)) {
            vp.discounted[k] = target[static_cast<Eigen::Index>(tree.leaf_begin(n))];
        } else {
            double e = 0.0;
            for (NodeIndex c : tree.children(n)) {
                e += cond[static_cast<Eigen::Index>(c)] * vp.discounted[static_cast<Eigen::Index>(c)];
            }
            vp.discounted[k] = e;
        }
        vp.value[k] = vp.discounted[k] * tree.numeraire(n);
    }
    return vp;
}

std::optional<Eigen::VectorXd> orthogonal_direction(const ScenarioTree& tree, const Measure& base) {
    const EmmPolytope poly = emm_polytope(tree, base);
    if (poly.dimension == 0) {
        return std::nullopt;
    }
    const Eigen::VectorXd& q = base.leaf_prob();
    // Largest L^2(P*) norm wins; ties go to the direction whose peak |X| sits
    // at the lowest leaf index.
    Eigen::Index best = -1;
    double best_norm = 0.0;
    Eigen::Index best_peak = 0;
    for (Eigen::Index k = 0; k < poly.directions.cols(); ++k) {
        const Eigen::VectorXd x = poly.directions.col(k).cwiseQuotient(q);
        const double norm = std::sqrt(q.dot(x.cwiseAbs2()));
        Eigen::Index peak = 0;
        x.cwiseAbs().maxCoeff(&peak);
        const bool tie = best >= 0 && std::abs(norm - best_norm) <= 1e-12 * std::max(1.0, best_norm);
        if (best < 0 || (!tie && norm > best_norm) || (tie && peak < best_peak)) {
            best = k;
            best_norm = norm;
            best_peak = peak;
        }
    }
    Eigen::VectorXd x = poly.directions.col(best).cwiseQuotient(q);
    x /= x.cwiseAbs().maxCoeff();
    for (Eigen::Index l = 0; l < x.size(); ++l) {
        if (std::abs(x[l]) > 1e-12) {
            if (x[l] < 0) {
                x = -x;
            }
            break;
        }
    }
    return x;
}

std::optional<Measure> second_measure(const ScenarioTree& tree, const Measure& base, int sign) {
    if (sign != 1 && sign != -1) {
        throw InputError("second_measure: sign must be +1 or -1");
    }
    auto x = orthogonal_direction(tree, base);
    if (!x) {
        return std::nullopt;
    }
    const double sup = x->cwiseAbs().maxCoeff();
    Eigen::VectorXd q = base.leaf_prob().array() * (1.0 + sign * x->array() / (2.0 * sup));
    return normalised_measure(std::move(q));
}

std::optional<Measure> unique_emm_nodewise(const ScenarioTree& tree) {
    tree.require_valid();
    const int d = tree.num_risky();
    Eigen::VectorXd cond = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(tree.num_nodes()));
    for (NodeIndex n : tree.internal_nodes()) {
        const auto kids = tree.children(n);
        const auto k = static_cast<Eigen::Index>(kids.size());
        Eigen::MatrixXd a(d + 1, k);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
        b[0] = 1.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            a(0, c) = 1.0;
            a.block(1, c, d, 1) = tree.discounted_increment(kids[static_cast<std::size_t>(c)]).transpose();
        }
        const auto cod = a.completeOrthogonalDecomposition();
        if (cod.rank() != k) {
            return std::nullopt;
        }
        const Eigen::VectorXd q = cod.solve(b);
        if ((a * q - b).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) ||
            (q.array() <= 0.0).any()) {
            return std::nullopt;
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            cond[static_cast<Eigen::Index>(kids[static_cast<std::size_t>(c)])] = q[c];
        }
    }
    Eigen::VectorXd node = Eigen::VectorXd::Ones(cond.size());
    for (NodeIndex n = 1; n < tree.num_nodes(); ++n) {
        node[static_cast<Eigen::Index>(n)] = node[static_cast<Eigen::Index>(tree.parent(n))] *
                                             cond[static_cast<Eigen::Index>(n)];
    }
    Eigen::VectorXd leaves(static_cast<Eigen::Index>(tree.num_leaves()));
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        leaves[static_cast<Eigen::Index>(l)] = node[static_cast<Eigen::Index>(tree.leaf_node(l))];
    }
    return normalised_measure(std::move(leaves));
}

PriceBounds price_bounds(const ScenarioTree& tree, const Claim& claim) {
    tree.require_valid();
    const Eigen::VectorXd target = discounted_payoff(tree, claim);
    auto disc = [&tree](NodeIndex n, int j) { return tree.discounted(n, j + 1); };
    auto solve_with = [&](double sign) {
        lp::LinearProgram<double> prog;
        detail::add_martingale_polytope<double>(prog, tree, disc);
        for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
            prog.set_cost(l, sign * target[static_cast<Eigen::Index>(l)]);
        }
        const auto res = lp::solve<double>(prog, 1e-11, 1e-9);
        if (res.status == lp::Status::infeasible) {
            throw InputError("price_bounds: no martingale measure exists");
        }
        if (res.status != lp::Status::optimal) {
            throw NumericalError("price_bounds LP failed");
        }
        return sign * res.objective * tree.numeraire(ScenarioTree::root());
    };
    return PriceBounds{solve_with(1.0) + 0.0, solve_with(-1.0) + 0.0};
}

}  // namespace ftap
