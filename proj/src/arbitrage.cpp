#include "ftap/arbitrage.hpp"

#include "ftap/error.hpp"
#include "ftap/simplex.hpp"
#include "ftap/tolerances.hpp"
#include "lp_programs.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ftap {

Measure::Measure(Eigen::VectorXd leaf_prob) : leaf_prob_(std::move(leaf_prob)) {
    if (leaf_prob_.size() == 0) {
        throw InputError("measure has no leaves");
    }
    for (Eigen::Index l = 0; l < leaf_prob_.size(); ++l) {
        if (!(leaf_prob_[l] > 0.0) || !std::isfinite(leaf_prob_[l])) {
            throw InputError(fmt::format("measure is not strictly positive: leaf {} has probability {:.17g}", l,
                                         leaf_prob_[l]));
        }
    }
    const double sum = leaf_prob_.sum();
    if (std::abs(sum - 1.0) > tol::probability_sum) {
        throw InputError(fmt::format("measure sums to {:.17g}, not 1", sum));
    }
}

Measure normalised_measure(Eigen::VectorXd leaf_prob) {
    const double sum = leaf_prob.sum();
    if (!(sum > 0.0)) {
        throw InputError("cannot normalise a measure with nonpositive mass");
    }
    leaf_prob /= sum;
    return Measure(std::move(leaf_prob));
}

Eigen::VectorXd Measure::node_probs(const ScenarioTree& tree) const {
    if (size() != tree.num_leaves()) {
        throw InputError(fmt::format("measure has {} leaves, tree has {}", size(), tree.num_leaves()));
    }
    Eigen::VectorXd prefix(leaf_prob_.size() + 1);
    prefix[0] = 0.0;
    for (Eigen::Index l = 0; l < leaf_prob_.size(); ++l) {
        prefix[l + 1] = prefix[l] + leaf_prob_[l];
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(tree.num_nodes()));
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        if (tree.is_leaf(n)) {
            out[static_cast<Eigen::Index>(n)] = leaf_prob_[static_cast<Eigen::Index>(tree.leaf_begin(n))];
        } else {
            out[static_cast<Eigen::Index>(n)] = prefix[static_cast<Eigen::Index>(tree.leaf_end(n))] -
                                                prefix[static_cast<Eigen::Index>(tree.leaf_begin(n))];
        }
    }
    return out;
}

Eigen::VectorXd Measure::conditional_probs(const ScenarioTree& tree) const {
    const Eigen::VectorXd np = node_probs(tree);
    Eigen::VectorXd out(np.size());
    out[0] = 1.0;
    for (NodeIndex n = 1; n < tree.num_nodes(); ++n) {
        out[static_cast<Eigen::Index>(n)] = np[static_cast<Eigen::Index>(n)] /
                                            np[static_cast<Eigen::Index>(tree.parent(n))];
    }
    return out;
}

Eigen::VectorXd Measure::density(const ScenarioTree& tree) const {
    if (size() != tree.num_leaves()) {
        throw InputError("measure does not match tree");
    }
    return leaf_prob_.cwiseQuotient(tree.physical_leaf_probs());
}

MartingaleCheck is_martingale_measure(const ScenarioTree& tree, const Measure& measure, double tolerance) {
    tree.require_valid();
    const Eigen::VectorXd cond = measure.conditional_probs(tree);
    MartingaleCheck check;
    for (NodeIndex n : tree.internal_nodes()) {
        for (int i = 1; i <= tree.num_risky(); ++i) {
            double mean = 0.0;
            for (NodeIndex c : tree.children(n)) {
                mean += cond[static_cast<Eigen::Index>(c)] * tree.discounted(c, i);
            }
            const double residual = std::abs(mean - tree.discounted(n, i));
            if (residual > check.worst_residual) {
                check.worst_residual = residual;
                check.worst_node = n;
                check.worst_asset = i;
            }
        }
    }
    check.is_martingale = check.worst_residual <= tolerance;
    return check;
}

namespace {

// LP builders shared by the floating-point and rational modes.

template <class Scalar, class Disc>
lp::LinearProgram<Scalar> emm_program(const ScenarioTree& tree, Disc disc) {
    lp::LinearProgram<Scalar> prog;
    detail::add_martingale_polytope<Scalar>(prog, tree, disc);
    const std::size_t t_var = prog.add_variable(Scalar(-1));
    for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
        prog.add_row({{l, Scalar(1)}, {t_var, Scalar(-1)}}, lp::Sense::ge, Scalar(0));
    }
    return prog;
}

struct ArbitrageLayout {
    std::vector<std::size_t> internal_slot;  // node -> position in internal_nodes, or npos
};

template <class Scalar, class Disc>
lp::LinearProgram<Scalar> arbitrage_program(const ScenarioTree& tree, Disc disc, ArbitrageLayout& layout) {
    const std::size_t npos = static_cast<std::size_t>(-1);
    const int d = tree.num_risky();
    layout.internal_slot.assign(tree.num_nodes(), npos);
    for (std::size_t k = 0; k < tree.internal_nodes().size(); ++k) {
        layout.internal_slot[tree.internal_nodes()[k]] = k;
    }
    const std::size_t n_vars = tree.internal_nodes().size() * static_cast<std::size_t>(d);
    std::vector<Scalar> cost(n_vars, Scalar(0));
    std::vector<std::vector<std::pair<std::size_t, Scalar>>> rows;
    std::vector<Scalar> rhs;
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        std::vector<std::pair<std::size_t, Scalar>> row;
        Scalar offset(0);
        for (NodeIndex m = tree.leaf_node(l); !tree.is_root(m); m = tree.parent(m)) {
            const NodeIndex p = tree.parent(m);
            for (int j = 0; j < d; ++j) {
                Scalar inc = disc(m, j) - disc(p, j);
                if (inc == Scalar(0)) {
                    continue;
                }
                const std::size_t var = layout.internal_slot[p] * static_cast<std::size_t>(d) +
                                        static_cast<std::size_t>(j);
                offset += inc;
                cost[var] -= inc;
                row.emplace_back(var, std::move(inc));
            }
        }
        rows.push_back(std::move(row));
        rhs.push_back(std::move(offset));
    }
    // Positions are alpha = beta - 1 with beta in [0, 2].
    lp::LinearProgram<Scalar> prog;
    for (std::size_t v = 0; v < n_vars; ++v) {
        prog.add_variable(cost[v]);
    }
    for (std::size_t l = 0; l < rows.size(); ++l) {
        prog.add_row(rows[l], lp::Sense::ge, rhs[l]);
    }
    for (std::size_t v = 0; v < n_vars; ++v) {
        prog.add_row({{v, Scalar(1)}}, lp::Sense::le, Scalar(2));
    }
    return prog;
}

auto double_disc(const ScenarioTree& tree) {
    return [&tree](NodeIndex n, int j) { return tree.discounted(n, j + 1); };
}

constexpr double kLpEps = 1e-11;
constexpr double kLpFeasibility = 1e-9;
constexpr double kPositiveProb = 1e-9;
constexpr double kPositiveGain = 1e-9;

std::string describe(lp::Status st) {
    switch (st) {
        case lp::Status::optimal: return "optimal";
        case lp::Status::infeasible: return "infeasible";
        case lp::Status::unbounded: return "unbounded";
        case lp::Status::iteration_limit: return "iteration limit";
    }
    return "unknown";
}

struct EmmSolve {
    std::optional<double> optimum;
    Eigen::VectorXd q;
};

EmmSolve solve_emm(const ScenarioTree& tree) {
    tree.require_valid();
    const auto prog = emm_program<double>(tree, double_disc(tree));
    const auto res = lp::solve<double>(prog, kLpEps, kLpFeasibility);
    EmmSolve out;
    if (res.status == lp::Status::infeasible) {
        return out;
    }
    if (res.status != lp::Status::optimal) {
        throw NumericalError("martingale-measure LP failed: " + describe(res.status));
    }
    out.q.resize(static_cast<Eigen::Index>(tree.num_leaves()));
    for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
        out.q[static_cast<Eigen::Index>(l)] = res.x[l];
    }
    out.optimum = res.x[tree.num_leaves()];
    return out;
}

}  // namespace

std::optional<double> emm_max_min_probability(const ScenarioTree& tree) { return solve_emm(tree).optimum; }

std::optional<Measure> find_emm(const ScenarioTree& tree) {
    EmmSolve s = solve_emm(tree);
    if (!s.optimum || *s.optimum <= kPositiveProb) {
        return std::nullopt;
    }
    Measure m = normalised_measure(s.q.cwiseMax(0.0));
    const auto check = is_martingale_measure(tree, m, tol::martingale);
    if (!check.is_martingale) {
        throw NumericalError(fmt::format("LP measure fails the martingale check (residual {:.3g} at node '{}')",
                                         check.worst_residual, tree.id(check.worst_node)));
    }
    return m;
}

std::optional<Strategy> find_self_financing_arbitrage(const ScenarioTree& tree) {
    tree.require_valid();
    ArbitrageLayout layout;
    const auto prog = arbitrage_program<double>(tree, double_disc(tree), layout);
    const auto res = lp::solve<double>(prog, kLpEps, kLpFeasibility);
    if (res.status != lp::Status::optimal) {
        throw NumericalError("arbitrage LP failed: " + describe(res.status));
    }
    const int d = tree.num_risky();
    Eigen::MatrixXd risky = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()), d);
    for (NodeIndex n : tree.internal_nodes()) {
        for (int j = 0; j < d; ++j) {
            risky(static_cast<Eigen::Index>(n), j) =
                res.x[layout.internal_slot[n] * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] - 1.0;
        }
    }
    Strategy phi = self_financing_from_risky(tree, risky, 0.0);
    const Eigen::VectorXd gains = discounted_gains(tree, phi);
    const double scale = tree.numeraire(ScenarioTree::root());
    double total = 0.0;
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        total += gains[static_cast<Eigen::Index>(tree.leaf_node(l))] * scale;
    }
    if (total <= kPositiveGain) {
        return std::nullopt;
    }
    return phi;
}

std::optional<Strategy> find_arbitrage(const ScenarioTree& tree) {
    const bool emm = find_emm(tree).has_value();
    auto phi = find_self_financing_arbitrage(tree);
    if (emm && phi) {
        throw InvariantViolation("both an equivalent martingale measure and an arbitrage were found");
    }
    if (!emm && !phi) {
        throw InvariantViolation("neither an equivalent martingale measure nor an arbitrage was found");
    }
    if (!phi) {
        return std::nullopt;
    }
    if (!is_arbitrage(tree, *phi)) {
        throw InvariantViolation("dual certificate is not a self-financing arbitrage");
    }
    Strategy theta = promote_to_admissible(tree, *phi);
    if (!is_admissible(tree, theta) || !is_arbitrage(tree, theta)) {
        throw InvariantViolation("promoted certificate is not an admissible arbitrage");
    }
    return theta;
}

ArbitrageCertificate fftap_verdict(const ScenarioTree& tree) {
    if (auto emm = find_emm(tree)) {
        if (!is_martingale_measure(tree, *emm, tol::martingale).is_martingale) {
            throw InvariantViolation("EMM certificate fails its martingale check");
        }
        return ArbitrageCertificate(std::move(*emm));
    }
    auto arb = find_arbitrage(tree);
    if (!arb) {
        throw InvariantViolation("no EMM and no arbitrage");
    }
    return ArbitrageCertificate(std::move(*arb));
}

ExactMarket::ExactMarket(const ScenarioTree& t) : tree(&t) {
    t.require_valid();
    discounted.resize(t.num_nodes());
    for (NodeIndex n = 0; n < t.num_nodes(); ++n) {
        const Rational s0 = rational_from_double(t.numeraire(n));
        for (int j = 1; j <= t.num_risky(); ++j) {
            discounted[n].push_back(rational_from_double(t.price(n, j)) / s0);
        }
    }
}

ExactVerdict fftap_verdict_exact(const ScenarioTree& tree) {
    const ExactMarket market(tree);
    auto disc = [&market](NodeIndex n, int j) -> const Rational& { return market.discounted[n][static_cast<std::size_t>(j)]; };
    const int d = tree.num_risky();
    ExactVerdict out;

    const auto emm_prog = emm_program<Rational>(tree, disc);
    const auto emm_res = lp::solve<Rational>(emm_prog, Rational(0), Rational(0));
    if (emm_res.status == lp::Status::optimal && emm_res.x[tree.num_leaves()] > 0) {
        out.has_emm = true;
        out.min_prob = emm_res.x[tree.num_leaves()];
        out.leaf_prob.assign(emm_res.x.begin(), emm_res.x.begin() + static_cast<std::ptrdiff_t>(tree.num_leaves()));
        // Exact verification.
        Rational total(0);
        for (const auto& q : out.leaf_prob) {
            if (!(q > 0)) {
                throw InvariantViolation("exact EMM has a non-positive leaf");
            }
            total += q;
        }
        if (total != 1) {
            throw InvariantViolation("exact EMM does not sum to 1");
        }
        for (NodeIndex n : tree.internal_nodes()) {
            for (int j = 0; j < d; ++j) {
                Rational residual(0);
                for (NodeIndex c : tree.children(n)) {
                    Rational mass(0);
                    for (LeafIndex l = tree.leaf_begin(c); l < tree.leaf_end(c); ++l) {
                        mass += out.leaf_prob[l];
                    }
                    residual += mass * (disc(c, j) - disc(n, j));
                }
                if (residual != 0) {
                    throw InvariantViolation("exact EMM violates a martingale equality");
                }
            }
        }
        return out;
    }
    if (emm_res.status != lp::Status::optimal && emm_res.status != lp::Status::infeasible) {
        throw NumericalError("exact martingale-measure LP failed: " + describe(emm_res.status));
    }

    ArbitrageLayout layout;
    const auto arb_prog = arbitrage_program<Rational>(tree, disc, layout);
    const auto arb_res = lp::solve<Rational>(arb_prog, Rational(0), Rational(0));
    if (arb_res.status != lp::Status::optimal) {
        throw NumericalError("exact arbitrage LP failed: " + describe(arb_res.status));
    }
    std::vector<std::vector<Rational>> alpha(tree.num_nodes(), std::vector<Rational>(static_cast<std::size_t>(d)));
    for (NodeIndex n : tree.internal_nodes()) {
        for (int j = 0; j < d; ++j) {
            alpha[n][static_cast<std::size_t>(j)] =
                arb_res.x[layout.internal_slot[n] * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] - 1;
        }
    }
    auto values_of = [&](const std::vector<std::vector<Rational>>& pos) {
        std::vector<Rational> v(tree.num_nodes(), Rational(0));
        for (NodeIndex n = 1; n < tree.num_nodes(); ++n) {
            const NodeIndex p = tree.parent(n);
            Rational g = v[p];
            for (int j = 0; j < d; ++j) {
                g += pos[p][static_cast<std::size_t>(j)] * (disc(n, j) - disc(p, j));
            }
            v[n] = g;
        }
        return v;
    };
    const std::vector<Rational> v_phi = values_of(alpha);
    // Admissibility surgery on the risky legs; the numeraire leg follows from
    // self-financing with zero initial value.
    int t = -1;
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        if (v_phi[n] < 0) {
            t = std::max(t, tree.depth(n));
        }
    }
    std::vector<std::vector<Rational>> theta = alpha;
    if (t >= 0) {
        for (NodeIndex m = 0; m < tree.num_nodes(); ++m) {
            const bool active =
                tree.depth(m) >= t && v_phi[tree.ancestor_at(m, t)] < 0 && !tree.is_leaf(m);
            if (!active) {
                std::fill(theta[m].begin(), theta[m].end(), Rational(0));
            }
        }
    }
    const std::vector<Rational> v_theta = values_of(theta);
    bool positive = false;
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        if (v_theta[n] < 0) {
            throw InvariantViolation("exact arbitrage is not admissible");
        }
    }
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        const Rational& g = v_theta[tree.leaf_node(l)];
        positive = positive || g > 0;
        out.terminal_gains.push_back(g);
    }
    if (!positive) {
        throw InvariantViolation("exact LPs found neither an EMM nor an arbitrage");
    }
    out.risky = theta;
    Eigen::MatrixXd risky = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()), d);
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        for (int j = 0; j < d; ++j) {
            risky(static_cast<Eigen::Index>(n), j) = to_double(theta[n][static_cast<std::size_t>(j)]);
        }
    }
    out.arbitrage = self_financing_from_risky(tree, risky, 0.0);
    return out;
}

}  // namespace ftap
