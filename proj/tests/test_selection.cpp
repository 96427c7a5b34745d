#include "oracles.hpp"

#include "ftap/completeness.hpp"
#include "ftap/error.hpp"
#include "ftap/fuzz.hpp"
#include "ftap/selection.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ftap;
using oracle::node;

namespace {

double entropy_of(const ScenarioTree& t, const Eigen::VectorXd& q) {
    const Eigen::VectorXd p = t.physical_leaf_probs();
    double s = 0.0;
    for (Eigen::Index l = 0; l < q.size(); ++l) {
        if (q[l] > 0) s += q[l] * std::log(q[l] / p[l]);
    }
    return s;
}

double quadratic_of(const ScenarioTree& t, const Eigen::VectorXd& q) {
    return 0.5 * q.cwiseAbs2().cwiseQuotient(t.physical_leaf_probs()).sum();
}

Eigen::VectorXd quadratic_oracle(const ScenarioTree& t) {
    const Eigen::VectorXd proj = oracle::weighted_projection(t);
    if (proj.minCoeff() >= 0.0) return proj;
    return oracle::quadratic_by_supports(t);
}

/// Small incomplete trees the enumeration oracles can handle.
std::vector<ScenarioTree> small_incomplete(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::vector<ScenarioTree> out;
    while (static_cast<int>(out.size()) < count) {
        ScenarioTree t = random_tree(rng);
        if (t.num_leaves() > 14) continue;
        const auto q = find_emm(t);
        if (!q) continue;
        const int dim = emm_polytope(t, *q).dimension;
        if (dim < 1 || dim > 2) continue;
        out.push_back(std::move(t));
    }
    return out;
}

// Same prices as the trinomial, uneven physical weights.
ScenarioTree skewed_trinomial() { return oracle::one_period(4, {8, 4, 2}, {0.6, 0.3, 0.1}); }

}  // namespace

TEST(Divergence, Specs) {
    const auto e = DivergenceSpec::entropy();
    EXPECT_DOUBLE_EQ(e.v(0.0), 0.0);
    EXPECT_NEAR(e.v(2.0), 2 * std::log(2.0), 1e-15);
    EXPECT_TRUE(e.steep);
    const auto q = DivergenceSpec::quadratic();
    EXPECT_EQ(q.domain, Domain::real);
    EXPECT_DOUBLE_EQ(q.second(3.0), 1.0);
    EXPECT_THROW(DivergenceSpec::custom("concave", [](double y) { return -y * y; }, [](double y) { return -2 * y; }),
                 InputError);
    const auto c = DivergenceSpec::custom("cubic", [](double y) { return y * y * y; }, [](double y) { return 3 * y * y; });
    EXPECT_NEAR(c.second(1.0), 6.0, 1e-5);
}

TEST(Divergence, ValueOnTheTrinomial) {
    const ScenarioTree t = oracle::trinomial();
    const Eigen::Vector3d q(0.25, 0.25, 0.5);
    EXPECT_NEAR(divergence(t, DivergenceSpec::entropy(), q), entropy_of(t, q), 1e-14);
    EXPECT_NEAR(divergence(t, DivergenceSpec::quadratic(), q), quadratic_of(t, q), 1e-14);
}

TEST(MinimalDivergence, EntropyTrinomialMatchesGrid) {
    for (const ScenarioTree& t : {oracle::trinomial(), skewed_trinomial()}) {
        const SelectedMeasure m = minimal_divergence_measure(t, DivergenceSpec::entropy());
        const Eigen::VectorXd grid = oracle::grid_minimise(t, [&](const Eigen::VectorXd& q) { return entropy_of(t, q); });
        EXPECT_LT((m.leaf_prob - grid).cwiseAbs().maxCoeff(), 1e-6);
        ASSERT_TRUE(m.measure);
        EXPECT_FALSE(m.on_boundary);
        EXPECT_TRUE(is_martingale_measure(t, *m.measure).is_martingale);
    }
}

TEST(MinimalDivergence, QuadraticTrinomialIsTheProjection) {
    const ScenarioTree t = oracle::trinomial();
    const SelectedMeasure m = minimal_divergence_measure(t, DivergenceSpec::quadratic());
    const Eigen::VectorXd proj = oracle::weighted_projection(t);
    ASSERT_GE(proj.minCoeff(), 0.0);
    EXPECT_LT((m.leaf_prob - proj).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(m.leaf_prob[0], 3.0 / 19, 1e-9);
}

TEST(MinimalDivergence, QuadraticCanLandOnTheBoundary) {
    // Most physical weight just below the spot: the projection goes negative.
    const ScenarioTree t = oracle::one_period(4, {8, 6, 3, 2}, {1.0 / 44, 1.0 / 44, 40.0 / 44, 2.0 / 44});
    ASSERT_LT(oracle::weighted_projection(t).minCoeff(), 0.0);
    const SelectedMeasure m = minimal_divergence_measure(t, DivergenceSpec::quadratic());
    EXPECT_TRUE(m.on_boundary);
    EXPECT_FALSE(m.measure);
    const Eigen::VectorXd oracle_q = quadratic_oracle(t);
    EXPECT_LT((m.leaf_prob - oracle_q).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MinimalDivergence, UniqueEmmOnCompleteMarket) {
    const ScenarioTree t = oracle::binomial();
    const SelectedMeasure m = minimal_divergence_measure(t, DivergenceSpec::entropy());
    EXPECT_NEAR(m.leaf_prob[0], 1.0 / 3, 1e-12);
}

TEST(MinimalDivergence, RejectsArbitrage) {
    EXPECT_THROW(minimal_divergence_measure(oracle::binomial(4, 8, 4.4), DivergenceSpec::entropy()), InputError);
}

TEST(MinimalDivergence, FuzzedAgainstOracles) {
    for (const ScenarioTree& t : small_incomplete(41, 12)) {
        const SelectedMeasure e = minimal_divergence_measure(t, DivergenceSpec::entropy());
        const Eigen::VectorXd eg = oracle::grid_minimise(t, [&](const Eigen::VectorXd& q) { return entropy_of(t, q); });
        EXPECT_LT((e.leaf_prob - eg).cwiseAbs().maxCoeff(), 1e-6);
        const SelectedMeasure q = minimal_divergence_measure(t, DivergenceSpec::quadratic());
        EXPECT_LT((q.leaf_prob - quadratic_oracle(t)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(MinimalDivergence, NoPolytopePointDoesBetter) {
    std::mt19937_64 rng(42);
    for (const ScenarioTree& t : small_incomplete(43, 8)) {
        const auto verts = oracle::polytope_vertices(t);
        for (const DivergenceSpec& spec : {DivergenceSpec::entropy(), DivergenceSpec::quadratic()}) {
            const SelectedMeasure m = minimal_divergence_measure(t, spec);
            for (const auto& v : verts) EXPECT_LE(m.divergence, divergence(t, spec, v) + 1e-12);
            std::gamma_distribution<double> g(1.0, 1.0);
            for (int k = 0; k < 100; ++k) {
                Eigen::VectorXd w(static_cast<Eigen::Index>(verts.size()));
                for (auto& x : w) x = g(rng);
                w /= w.sum();
                Eigen::VectorXd q = Eigen::VectorXd::Zero(verts.front().size());
                for (std::size_t i = 0; i < verts.size(); ++i) q += w[static_cast<Eigen::Index>(i)] * verts[i];
                EXPECT_LE(m.divergence, divergence(t, spec, q) + 1e-12);
            }
        }
    }
}

TEST(Legendre, EntropyDualMatchesNumericInfimum) {
    const UtilitySpec u = legendre_dual(DivergenceSpec::entropy());
    for (double x : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
        EXPECT_NEAR(u.u(x), -std::exp(-1 - x), 1e-14);
        // inf_y y log y + x y by a fine scan.
        double best = 0.0;
        for (int i = 1; i <= 200000; ++i) {
            const double y = i * 1e-4;
            best = std::min(best, y * std::log(y) + x * y);
        }
        EXPECT_NEAR(u.u(x), best, 1e-7);
    }
}

TEST(Legendre, CustomRootSolveMatchesClosedForm) {
    const auto spec =
        DivergenceSpec::custom("xlogx", [](double y) { return y > 0 ? y * std::log(y) : 0.0; },
                               [](double y) { return std::log(y) + 1; }, [](double y) { return 1 / y; },
                               Domain::nonnegative, true);
    const UtilitySpec u = legendre_dual(spec);
    for (double x : {-1.5, 0.0, 2.0}) {
        EXPECT_NEAR(u.u(x), -std::exp(-1 - x), 1e-10);
        EXPECT_NEAR(u.du(x), std::exp(-1 - x), 1e-10);
    }
}

TEST(Legendre, UnboundedInfimumThrows) {
    // V = -log y: U(x) = 1 + log x for x > 0 and -infinity otherwise.
    const auto spec = DivergenceSpec::custom("neglog", [](double y) { return -std::log(y); },
                                             [](double y) { return -1 / y; }, [](double y) { return 1 / (y * y); },
                                             Domain::nonnegative, true);
    const UtilitySpec u = legendre_dual(spec);
    EXPECT_NEAR(u.u(2.0), 1 + std::log(2.0), 1e-9);
    EXPECT_THROW(u.u(-1.0), NumericalError);
}

TEST(Legendre, QuadraticDual) {
    const UtilitySpec u = legendre_dual(DivergenceSpec::quadratic());
    EXPECT_DOUBLE_EQ(u.u(-3.0), -4.5);
}

TEST(Utility, LogOnTheBinomial) {
    const ScenarioTree t = oracle::binomial();
    const OptimalWealth w = maximize_expected_utility(t, UtilitySpec::log(), 1.0);
    EXPECT_NEAR(w.strategy.at(0, 1), 1.0 / 8, 1e-9);
    EXPECT_NEAR(w.terminal_wealth[0], 1.5, 1e-9);
    EXPECT_NEAR(w.terminal_wealth[1], 0.75, 1e-9);
    EXPECT_LT(w.foc_residual, 1e-7);
    EXPECT_TRUE(is_self_financing(t, w.strategy).self_financing);
}

TEST(Utility, ExponentialOnTheBinomial) {
    const OptimalWealth w = maximize_expected_utility(oracle::binomial(), UtilitySpec::exponential(1.0), 0.0);
    EXPECT_NEAR(w.strategy.at(0, 1), std::log(2.0) / 6, 1e-9);
}

TEST(Utility, ConstantPricesHoldNothingRisky) {
    const ScenarioTree t = ScenarioTree(1, {"bond", "stock"},
                                        {node("r", "", 1, {1, 4}), node("a", "r", 0.5, {1.1, 4.4}),
                                         node("b", "r", 0.5, {1.1, 4.4})});
    const OptimalWealth w = maximize_expected_utility(t, UtilitySpec::log(), 2.0);
    EXPECT_NEAR(w.terminal_wealth[0], 2.2, 1e-12);
    EXPECT_NEAR(w.terminal_wealth[1], 2.2, 1e-12);
    EXPECT_NEAR(w.value, std::log(2.0), 1e-12);
}

TEST(Utility, OutOfDomainWealth) {
    EXPECT_THROW(maximize_expected_utility(oracle::binomial(), UtilitySpec::log(), -1.0), InputError);
    EXPECT_THROW(maximize_expected_utility(oracle::binomial(4, 8, 4.4), UtilitySpec::log(), 1.0), InputError);
}

TEST(Duality, LogBinomialGivesTheUniqueEmm) {
    const Measure m = duality_density(oracle::binomial(), UtilitySpec::log(), 1.0);
    EXPECT_NEAR(m.leaf_prob()[0], 1.0 / 3, 1e-9);
}

TEST(Duality, ExponentialMatchesEntropyMinimiser) {
    for (const ScenarioTree& t : small_incomplete(44, 6)) {
        const SelectedMeasure e = minimal_divergence_measure(t, DivergenceSpec::entropy());
        for (double a : {0.5, 1.0, 3.0}) {
            const Measure d = duality_density(t, UtilitySpec::exponential(a), 1.0);
            EXPECT_TRUE(is_martingale_measure(t, d, 1e-7).is_martingale);
            EXPECT_LT((d.leaf_prob() - e.leaf_prob).cwiseAbs().maxCoeff(), 1e-6);
        }
    }
}

TEST(Indifference, TrinomialCallUnderExponential) {
    const ScenarioTree t = oracle::trinomial();
    const Claim call(Eigen::Vector3d(4, 0, 0));
    const IndifferencePrice ip = marginal_indifference_price(t, UtilitySpec::exponential(1.0), 1.0, call);
    const Eigen::VectorXd q = oracle::grid_minimise(t, [&](const Eigen::VectorXd& x) { return entropy_of(t, x); });
    EXPECT_NEAR(ip.price, q.dot(call.payoff()), 1e-6);
    EXPECT_NEAR(ip.price, ip.dual_price, 1e-6);
    EXPECT_GE(ip.price, 0.0);
    EXPECT_LE(ip.price, 4.0 / 3);
}

TEST(Indifference, AttainableClaimGetsItsReplicationPrice) {
    const ScenarioTree t = oracle::trinomial();
    const Claim stock(Eigen::Vector3d(8, 4, 2));
    for (const UtilitySpec& u : {UtilitySpec::exponential(2.0), UtilitySpec::log(), UtilitySpec::quadratic(10.0)}) {
        const IndifferencePrice ip = marginal_indifference_price(t, u, 1.0, stock);
        EXPECT_NEAR(ip.price, 4.0, 1e-6) << u.name;
    }
}

TEST(Indifference, FuzzedWithinTheVertexInterval) {
    std::mt19937_64 rng(45);
    for (const ScenarioTree& t : small_incomplete(46, 5)) {
        const SelectedMeasure e = minimal_divergence_measure(t, DivergenceSpec::entropy());
        const auto verts = oracle::polytope_vertices(t);
        const double s00 = t.numeraire(0);
        for (int k = 0; k < 3; ++k) {
            const Claim x(random_payoff(rng, t.num_leaves()));
            const Eigen::VectorXd xi = discounted_payoff(t, x);
            const IndifferencePrice ip = marginal_indifference_price(t, UtilitySpec::exponential(1.0), 0.5, x);
            EXPECT_NEAR(ip.price, s00 * e.leaf_prob.dot(xi), 1e-6);
            double lo = 1e300, hi = -1e300;
            for (const auto& v : verts) {
                lo = std::min(lo, s00 * v.dot(xi));
                hi = std::max(hi, s00 * v.dot(xi));
            }
            EXPECT_GE(ip.price, lo - 1e-6);
            EXPECT_LE(ip.price, hi + 1e-6);
        }
    }
}
