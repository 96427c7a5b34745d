#include "oracles.hpp"

#include "ftap/arbitrage.hpp"
#include "ftap/error.hpp"
#include "ftap/fuzz.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ftap;
using oracle::node;

namespace {

ScenarioTree second_period_arbitrage() {
    return ScenarioTree(2, {"bond", "stock"},
                        {node("r", "", 1, {1, 4}), node("u", "r", 0.5, {1, 8}), node("uu", "u", 0.5, {1, 16}),
                         node("ud", "u", 0.5, {1, 4}), node("d", "r", 0.5, {1, 2}), node("du", "d", 0.5, {1, 4}),
                         node("dd", "d", 0.5, {1, 3})});
}

Eigen::VectorXd leaf_values(const ScenarioTree& t, const Eigen::VectorXd& nodes) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.num_leaves()));
    for (LeafIndex l = 0; l < t.num_leaves(); ++l) v[static_cast<Eigen::Index>(l)] = nodes[t.leaf_node(l)];
    return v;
}

}  // namespace

TEST(Martingale, BinomialRiskNeutral) {
    const ScenarioTree t = oracle::binomial();
    EXPECT_TRUE(is_martingale_measure(t, Measure(Eigen::Vector2d(1.0 / 3, 2.0 / 3))).is_martingale);
}

TEST(Martingale, PhysicalMeasureFailsWithResidualOne) {
    const ScenarioTree t = oracle::binomial();
    const auto check = is_martingale_measure(t, Measure(Eigen::Vector2d(0.5, 0.5)));
    EXPECT_FALSE(check.is_martingale);
    EXPECT_NEAR(check.worst_residual, 1.0, 1e-12);
}

TEST(Martingale, ConstantPricesAnyMeasure) {
    const ScenarioTree t = oracle::one_period(4, {4, 4, 4}, {0.2, 0.3, 0.5});
    EXPECT_TRUE(is_martingale_measure(t, Measure(Eigen::Vector3d(0.1, 0.6, 0.3))).is_martingale);
}

TEST(Measure, RejectsZeroAndUnnormalised) {
    EXPECT_THROW(Measure(Eigen::Vector2d(1.0, 0.0)), InputError);
    EXPECT_THROW(Measure(Eigen::Vector2d(0.5, 0.6)), InputError);
}

TEST(FindEmm, BinomialUnique) {
    const auto q = find_emm(oracle::binomial());
    ASSERT_TRUE(q);
    EXPECT_NEAR(q->leaf_prob()[0], 1.0 / 3, 1e-12);
}

TEST(FindEmm, NoneWhenDownBeatsNumeraire) { EXPECT_FALSE(find_emm(oracle::binomial(4, 8, 4.4))); }

TEST(FindEmm, TrinomialStrictlyPositive) {
    const ScenarioTree t = oracle::trinomial();
    const auto q = find_emm(t);
    ASSERT_TRUE(q);
    const Eigen::VectorXd& p = q->leaf_prob();
    EXPECT_GT(p.minCoeff(), 0.0);
    EXPECT_NEAR(8 * p[0] + 4 * p[1] + 2 * p[2], 4.0, 1e-12);
    // Max-min: {q_u = q_d/2} with q_m free; the optimum equalises q_u and q_m.
    EXPECT_NEAR(p[0], 0.25, 1e-9);
    EXPECT_NEAR(p[1], 0.25, 1e-9);
    EXPECT_NEAR(*emm_max_min_probability(t), 0.25, 1e-9);
}

TEST(FindArbitrage, LongStockShortNumeraire) {
    const ScenarioTree t = oracle::binomial(4, 8, 4.4);
    const auto a = find_arbitrage(t);
    ASSERT_TRUE(a);
    EXPECT_TRUE(is_arbitrage(t, *a));
    EXPECT_TRUE(is_admissible(t, *a));
    EXPECT_GT(a->at(0, 1), 0.0);
    EXPECT_LT(a->at(0, 0), 0.0);
}

TEST(FindArbitrage, NoneOnStandardBinomial) { EXPECT_FALSE(find_arbitrage(oracle::binomial())); }

TEST(FindArbitrage, ActiveOnlyWhereTheOpportunityIs) {
    const ScenarioTree t = second_period_arbitrage();
    const auto a = find_arbitrage(t);
    ASSERT_TRUE(a);
    EXPECT_TRUE(is_arbitrage(t, *a));
    EXPECT_TRUE(is_admissible(t, *a));
    EXPECT_EQ(a->at(0), Eigen::RowVectorXd::Zero(2));
    EXPECT_EQ(a->at(*t.find("u")), Eigen::RowVectorXd::Zero(2));
    EXPECT_GT(a->at(*t.find("d"), 1), 0.0);
}

TEST(Verdict, ExactlyOneCertificate) {
    const auto good = fftap_verdict(oracle::binomial());
    ASSERT_TRUE(good.has_emm());
    EXPECT_FALSE(good.has_arbitrage());
    EXPECT_NEAR(good.emm().leaf_prob()[0], 1.0 / 3, 1e-12);

    const auto bad = fftap_verdict(oracle::binomial(4, 8, 4.4));
    EXPECT_TRUE(bad.has_arbitrage());
    EXPECT_FALSE(bad.has_emm());

    const ScenarioTree flat = oracle::one_period(4, {4, 4}, {0.3, 0.7});
    const auto c = fftap_verdict(flat);
    ASSERT_TRUE(c.has_emm());
    EXPECT_TRUE(is_martingale_measure(flat, Measure(flat.physical_leaf_probs())).is_martingale);
}

TEST(Verdict, SignAnalysisOracleOnOnePeriodTrees) {
    // With d = 1 and one period an arbitrage exists iff the discounted
    // increments are all >= 0 or all <= 0 and not all zero.
    const double grid[] = {1, 2, 3, 4, 5, 6};
    int checked = 0;
    for (int k = 1; k <= 3; ++k) {
        std::vector<int> idx(static_cast<std::size_t>(k), 0);
        while (true) {
            std::vector<double> stock;
            for (int i : idx) stock.push_back(grid[i]);
            const std::vector<double> probs(static_cast<std::size_t>(k), 1.0 / k);
            const ScenarioTree t = oracle::one_period(3.0, stock, probs);
            bool pos = false, neg = false;
            for (double s : stock) {
                pos = pos || s > 3.0;
                neg = neg || s < 3.0;
            }
            const bool oracle_arbitrage = pos != neg;
            const auto v = fftap_verdict(t);
            EXPECT_EQ(v.has_arbitrage(), oracle_arbitrage);
            ++checked;
            int pos_i = 0;
            while (pos_i < k && ++idx[static_cast<std::size_t>(pos_i)] == 6) idx[static_cast<std::size_t>(pos_i++)] = 0;
            if (pos_i == k) break;
        }
    }
    EXPECT_EQ(checked, 6 + 36 + 216);
}

TEST(Verdict, InvariantUnderPredictableNumeraireChange) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> factor(0.5, 2.0);
    for (int k = 0; k < 200; ++k) {
        const ScenarioTree t = random_tree(rng);
        std::vector<double> per_parent(t.num_nodes());
        for (auto& f : per_parent) f = factor(rng);
        std::vector<NodeSpec> nodes;
        for (NodeIndex n = 0; n < t.num_nodes(); ++n) {
            const double f = t.is_root(n) ? per_parent[0] : per_parent[t.parent(n)];
            std::vector<double> prices;
            for (int a = 0; a < t.num_assets(); ++a) prices.push_back(t.price(n, a) * f);
            nodes.push_back(node(t.id(n), t.is_root(n) ? "" : t.id(t.parent(n)), t.edge_prob(n), prices));
        }
        const ScenarioTree scaled(t.horizon(), t.asset_names(), nodes);
        ASSERT_TRUE(scaled.valid());
        EXPECT_EQ(fftap_verdict(t).has_emm(), fftap_verdict(scaled).has_emm());
    }
}

TEST(Verdict, ZeroInitialStrategiesHaveZeroExpectedGain) {
    std::mt19937_64 rng(22);
    int with_emm = 0;
    for (int k = 0; k < 200; ++k) {
        const ScenarioTree t = random_tree(rng);
        const auto q = find_emm(t);
        if (!q) continue;
        ++with_emm;
        for (int s = 0; s < 20; ++s) {
            const Eigen::MatrixXd risky =
                Eigen::MatrixXd::Random(static_cast<Eigen::Index>(t.num_nodes()), t.num_risky()) * 5.0;
            const Strategy phi = self_financing_from_risky(t, risky, 0.0);
            const Eigen::VectorXd vt = leaf_values(t, value_process(t, phi).discounted);
            EXPECT_LE(std::abs(q->expectation(vt)), 1e-9);
            EXPECT_FALSE(is_arbitrage(t, phi));
        }
    }
    EXPECT_GT(with_emm, 50);
}

TEST(Exact, AgreesWithFloatingPoint) {
    std::mt19937_64 rng(23);
    for (int k = 0; k < 150; ++k) {
        const ScenarioTree t = random_tree(rng);
        const ExactVerdict ex = fftap_verdict_exact(t);
        EXPECT_EQ(ex.has_emm, fftap_verdict(t).has_emm());
        if (ex.has_emm) {
            Rational sum = 0;
            for (const auto& q : ex.leaf_prob) {
                EXPECT_GT(q, 0);
                sum += q;
            }
            EXPECT_EQ(sum, 1);
        } else {
            ASSERT_TRUE(ex.arbitrage);
            for (const auto& g : ex.terminal_gains) EXPECT_GE(g, 0);
        }
    }
}

TEST(Exact, BinomialThirdIsExact) {
    const ExactVerdict ex = fftap_verdict_exact(oracle::binomial());
    ASSERT_TRUE(ex.has_emm);
    EXPECT_EQ(ex.leaf_prob[0], Rational(1, 3));
    EXPECT_EQ(ex.leaf_prob[1], Rational(2, 3));
}
