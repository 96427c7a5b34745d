#pragma once

#include "ftap/market.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ftap {

struct FuzzBounds {
    int max_horizon = 3;
    int max_risky = 2;
    int max_children = 3;
    /// Probability that a node's children are drawn so that every risky
    /// asset has moves on both sides of the numeraire growth (a lone child
    /// then keeps all prices and the numeraire unchanged).
    double straddle_bias = 0.8;
};

/// Child prices are parent prices times factors from {1/2, 3/4, 1, 5/4, 3/2, 2};
/// numeraire growth per step is drawn from {1, 1.05, 1.1} once per parent.
ScenarioTree random_tree(std::mt19937_64& rng, const FuzzBounds& bounds = {});

/// Nonnegative integer payoffs in [0, 10].
Eigen::VectorXd random_payoff(std::mt19937_64& rng, std::size_t leaves);

/// Seed of task `index` under `master`, independent of scheduling.
std::uint64_t task_seed(std::uint64_t master, std::uint64_t index);

struct FuzzCase {
    std::uint64_t seed = 0;
    bool has_emm = false;
    bool dichotomy_ok = false;
    bool sftap_checked = false;
    bool sftap_ok = true;
    bool branching_ok = true;
    int dimension = -1;
    std::string failure;
};

/// Dichotomy, SFTAP equivalence (dimension 0 <=> `claims` random claims
/// replicate <=> no second measure) and branching bound on one tree.
FuzzCase fuzz_one(std::uint64_t seed, const FuzzBounds& bounds = {}, int claims = 20);

struct FuzzReport {
    std::uint64_t master_seed = 0;
    std::uint64_t count = 0;
    std::uint64_t arbitrage = 0;
    std::uint64_t complete = 0;
    std::uint64_t incomplete = 0;
    std::uint64_t dichotomy_failures = 0;
    std::uint64_t sftap_failures = 0;
    std::uint64_t branching_failures = 0;
    std::vector<FuzzCase> failures;  ///< in task order

    bool ok() const { return dichotomy_failures == 0 && sftap_failures == 0 && branching_failures == 0; }
};

/// Runs fuzz_one on `count` task seeds split over `threads` workers; the
/// report does not depend on the number of threads.
FuzzReport run_fuzz(std::uint64_t master_seed, std::uint64_t count, const FuzzBounds& bounds = {}, int threads = 1,
                    int claims = 20);

}  // namespace ftap
